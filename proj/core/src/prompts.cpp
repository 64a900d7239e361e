#include "hapticforge/prompts.hpp"

#include <fstream>
#include <sstream>

#include "hapticforge/data_dir.hpp"
#include "hapticforge/error.hpp"

namespace hapticforge {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("IoError", "prompt directory not found: " + dir.string());
    PromptLibrary lib;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        lib.templates_[entry.path().stem().string()] = read_file(entry.path());
    }
    if (auto version = dir / "VERSION"; std::filesystem::exists(version)) {
        lib.version_ = read_file(version);
        while (!lib.version_.empty() && (lib.version_.back() == '\n' || lib.version_.back() == '\r')) {
            lib.version_.pop_back();
        }
    }
    return lib;
}

const PromptLibrary& PromptLibrary::shipped() {
    static const PromptLibrary lib = load(data_dir() / "prompts");
    return lib;
}

std::string PromptLibrary::render(const std::string& name, const Vars& vars) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw Error("PromptTemplate", "no prompt template named '" + name + "'");
    const std::string& text = it->second;
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (true) {
        auto open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            return out;
        }
        auto close = text.find("}}", open + 2);
        if (close == std::string::npos) throw Error("PromptTemplate", "unterminated placeholder in '" + name + "'");
        out.append(text, pos, open - pos);
        const std::string key = text.substr(open + 2, close - open - 2);
        auto var = vars.find(key);
        if (var == vars.end()) throw Error("PromptTemplate", "template '" + name + "' needs '" + key + "'");
        out += var->second;
        pos = close + 2;
    }
}

} // namespace hapticforge
