#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace hapticforge {

/// Versioned prompt templates loaded from `<dir>/<name>.txt`. Placeholders
/// are written `{{key}}`; rendering with a missing key throws
/// Error("PromptTemplate").
class PromptLibrary {
public:
    using Vars = std::map<std::string, std::string>;

    static PromptLibrary load(const std::filesystem::path& dir);
    /// Templates shipped under data_dir()/prompts.
    static const PromptLibrary& shipped();

    std::string render(const std::string& name, const Vars& vars) const;
    const std::string& version() const { return version_; }

private:
    std::map<std::string, std::string> templates_;
    std::string version_;
};

} // namespace hapticforge
