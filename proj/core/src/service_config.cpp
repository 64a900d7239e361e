#include "hapticforge/service_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hapticforge/error.hpp"

namespace hapticforge {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void invalid(const std::string& msg) { throw Error("ConfigInvalid", msg); }

// Returns the decoded scalar; strings lose their quotes, comments are dropped.
std::string decode_value(std::string_view raw, bool allow_bare, int line) {
    raw = trim(raw);
    const std::string where = line > 0 ? "line " + std::to_string(line) + ": " : "";
    if (!raw.empty() && raw.front() == '"') {
        std::string out;
        std::size_t i = 1;
        for (; i < raw.size() && raw[i] != '"'; ++i) {
            if (raw[i] == '\\' && i + 1 < raw.size()) {
                const char c = raw[++i];
                switch (c) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '\\': out += '\\'; break;
                case '"': out += '"'; break;
                default: invalid(where + "unsupported escape \\" + std::string(1, c));
                }
            } else {
                out += raw[i];
            }
        }
        if (i >= raw.size()) invalid(where + "unterminated string");
        const auto rest = trim(raw.substr(i + 1));
        if (!rest.empty() && rest.front() != '#') invalid(where + "trailing characters after string");
        return out;
    }
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = trim(raw.substr(0, hash));
    if (raw.empty()) invalid(where + "missing value");
    if (!allow_bare) {
        const bool numeric = raw.find_first_not_of("0123456789+-.eE_") == std::string_view::npos;
        if (!numeric && raw != "true" && raw != "false") invalid(where + "unquoted string value '" + std::string(raw) + "'");
    }
    return std::string(raw);
}

double to_double(const std::string& key, const std::string& v) {
    std::string digits;
    for (char c : v) {
        if (c != '_') digits += c;
    }
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) invalid(key + " must be a number");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    invalid(key + " must be true or false");
}

void assign(ServiceConfig& c, std::string_view key, const std::string& v) {
    const std::string k(key);
    if (k == "listen") c.listen = v;
    else if (k == "data_dir") c.data_dir = v;
    else if (k == "stimulus_dir") c.stimulus_dir = v;
    else if (k == "ui_dir") c.ui_dir = v;
    else if (k == "sink") c.sink = v;
    else if (k == "clock") c.clock = v;
    else if (k == "pwm_frequency_hz") c.pwm_frequency_hz = to_double(k, v);
    else if (k == "async_playback") c.async_playback = to_bool(k, v);
    else invalid("unknown key '" + k + "'");
}

} // namespace

void ServiceConfig::set(std::string_view key, std::string_view value) {
    assign(*this, trim(key), decode_value(value, true, 0));
}

void ServiceConfig::check() const {
    if (sink != "simulated" && sink != "log-only") invalid("sink must be 'simulated' or 'log-only'");
    if (clock != "realtime" && clock != "simulated") invalid("clock must be 'realtime' or 'simulated'");
    if (!(pwm_frequency_hz > 0.0)) invalid("pwm_frequency_hz must be positive");
    if (data_dir.empty()) invalid("data_dir must be set");
    port();
}

std::string ServiceConfig::host() const {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) invalid("listen must be host:port");
    return listen.substr(0, colon);
}

int ServiceConfig::port() const {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) invalid("listen must be host:port");
    int port = -1;
    const char* first = listen.data() + colon + 1;
    const char* last = listen.data() + listen.size();
    const auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || ptr != last || port < 0 || port > 65535) invalid("listen port is invalid");
    return port;
}

ServiceConfig parse_service_config(std::string_view text) {
    ServiceConfig c;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        auto line = trim(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') invalid("line " + std::to_string(line_no) + ": malformed section header");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) invalid("line " + std::to_string(line_no) + ": expected key = value");
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) invalid("line " + std::to_string(line_no) + ": empty key");
        assign(c, key, decode_value(line.substr(eq + 1), false, line_no));
    }
    return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("ConfigInvalid", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto c = parse_service_config(ss.str());
    // Relative paths resolve against the config file's directory.
    const auto base = path.parent_path();
    for (auto* p : {&c.data_dir, &c.stimulus_dir, &c.ui_dir}) {
        if (!p->empty() && p->is_relative()) *p = base / *p;
    }
    return c;
}

} // namespace hapticforge
