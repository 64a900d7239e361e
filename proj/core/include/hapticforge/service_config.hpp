#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace hapticforge {

/// Settings for `serve`. Loaded from a flat TOML subset: `key = value`
/// lines with quoted strings, numbers or booleans, `#` comments and
/// optional `[section]` headers (ignored).
struct ServiceConfig {
    std::string listen = "127.0.0.1:8080";
    std::filesystem::path data_dir = "study-data";
    /// Empty selects the procedural stimuli.
    std::filesystem::path stimulus_dir;
    std::filesystem::path ui_dir;
    std::string sink = "simulated"; // simulated | log-only
    std::string clock = "realtime"; // realtime | simulated
    double pwm_frequency_hz = 100.0;
    bool async_playback = true;

    /// Applies one `key=value` override; value uses the same syntax as the file,
    /// except that bare strings are accepted.
    void set(std::string_view key, std::string_view value);
    /// Throws Error("ConfigInvalid").
    void check() const;

    std::string host() const;
    int port() const;
};

ServiceConfig parse_service_config(std::string_view text);
ServiceConfig load_service_config(const std::filesystem::path& path);

} // namespace hapticforge
