#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "hapticforge/study.hpp"

namespace hapticforge {

struct ServerOptions {
    std::string host = "127.0.0.1";
    /// 0 binds an ephemeral port.
    int port = 8080;
    /// Served at `/` when set and present.
    std::filesystem::path ui_dir;
};

/// HTTP front end for a StudyService. Error bodies are
/// `{"error": <code>, "message": <text>}`.
class StudyServer {
public:
    StudyServer(StudyService& service, ServerOptions options);
    ~StudyServer();

    StudyServer(const StudyServer&) = delete;
    StudyServer& operator=(const StudyServer&) = delete;

    /// Binds the socket and returns the bound port. Throws Error("BindFailed").
    int bind();
    /// Serves on the bound socket until stop(); binds first if needed.
    void listen();
    /// Runs listen() on a background thread and waits until it accepts.
    void start();
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// HTTP status used for a domain error code.
int http_status_for(const std::string& error_code);

} // namespace hapticforge
