#include "hapticforge/llm_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace hapticforge {

using nlohmann::json;

std::string build_chat_request(const std::vector<ChatMessage>& messages, const CompletionOptions& options) {
    json body;
    body["model"] = options.model_id;
    body["temperature"] = options.temperature;
    body["messages"] = json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    return body.dump();
}

std::string parse_chat_response(std::string_view body) {
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw Error("LlmBadResponse", "response body is not JSON");
    try {
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        if (content.is_null()) return {};
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw Error("LlmBadResponse", std::string("unexpected response shape: ") + e.what());
    }
}

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
    std::string url = config_.base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    auto scheme_end = url.find("://");
    auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_ = url;
    } else {
        scheme_host_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
    }
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages, const CompletionOptions& options) {
    httplib::Client client(scheme_host_);
    client.set_connection_timeout(config_.timeout_s);
    client.set_read_timeout(config_.timeout_s);
    httplib::Headers headers;
    if (const char* token = std::getenv(config_.token_env.c_str()); token != nullptr && *token != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto result = client.Post(path_prefix_ + "/chat/completions", headers, build_chat_request(messages, options),
                              "application/json");
    if (!result) {
        throw Error("LlmUnreachable", "request to " + scheme_host_ + " failed: " + httplib::to_string(result.error()));
    }
    if (result->status < 200 || result->status >= 300) {
        throw Error("LlmUnreachable", "model endpoint returned HTTP " + std::to_string(result->status));
    }
    return parse_chat_response(result->body);
}

MockChatClient::MockChatClient(std::vector<std::string> responses) : responses_(std::move(responses)) {}

std::vector<std::string> MockChatClient::responses_from_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("IoError", "mock directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<std::string> responses;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        responses.push_back(buffer.str());
    }
    return responses;
}

MockChatClient MockChatClient::from_directory(const std::filesystem::path& dir) {
    return MockChatClient(responses_from_directory(dir));
}

std::string MockChatClient::complete(const std::vector<ChatMessage>& messages, const CompletionOptions&) {
    std::lock_guard lock(mutex_);
    requests_.push_back(messages);
    if (requests_.size() > responses_.size()) {
        throw Error("LlmUnreachable", "mock client has no response for call " + std::to_string(requests_.size()));
    }
    return responses_[requests_.size() - 1];
}

std::size_t MockChatClient::call_count() const {
    std::lock_guard lock(mutex_);
    return requests_.size();
}

std::vector<std::vector<ChatMessage>> MockChatClient::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

} // namespace hapticforge
