#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "hapticforge/error.hpp"

namespace hapticforge {

struct ChatMessage {
    std::string role;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct CompletionOptions {
    std::string model_id = "gpt-4o";
    double temperature = 0.7;
};

/// Chat-completion contract. Implementations must be safe to call from
/// several threads at once. Transport failures throw Error("LlmUnreachable").
class LanguageModelClient {
public:
    virtual ~LanguageModelClient() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages, const CompletionOptions& options) = 0;
};

/// JSON body of a chat-completion request.
std::string build_chat_request(const std::vector<ChatMessage>& messages, const CompletionOptions& options);

/// Extracts choices[0].message.content; throws Error("LlmBadResponse").
std::string parse_chat_response(std::string_view body);

struct HttpClientConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string token_env = "HAPTICFORGE_LLM_TOKEN";
    int timeout_s = 120;
};

/// POSTs to `<base_url>/chat/completions` with a bearer token read from the
/// environment variable named in the config. One connection per request.
class HttpChatClient final : public LanguageModelClient {
public:
    explicit HttpChatClient(HttpClientConfig config);
    std::string complete(const std::vector<ChatMessage>& messages, const CompletionOptions& options) override;

private:
    HttpClientConfig config_;
    std::string scheme_host_;
    std::string path_prefix_;
};

/// Replays canned responses in call order and records every request.
/// Running past the last response throws Error("LlmUnreachable").
class MockChatClient final : public LanguageModelClient {
public:
    explicit MockChatClient(std::vector<std::string> responses);

    /// Loads every regular file of `dir`, sorted by file name.
    static MockChatClient from_directory(const std::filesystem::path& dir);
    static std::vector<std::string> responses_from_directory(const std::filesystem::path& dir);

    std::string complete(const std::vector<ChatMessage>& messages, const CompletionOptions& options) override;

    std::size_t call_count() const;
    std::vector<std::vector<ChatMessage>> requests() const;

private:
    std::vector<std::string> responses_;
    std::vector<std::vector<ChatMessage>> requests_;
    mutable std::mutex mutex_;
};

} // namespace hapticforge
