// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace citynav::clients
{

struct ImageAttachment
{
    std::string mime = "image/jpeg";
    std::string bytes;
};

struct ChatMessage
{
    std::string role;
    std::string text;
    std::vector<ImageAttachment> images;
};

struct GenerationParams
{
    double temperature = 1.0;
    double top_p = 1.0;
    std::optional<int> top_k;
    double presence_penalty = 0.0;
    double frequency_penalty = 0.0;
    std::optional<double> repeat_penalty;
    std::optional<int> repeat_last_n;
    /// -1 lets the provider decide (Ollama's num_predict semantics).
    int max_tokens = 8000;
    int candidate_count = 1;

    /// Throws InvalidArgument for values outside provider-documented ranges.
    void validate() const;
};

struct ChatRequest
{
    std::string model;
    std::vector<ChatMessage> messages;
    GenerationParams params;
    /// Local tag ("decision", "self_position", ...); never sent to providers.
    std::string purpose;
};

struct Usage
{
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ChatResponse
{
    std::string text;
    Usage usage;
    double latency_ms = 0.0;
    int retry_count = 0;
};

class ChatClient
{
  public:
    virtual ~ChatClient() = default;
    /// Must be safe to call from concurrent episodes.
    virtual ChatResponse chat(const ChatRequest& req) = 0;
};

/// A single request attempt. Transient failures are reported as
/// ClientUnavailable, credential problems as ConfigError.
class ChatTransport
{
  public:
    virtual ~ChatTransport() = default;
    virtual ChatResponse send(const ChatRequest& req) = 0;
};

struct RetryPolicy
{
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff {500};
    double multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Exponential backoff over a transport.
class RetryingChatClient final: public ChatClient
{
  public:
    explicit RetryingChatClient(std::unique_ptr<ChatTransport> transport, RetryPolicy policy = {},
                                Sleeper sleep = nullptr);

    ChatResponse chat(const ChatRequest& req) override;

  private:
    std::unique_ptr<ChatTransport> _transport;
    RetryPolicy _policy;
    Sleeper _sleep;
};

/// Offline client. Replies come from a responder callback; every request is
/// recorded for inspection.
class MockChatClient final: public ChatClient
{
  public:
    using Responder = std::function<std::string(const ChatRequest&)>;

    explicit MockChatClient(Responder responder);

    /// Replays `replies` in order, then fails with ClientUnavailable.
    static std::unique_ptr<MockChatClient> scripted(std::vector<std::string> replies);

    ChatResponse chat(const ChatRequest& req) override;

    [[nodiscard]] std::vector<ChatRequest> requests() const;
    [[nodiscard]] std::size_t call_count() const;

  private:
    Responder _responder;
    mutable std::mutex _mutex;
    std::vector<ChatRequest> _requests;
};

enum class Provider
{
    OpenAI,
    Gemini,
    Ollama,
};

struct ProviderProfile
{
    Provider provider = Provider::OpenAI;
    std::string model;
    std::string base_url;
    /// Environment variable holding the API key; empty when none is needed.
    std::string api_key_env;
    GenerationParams params;

    static ProviderProfile openai(std::string model = "gpt-4.1");
    static ProviderProfile gemini(std::string model = "gemini-2.5-flash");
    static ProviderProfile ollama(std::string model = "qwen2.5vl:32b");
    static ProviderProfile named(const std::string& provider);
};

struct HttpRequestSpec
{
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
};

struct HttpResult
{
    int status = 0;
    std::string body;
    std::string error;
};

using HttpPost = std::function<HttpResult(const HttpRequestSpec&)>;

HttpPost default_http_post();

/// Provider-specific request body for one chat call.
HttpRequestSpec build_http_request(const ProviderProfile& profile, const ChatRequest& req, const std::string& api_key);
ChatResponse parse_http_response(Provider provider, const std::string& body);

class HttpChatTransport final: public ChatTransport
{
  public:
    /// Resolves the API key from the profile's environment variable and
    /// throws ConfigError when it is missing.
    explicit HttpChatTransport(ProviderProfile profile, HttpPost post = default_http_post());

    ChatResponse send(const ChatRequest& req) override;

  private:
    ProviderProfile _profile;
    std::string _key;
    HttpPost _post;
};

std::string base64_encode(const std::string& bytes);

} // namespace citynav::clients
