// SPDX-License-Identifier: Apache-2.0
#include <citynav/chat.hpp>
#include <citynav/error.hpp>

#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <thread>

namespace citynav::clients
{

using nlohmann::json;

void GenerationParams::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            fail(ErrorCode::InvalidArgument, what);
    };
    require(temperature >= 0.0 && temperature <= 2.0, "temperature must lie in [0, 2]");
    require(top_p >= 0.0 && top_p <= 1.0, "top_p must lie in [0, 1]");
    require(!top_k || *top_k >= 1, "top_k must be at least 1");
    require(presence_penalty >= -2.0 && presence_penalty <= 2.0, "presence_penalty must lie in [-2, 2]");
    require(frequency_penalty >= -2.0 && frequency_penalty <= 2.0, "frequency_penalty must lie in [-2, 2]");
    require(!repeat_penalty || *repeat_penalty > 0.0, "repeat_penalty must be positive");
    require(!repeat_last_n || *repeat_last_n >= -1, "repeat_last_n must be >= -1");
    require(max_tokens == -1 || max_tokens >= 1, "max_tokens must be positive or -1");
    require(candidate_count == 1, "exactly one response candidate is supported");
}

RetryingChatClient::RetryingChatClient(std::unique_ptr<ChatTransport> transport, RetryPolicy policy, Sleeper sleep):
    _transport(std::move(transport)), _policy(policy), _sleep(std::move(sleep))
{
    if (!_sleep)
        _sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (_policy.max_attempts < 1)
        fail(ErrorCode::InvalidArgument, "retry policy needs at least one attempt");
}

ChatResponse RetryingChatClient::chat(const ChatRequest& req)
{
    req.params.validate();
    auto backoff = _policy.initial_backoff;
    for (int attempt = 0;; ++attempt)
    {
        const auto started = std::chrono::steady_clock::now();
        try
        {
            auto res = _transport->send(req);
            res.retry_count = attempt;
            res.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
            spdlog::debug("chat[{}] model={} latency={:.0f}ms tokens={}/{} retries={}", req.purpose, req.model,
                          res.latency_ms, res.usage.prompt_tokens, res.usage.completion_tokens, attempt);
            return res;
        }
        catch (const Error& e)
        {
            if (e.code() != ErrorCode::ClientUnavailable)
                throw;
            if (attempt + 1 >= _policy.max_attempts)
                fail(ErrorCode::ClientUnavailable,
                     "giving up after " + std::to_string(_policy.max_attempts) + " attempts: " + e.what());
            spdlog::warn("chat attempt {} failed ({}), retrying in {} ms", attempt + 1, e.what(), backoff.count());
            _sleep(backoff);
            backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * _policy.multiplier));
        }
    }
}

MockChatClient::MockChatClient(Responder responder): _responder(std::move(responder)) {}

std::unique_ptr<MockChatClient> MockChatClient::scripted(std::vector<std::string> replies)
{
    auto script = std::make_shared<std::vector<std::string>>(std::move(replies));
    auto cursor = std::make_shared<std::size_t>(0);
    return std::make_unique<MockChatClient>([script, cursor](const ChatRequest&) {
        if (*cursor >= script->size())
            fail(ErrorCode::ClientUnavailable, "mock script exhausted");
        return (*script)[(*cursor)++];
    });
}

ChatResponse MockChatClient::chat(const ChatRequest& req)
{
    req.params.validate();
    std::lock_guard lock(_mutex);
    _requests.push_back(req);
    ChatResponse res;
    res.text = _responder(req);
    return res;
}

std::vector<ChatRequest> MockChatClient::requests() const
{
    std::lock_guard lock(_mutex);
    return _requests;
}

std::size_t MockChatClient::call_count() const
{
    std::lock_guard lock(_mutex);
    return _requests.size();
}

ProviderProfile ProviderProfile::openai(std::string model)
{
    ProviderProfile p;
    p.provider = Provider::OpenAI;
    p.model = std::move(model);
    p.base_url = "https://api.openai.com";
    p.api_key_env = "OPENAI_API_KEY";
    p.params = GenerationParams {.temperature = 1.0, .top_p = 1.0, .max_tokens = 8000};
    return p;
}

ProviderProfile ProviderProfile::gemini(std::string model)
{
    ProviderProfile p;
    p.provider = Provider::Gemini;
    p.model = std::move(model);
    p.base_url = "https://generativelanguage.googleapis.com";
    p.api_key_env = "GEMINI_API_KEY";
    p.params = GenerationParams {.temperature = 1.0, .top_p = 0.95, .top_k = 64, .max_tokens = 8000};
    return p;
}

ProviderProfile ProviderProfile::ollama(std::string model)
{
    ProviderProfile p;
    p.provider = Provider::Ollama;
    p.model = std::move(model);
    p.base_url = "http://localhost:11434";
    p.params = GenerationParams {
        .temperature = 0.8,
        .top_p = 0.9,
        .top_k = 40,
        .repeat_penalty = 1.1,
        .repeat_last_n = 64,
        .max_tokens = -1,
    };
    return p;
}

ProviderProfile ProviderProfile::named(const std::string& provider)
{
    if (provider == "openai")
        return openai();
    if (provider == "gemini")
        return gemini();
    if (provider == "ollama")
        return ollama();
    fail(ErrorCode::ConfigError, "unknown chat provider '" + provider + "'");
}

std::string base64_encode(const std::string& bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

HttpRequestSpec build_http_request(const ProviderProfile& profile, const ChatRequest& req, const std::string& api_key)
{
    req.params.validate();
    const auto& p = req.params;
    HttpRequestSpec spec;
    spec.headers.emplace_back("Content-Type", "application/json");

    switch (profile.provider)
    {
        case Provider::OpenAI:
        {
            json messages = json::array();
            for (const auto& m: req.messages)
            {
                json content = json::array();
                content.push_back({{"type", "text"}, {"text", m.text}});
                for (const auto& img: m.images)
                    content.push_back({{"type", "image_url"},
                                       {"image_url", {{"url", "data:" + img.mime + ";base64," + base64_encode(img.bytes)}}}});
                messages.push_back({{"role", m.role}, {"content", std::move(content)}});
            }
            json body {
                {"model", req.model},
                {"messages", std::move(messages)},
                {"temperature", p.temperature},
                {"top_p", p.top_p},
                {"presence_penalty", p.presence_penalty},
                {"frequency_penalty", p.frequency_penalty},
                {"n", p.candidate_count},
                {"stream", false},
            };
            if (p.max_tokens > 0)
                body["max_tokens"] = p.max_tokens;
            spec.url = profile.base_url + "/v1/chat/completions";
            spec.headers.emplace_back("Authorization", "Bearer " + api_key);
            spec.body = body.dump();
            break;
        }
        case Provider::Gemini:
        {
            json contents = json::array();
            json system;
            for (const auto& m: req.messages)
            {
                json parts = json::array();
                parts.push_back({{"text", m.text}});
                for (const auto& img: m.images)
                    parts.push_back({{"inline_data", {{"mime_type", img.mime}, {"data", base64_encode(img.bytes)}}}});
                if (m.role == "system")
                    system = {{"parts", std::move(parts)}};
                else
                    contents.push_back({{"role", m.role == "assistant" ? "model" : "user"}, {"parts", std::move(parts)}});
            }
            json config {{"temperature", p.temperature}, {"topP", p.top_p}, {"candidateCount", p.candidate_count}};
            if (p.top_k)
                config["topK"] = *p.top_k;
            if (p.max_tokens > 0)
                config["maxOutputTokens"] = p.max_tokens;
            json body {{"contents", std::move(contents)}, {"generationConfig", std::move(config)}};
            if (!system.is_null())
                body["systemInstruction"] = std::move(system);
            spec.url = profile.base_url + "/v1beta/models/" + req.model + ":generateContent";
            spec.headers.emplace_back("x-goog-api-key", api_key);
            spec.body = body.dump();
            break;
        }
        case Provider::Ollama:
        {
            json messages = json::array();
            for (const auto& m: req.messages)
            {
                json msg {{"role", m.role}, {"content", m.text}};
                if (!m.images.empty())
                {
                    json images = json::array();
                    for (const auto& img: m.images)
                        images.push_back(base64_encode(img.bytes));
                    msg["images"] = std::move(images);
                }
                messages.push_back(std::move(msg));
            }
            json options {{"temperature", p.temperature}, {"top_p", p.top_p}, {"num_predict", p.max_tokens}};
            if (p.top_k)
                options["top_k"] = *p.top_k;
            if (p.repeat_penalty)
                options["repeat_penalty"] = *p.repeat_penalty;
            if (p.repeat_last_n)
                options["repeat_last_n"] = *p.repeat_last_n;
            json body {{"model", req.model}, {"messages", std::move(messages)}, {"stream", false}, {"options", std::move(options)}};
            spec.url = profile.base_url + "/api/chat";
            spec.body = body.dump();
            break;
        }
    }
    return spec;
}

ChatResponse parse_http_response(Provider provider, const std::string& body)
{
    ChatResponse res;
    try
    {
        const auto j = json::parse(body);
        switch (provider)
        {
            case Provider::OpenAI:
                res.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
                if (j.contains("usage"))
                {
                    res.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
                    res.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
                }
                break;
            case Provider::Gemini:
                for (const auto& part: j.at("candidates").at(0).at("content").at("parts"))
                    res.text += part.value("text", "");
                if (j.contains("usageMetadata"))
                {
                    res.usage.prompt_tokens = j["usageMetadata"].value("promptTokenCount", 0);
                    res.usage.completion_tokens = j["usageMetadata"].value("candidatesTokenCount", 0);
                }
                break;
            case Provider::Ollama:
                res.text = j.at("message").at("content").get<std::string>();
                res.usage.prompt_tokens = j.value("prompt_eval_count", 0);
                res.usage.completion_tokens = j.value("eval_count", 0);
                break;
        }
    }
    catch (const json::exception& e)
    {
        fail(ErrorCode::ProviderError, std::string("unexpected provider response: ") + e.what());
    }
    return res;
}

HttpChatTransport::HttpChatTransport(ProviderProfile profile, HttpPost post):
    _profile(std::move(profile)), _post(std::move(post))
{
    if (!_profile.api_key_env.empty())
    {
        const char* key = std::getenv(_profile.api_key_env.c_str());
        if (key == nullptr || *key == '\0')
            fail(ErrorCode::ConfigError, "environment variable " + _profile.api_key_env + " is not set");
        _key = key;
    }
}

ChatResponse HttpChatTransport::send(const ChatRequest& req)
{
    const auto spec = build_http_request(_profile, req, _key);
    const auto res = _post(spec);
    if (res.status == 0 || res.status == 429 || res.status >= 500)
        fail(ErrorCode::ClientUnavailable, "transient failure: status " + std::to_string(res.status)
                                               + (res.error.empty() ? "" : " (" + res.error + ")"));
    if (res.status == 401 || res.status == 403)
        fail(ErrorCode::ConfigError, "provider rejected credentials: status " + std::to_string(res.status));
    if (res.status != 200)
        fail(ErrorCode::ProviderError, "provider returned status " + std::to_string(res.status) + ": " + res.body);
    return parse_http_response(_profile.provider, res.body);
}

} // namespace citynav::clients
