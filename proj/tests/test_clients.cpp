// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "support/fixtures.hpp"

#include <citynav/chat.hpp>
#include <citynav/error.hpp>
#include <citynav/imagery.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <thread>

using namespace citynav;
using namespace citynav::clients;
using nlohmann::json;

namespace
{

template <typename Fn>
ErrorCode code_of(Fn&& fn)
{
    try
    {
        fn();
    }
    catch (const Error& e)
    {
        return e.code();
    }
    return static_cast<ErrorCode>(0);
}

ChatRequest sample_request()
{
    ChatRequest req;
    req.model = "test-model";
    req.purpose = "decision";
    req.messages.push_back({"system", "be helpful", {}});
    req.messages.push_back({"user", "pick one", {{"image/jpeg", "\xFF\xD8jpegbytes"}, {"image/png", "\x89PNGdata"}}});
    return req;
}

// Fails `failures` times with ClientUnavailable, then replies.
class FlakyTransport final: public ChatTransport
{
  public:
    FlakyTransport(int failures, ErrorCode code = ErrorCode::ClientUnavailable): _failures(failures), _code(code) {}

    ChatResponse send(const ChatRequest&) override
    {
        ++calls;
        if (calls <= _failures)
            fail(_code, "simulated outage");
        return ChatResponse {.text = "ok", .usage = {10, 2}};
    }

    int calls = 0;

  private:
    int _failures;
    ErrorCode _code;
};

struct EnvVar
{
    std::string name;
    EnvVar(std::string n, const char* value): name(std::move(n))
    {
        if (value != nullptr)
            ::setenv(name.c_str(), value, 1);
        else
            ::unsetenv(name.c_str());
    }
    ~EnvVar() { ::unsetenv(name.c_str()); }
};

ImageRef sample_ref(double heading = 123.44)
{
    return ImageRef::make("pano_ABC", geo::GeoPoint(40.7128, -74.006), heading);
}

} // namespace

TEST_CASE("GenerationParams validation")
{
    CHECK_NOTHROW(GenerationParams {}.validate());
    CHECK_NOTHROW(ProviderProfile::openai().params.validate());
    CHECK_NOTHROW(ProviderProfile::gemini().params.validate());
    CHECK_NOTHROW(ProviderProfile::ollama().params.validate());
    CHECK(code_of([] { GenerationParams {.temperature = 2.5}.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { GenerationParams {.top_p = 1.5}.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { GenerationParams {.top_k = 0}.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { GenerationParams {.max_tokens = 0}.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { GenerationParams {.candidate_count = 2}.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { GenerationParams {.presence_penalty = 3}.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("provider profiles")
{
    const auto o = ProviderProfile::openai();
    CHECK(o.params.temperature == 1.0);
    CHECK(o.params.top_p == 1.0);
    CHECK(o.params.max_tokens == 8000);
    CHECK(ProviderProfile::named("gemini").provider == Provider::Gemini);
    CHECK(ProviderProfile::named("ollama").api_key_env.empty());
    CHECK(code_of([] { (void)ProviderProfile::named("bard"); }) == ErrorCode::ConfigError);
}

TEST_CASE("mock chat client")
{
    const auto before = outbound_request_count();
    auto mock = MockChatClient::scripted({"first", "second"});
    const auto req = sample_request();
    CHECK(mock->chat(req).text == "first");
    CHECK(mock->chat(req).text == "second");
    CHECK(code_of([&] { mock->chat(req); }) == ErrorCode::ClientUnavailable);
    CHECK(mock->call_count() == 3);
    CHECK(mock->requests()[0].model == "test-model");
    CHECK(mock->requests()[0].messages[1].images.size() == 2);
    CHECK(outbound_request_count() == before);

    MockChatClient echo([](const ChatRequest& r) { return r.messages.back().text; });
    CHECK(echo.chat(req).text == "pick one");
}

TEST_CASE("mock client tolerates concurrent callers")
{
    MockChatClient client([](const ChatRequest& r) { return r.model; });
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t)
    {
        threads.emplace_back([&client, t] {
            ChatRequest req;
            req.model = "m" + std::to_string(t);
            for (int i = 0; i < 50; ++i)
                CHECK(client.chat(req).text == req.model);
        });
    }
    for (auto& th: threads)
        th.join();
    CHECK(client.call_count() == 400);
}

TEST_CASE("retrying client backoff")
{
    std::vector<std::chrono::milliseconds> sleeps;
    const Sleeper record = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };

    SUBCASE("two failures then success")
    {
        auto transport = std::make_unique<FlakyTransport>(2);
        auto* raw = transport.get();
        RetryingChatClient client(std::move(transport), {}, record);
        const auto res = client.chat(sample_request());
        CHECK(res.text == "ok");
        CHECK(res.retry_count == 2);
        CHECK(res.usage.prompt_tokens == 10);
        CHECK(raw->calls == 3);
        CHECK(sleeps == std::vector<std::chrono::milliseconds> {std::chrono::milliseconds(500),
                                                                std::chrono::milliseconds(1000)});
    }
    SUBCASE("persistent failure")
    {
        auto transport = std::make_unique<FlakyTransport>(100);
        auto* raw = transport.get();
        RetryingChatClient client(std::move(transport), {}, record);
        CHECK(code_of([&] { client.chat(sample_request()); }) == ErrorCode::ClientUnavailable);
        CHECK(raw->calls == 3);
        CHECK(sleeps.size() == 2);
    }
    SUBCASE("credential errors are not retried")
    {
        auto transport = std::make_unique<FlakyTransport>(100, ErrorCode::ConfigError);
        auto* raw = transport.get();
        RetryingChatClient client(std::move(transport), {}, record);
        CHECK(code_of([&] { client.chat(sample_request()); }) == ErrorCode::ConfigError);
        CHECK(raw->calls == 1);
        CHECK(sleeps.empty());
    }
    SUBCASE("invalid parameters rejected before sending")
    {
        auto transport = std::make_unique<FlakyTransport>(0);
        auto* raw = transport.get();
        RetryingChatClient client(std::move(transport), {}, record);
        auto req = sample_request();
        req.params.candidate_count = 3;
        CHECK(code_of([&] { client.chat(req); }) == ErrorCode::InvalidArgument);
        CHECK(raw->calls == 0);
    }
    CHECK(code_of([] { RetryingChatClient(std::make_unique<FlakyTransport>(0), RetryPolicy {.max_attempts = 0}); })
          == ErrorCode::InvalidArgument);
}

TEST_CASE("HTTP transport")
{
    SUBCASE("missing credential fails before any request")
    {
        const EnvVar unset("CITYNAV_TEST_MISSING_KEY", nullptr);
        auto profile = ProviderProfile::openai();
        profile.api_key_env = unset.name;
        int posts = 0;
        CHECK(code_of([&] {
                  HttpChatTransport t(profile, [&](const HttpRequestSpec&) {
                      ++posts;
                      return HttpResult {200, "{}", {}};
                  });
              })
              == ErrorCode::ConfigError);
        CHECK(posts == 0);
    }
    SUBCASE("status mapping")
    {
        const EnvVar key("CITYNAV_TEST_KEY", "sk-test");
        auto profile = ProviderProfile::openai();
        profile.api_key_env = key.name;
        int status = 200;
        std::string body = R"({"choices":[{"message":{"content":"hello"}}],"usage":{"prompt_tokens":7,"completion_tokens":3}})";
        std::vector<HttpRequestSpec> sent;
        HttpChatTransport t(profile, [&](const HttpRequestSpec& spec) {
            sent.push_back(spec);
            return HttpResult {status, body, {}};
        });
        const auto res = t.send(sample_request());
        CHECK(res.text == "hello");
        CHECK(res.usage.completion_tokens == 3);
        REQUIRE(sent.size() == 1);
        CHECK(std::find(sent[0].headers.begin(), sent[0].headers.end(),
                        std::pair<std::string, std::string>("Authorization", "Bearer sk-test"))
              != sent[0].headers.end());

        for (const int s: {0, 429, 500, 503})
        {
            status = s;
            CHECK(code_of([&] { t.send(sample_request()); }) == ErrorCode::ClientUnavailable);
        }
        for (const int s: {401, 403})
        {
            status = s;
            CHECK(code_of([&] { t.send(sample_request()); }) == ErrorCode::ConfigError);
        }
        status = 400;
        CHECK(code_of([&] { t.send(sample_request()); }) == ErrorCode::ProviderError);
        status = 200;
        body = "not json";
        CHECK(code_of([&] { t.send(sample_request()); }) == ErrorCode::ProviderError);
    }
    SUBCASE("retrying client over the transport")
    {
        const EnvVar key("CITYNAV_TEST_KEY", "sk-test");
        auto profile = ProviderProfile::openai();
        profile.api_key_env = key.name;
        int calls = 0;
        auto transport = std::make_unique<HttpChatTransport>(profile, [&](const HttpRequestSpec&) {
            ++calls;
            if (calls <= 2)
                return HttpResult {503, "busy", {}};
            return HttpResult {200, R"({"choices":[{"message":{"content":"fine"}}]})", {}};
        });
        RetryingChatClient client(std::move(transport), {}, [](std::chrono::milliseconds) {});
        const auto res = client.chat(sample_request());
        CHECK(res.text == "fine");
        CHECK(res.retry_count == 2);
    }
}

TEST_CASE("request shapes")
{
    const auto req = sample_request();

    SUBCASE("openai")
    {
        const auto spec = build_http_request(ProviderProfile::openai(), req, "k");
        CHECK(spec.url == "https://api.openai.com/v1/chat/completions");
        const auto body = json::parse(spec.body);
        CHECK(body["model"] == "test-model");
        CHECK(body["temperature"] == 1.0);
        CHECK(body["top_p"] == 1.0);
        CHECK(body["max_tokens"] == 8000);
        CHECK(body["n"] == 1);
        REQUIRE(body["messages"].size() == 2);
        const auto& content = body["messages"][1]["content"];
        REQUIRE(content.size() == 3);
        CHECK(content[0]["text"] == "pick one");
        CHECK(content[1]["image_url"]["url"] == "data:image/jpeg;base64," + base64_encode("\xFF\xD8jpegbytes"));
        CHECK(content[2]["image_url"]["url"].get<std::string>().starts_with("data:image/png;base64,"));
    }
    SUBCASE("gemini")
    {
        auto profile = ProviderProfile::gemini();
        const auto spec = build_http_request(profile, req, "gk");
        CHECK(spec.url == "https://generativelanguage.googleapis.com/v1beta/models/test-model:generateContent");
        CHECK(std::find(spec.headers.begin(), spec.headers.end(),
                        std::pair<std::string, std::string>("x-goog-api-key", "gk"))
              != spec.headers.end());
        const auto body = json::parse(spec.body);
        CHECK(body["systemInstruction"]["parts"][0]["text"] == "be helpful");
        REQUIRE(body["contents"].size() == 1);
        CHECK(body["contents"][0]["parts"].size() == 3);
        CHECK(body["contents"][0]["parts"][1]["inline_data"]["mime_type"] == "image/jpeg");
        CHECK(body["generationConfig"]["candidateCount"] == 1);
    }
    SUBCASE("gemini profile parameters")
    {
        auto r = req;
        r.params = ProviderProfile::gemini().params;
        const auto body = json::parse(build_http_request(ProviderProfile::gemini(), r, "gk").body);
        CHECK(body["generationConfig"]["topK"] == 64);
        CHECK(body["generationConfig"]["topP"] == 0.95);
        CHECK(body["generationConfig"]["maxOutputTokens"] == 8000);
    }
    SUBCASE("ollama")
    {
        auto r = req;
        r.params = ProviderProfile::ollama().params;
        const auto spec = build_http_request(ProviderProfile::ollama(), r, "");
        CHECK(spec.url == "http://localhost:11434/api/chat");
        const auto body = json::parse(spec.body);
        CHECK(body["stream"] == false);
        CHECK(body["options"]["num_predict"] == -1);
        CHECK(body["options"]["top_k"] == 40);
        CHECK(body["options"]["repeat_last_n"] == 64);
        CHECK(body["messages"][1]["images"].size() == 2);
        CHECK_FALSE(body["messages"][0].contains("images"));
    }
    SUBCASE("responses")
    {
        CHECK(parse_http_response(Provider::Gemini,
                                  R"({"candidates":[{"content":{"parts":[{"text":"a"},{"text":"b"}]}}],
                                      "usageMetadata":{"promptTokenCount":4,"candidatesTokenCount":2}})")
                  .text
              == "ab");
        const auto o = parse_http_response(Provider::Ollama,
                                           R"({"message":{"content":"x"},"prompt_eval_count":9,"eval_count":1})");
        CHECK(o.text == "x");
        CHECK(o.usage.prompt_tokens == 9);
        CHECK(code_of([] { (void)parse_http_response(Provider::OpenAI, R"({"choices":[]})"); })
              == ErrorCode::ProviderError);
    }
}

TEST_CASE("base64")
{
    CHECK(base64_encode("").empty());
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_encode("foo") == "Zm9v");
    CHECK(base64_encode("foobar") == "Zm9vYmFy");
}

TEST_CASE("ImageRef defaults and cache keys")
{
    const auto ref = sample_ref();
    CHECK(ref.width == 512);
    CHECK(ref.height == 512);
    CHECK(ref.fov == 90.0);
    CHECK(ref.pitch == 30.0);
    CHECK(std::regex_match(ref.cache_key(), std::regex("[0-9a-f]{64}")));
    CHECK(ref.canonical() == "pano=pano_ABC;loc=40.7128000,-74.0060000;heading=123.4;pitch=30.0;fov=90.0;size=512x512");

    // Heading noise below the 0.1 degree rounding does not change the key.
    CHECK(sample_ref(123.44).cache_key() == sample_ref(123.4000001).cache_key());
    CHECK(sample_ref(123.44).cache_key() != sample_ref(123.46).cache_key());
    CHECK(sample_ref(359.97).cache_key() == sample_ref(0.0).cache_key());

    auto other = sample_ref();
    other.pitch = 0.0;
    CHECK(other.cache_key() != ref.cache_key());
    other = sample_ref();
    other.width = 640;
    CHECK(other.cache_key() != ref.cache_key());
    other = sample_ref();
    other.node = "pano_XYZ";
    CHECK(other.cache_key() != ref.cache_key());
}

TEST_CASE("stub imagery is deterministic")
{
    StubImageProvider stub;
    const auto a = stub.fetch(sample_ref());
    const auto b = stub.fetch(sample_ref());
    CHECK(a == b);
    CHECK(a.find("pano_ABC") != std::string::npos);
    CHECK(a.find("123.4") != std::string::npos);
    CHECK(stub.fetch(sample_ref(10.0)) != a);
    CHECK(stub.calls() == 3);
    CHECK(sniff_mime(a) == "image/svg+xml");
    CHECK(sniff_mime("\xFF\xD8\xFF") == "image/jpeg");
    CHECK(sniff_mime("\x89PNG\r\n\x1a\n") == "image/png");
    CHECK(sniff_mime("???") == "image/jpeg");
}

TEST_CASE("cache-first imagery")
{
    const auto dir = fixtures::scratch_dir("cache");
    auto inner = std::make_shared<StubImageProvider>();
    CachingImageProvider cache(inner, dir);
    const auto ref = sample_ref();

    const auto first = cache.fetch(ref);
    CHECK(cache.provider_calls() == 1);
    CHECK(cache.path_for(ref) == dir / (ref.cache_key() + ".jpg"));
    CHECK(std::filesystem::exists(cache.path_for(ref)));

    const auto second = cache.fetch(ref);
    CHECK(second == first);
    CHECK(cache.provider_calls() == 1);
    CHECK(inner->calls() == 1);

    // A fresh wrapper over the same directory still hits.
    auto inner2 = std::make_shared<StubImageProvider>();
    CachingImageProvider again(inner2, dir);
    CHECK(again.fetch(ref) == first);
    CHECK(inner2->calls() == 0);

    // No temporaries left behind.
    std::size_t files = 0;
    for (const auto& e: std::filesystem::directory_iterator(dir))
    {
        ++files;
        CHECK(e.path().extension() == ".jpg");
    }
    CHECK(files == 1);
}

TEST_CASE("cache tolerates concurrent writers of one key")
{
    const auto dir = fixtures::scratch_dir("cache_race");
    auto inner = std::make_shared<StubImageProvider>();
    CachingImageProvider cache(inner, dir);
    const auto expected = StubImageProvider().fetch(sample_ref());
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&] {
            for (int i = 0; i < 20; ++i)
                CHECK(cache.fetch(sample_ref()) == expected);
        });
    for (auto& th: threads)
        th.join();
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e: std::filesystem::directory_iterator(dir))
        ++files;
    CHECK(files == 1);
}

TEST_CASE("cache write failure")
{
    const auto dir = fixtures::scratch_dir("cache_blocked");
    const auto blocker = dir / "file";
    std::ofstream(blocker) << "x";
    CachingImageProvider cache(std::make_shared<StubImageProvider>(), blocker / "sub");
    CHECK(code_of([&] { cache.fetch(sample_ref()); }) == ErrorCode::StorageError);
}

TEST_CASE("Street View provider")
{
    std::vector<std::string> urls;
    int status = 200;
    const HttpGet get = [&](const std::string& url) {
        urls.push_back(url);
        return HttpResponse {status, "\xFF\xD8image", {}};
    };

    SUBCASE("request carries exactly the ref parameters")
    {
        StreetViewProvider sv("KEY 1", true, get);
        const auto bytes = sv.fetch(sample_ref());
        CHECK(bytes == "\xFF\xD8image");
        REQUIRE(urls.size() == 1);
        CHECK(urls[0]
              == "https://maps.googleapis.com/maps/api/streetview?size=512x512&pano=pano_ABC&heading=123.4"
                 "&pitch=30.0&fov=90.0&key=KEY%201");
    }
    SUBCASE("location mode")
    {
        StreetViewProvider sv("k", false, get);
        CHECK(sv.request_url(sample_ref()).find("&location=40.7128000,-74.0060000&") != std::string::npos);
    }
    SUBCASE("denial")
    {
        status = 403;
        StreetViewProvider sv("k", true, get);
        CHECK(code_of([&] { sv.fetch(sample_ref()); }) == ErrorCode::ProviderError);
    }
    SUBCASE("cached Street View fetch calls the provider once")
    {
        const auto dir = fixtures::scratch_dir("cache_sv");
        auto sv = std::make_shared<StreetViewProvider>("k", true, get);
        CachingImageProvider cache(sv, dir);
        CHECK(cache.fetch(sample_ref()) == cache.fetch(sample_ref()));
        CHECK(urls.size() == 1);
    }
    SUBCASE("credentials")
    {
        CHECK(code_of([&] { StreetViewProvider("", true, get); }) == ErrorCode::ConfigError);
        const EnvVar unset("CITYNAV_TEST_SV_KEY", nullptr);
        CHECK(code_of([&] { (void)StreetViewProvider::from_env(unset.name, true); }) == ErrorCode::ConfigError);
        const EnvVar set("CITYNAV_TEST_SV_KEY2", "abc");
        CHECK(StreetViewProvider::from_env(set.name, true) != nullptr);
    }
}
