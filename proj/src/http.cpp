// SPDX-License-Identifier: Apache-2.0
// The only translation unit that talks to the network.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <citynav/chat.hpp>
#include <citynav/imagery.hpp>

#include <atomic>

namespace citynav::clients
{

namespace
{

std::atomic<std::size_t> g_outbound {0};

struct SplitUrl
{
    std::string origin;
    std::string target;
};

SplitUrl split_url(const std::string& url)
{
    const auto scheme = url.find("://");
    const auto pathStart = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (pathStart == std::string::npos)
        return {url, "/"};
    return {url.substr(0, pathStart), url.substr(pathStart)};
}

constexpr time_t kTimeoutSeconds = 120;

} // namespace

std::size_t outbound_request_count() noexcept
{
    return g_outbound.load();
}

HttpGet default_http_get()
{
    return [](const std::string& url) {
        ++g_outbound;
        const auto parts = split_url(url);
        httplib::Client cli(parts.origin);
        cli.set_read_timeout(kTimeoutSeconds);
        auto res = cli.Get(parts.target);
        if (!res)
            return HttpResponse {0, {}, httplib::to_string(res.error())};
        return HttpResponse {res->status, res->body, {}};
    };
}

HttpPost default_http_post()
{
    return [](const HttpRequestSpec& spec) {
        ++g_outbound;
        const auto parts = split_url(spec.url);
        httplib::Client cli(parts.origin);
        cli.set_read_timeout(kTimeoutSeconds);
        httplib::Headers headers;
        for (const auto& [k, v]: spec.headers)
            headers.emplace(k, v);
        auto res = cli.Post(parts.target, headers, spec.body, "application/json");
        if (!res)
            return HttpResult {0, {}, httplib::to_string(res.error())};
        return HttpResult {res->status, res->body, {}};
    };
}

} // namespace citynav::clients
