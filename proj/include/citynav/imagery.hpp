// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <citynav/geo.hpp>
#include <citynav/graph.hpp>

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>

namespace citynav::clients
{

/// Camera parameters for one street-level crop.
struct ImageParams
{
    int width = 512;
    int height = 512;
    double fov = 90.0;
    double pitch = 30.0;
};

struct ImageRef
{
    graph::NodeId node;
    geo::GeoPoint location;
    double heading = 0.0;
    double pitch = 30.0;
    double fov = 90.0;
    int width = 512;
    int height = 512;

    static ImageRef make(graph::NodeId node, geo::GeoPoint location, double heading, const ImageParams& params = {});

    /// Content address of the request: SHA-256 over the canonical parameter
    /// string, with the heading rounded to 0.1 degrees.
    [[nodiscard]] std::string cache_key() const;
    [[nodiscard]] std::string canonical() const;
};

/// Raw encoded image bytes.
using ImageBytes = std::string;

class ImageProvider
{
  public:
    virtual ~ImageProvider() = default;
    virtual ImageBytes fetch(const ImageRef& ref) = 0;
};

/// Offline provider: a small SVG placeholder naming the node and heading.
class StubImageProvider final: public ImageProvider
{
  public:
    ImageBytes fetch(const ImageRef& ref) override;
    [[nodiscard]] std::size_t calls() const noexcept { return _calls.load(); }

  private:
    std::atomic<std::size_t> _calls {0};
};

struct HttpResponse
{
    /// 0 when the request never produced an HTTP status.
    int status = 0;
    std::string body;
    std::string error;
};

using HttpGet = std::function<HttpResponse(const std::string& url)>;

/// Default GET over HTTPS. Counts toward `outbound_request_count`.
HttpGet default_http_get();

/// Number of live network requests issued by this process.
std::size_t outbound_request_count() noexcept;

/// Street View Static API.
class StreetViewProvider final: public ImageProvider
{
  public:
    StreetViewProvider(std::string api_key, bool by_pano_id, HttpGet get = default_http_get());

    /// Reads the key from `env_var`; throws ConfigError when unset.
    static std::unique_ptr<StreetViewProvider> from_env(const std::string& env_var, bool by_pano_id);

    [[nodiscard]] std::string request_url(const ImageRef& ref) const;
    ImageBytes fetch(const ImageRef& ref) override;

  private:
    std::string _key;
    bool _byPano;
    HttpGet _get;
};

/// Cache-first wrapper storing `{dir}/{cache_key}.jpg`. Writes go through a
/// temporary file and rename, so concurrent writers of one key are safe.
class CachingImageProvider final: public ImageProvider
{
  public:
    CachingImageProvider(std::shared_ptr<ImageProvider> inner, std::filesystem::path dir);

    ImageBytes fetch(const ImageRef& ref) override;
    [[nodiscard]] std::filesystem::path path_for(const ImageRef& ref) const;
    [[nodiscard]] std::size_t provider_calls() const noexcept { return _misses.load(); }

  private:
    std::shared_ptr<ImageProvider> _inner;
    std::filesystem::path _dir;
    std::atomic<std::size_t> _misses {0};
};

/// Guess a MIME type from magic bytes (jpeg, png, svg); defaults to image/jpeg.
std::string sniff_mime(const ImageBytes& bytes);

} // namespace citynav::clients
