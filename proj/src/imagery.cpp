// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>
#include <citynav/imagery.hpp>

#include <openssl/sha.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>
#include <thread>

namespace citynav::clients
{

namespace
{

std::string fixed(double value, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

double rounded_heading(double heading)
{
    double h = std::round(geo::normalize_heading(heading) * 10.0) / 10.0;
    if (h >= 360.0)
        h -= 360.0;
    // Avoid "-0.0".
    return h == 0.0 ? 0.0 : h;
}

std::string sha256_hex(const std::string& data)
{
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (const unsigned char b: digest)
    {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xf]);
    }
    return out;
}

std::string xml_escape(const std::string& s)
{
    std::string out;
    for (const char c: s)
    {
        switch (c)
        {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string url_encode(const std::string& s)
{
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (const unsigned char c: s)
    {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == ',')
            out.push_back(static_cast<char>(c));
        else
        {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xf]);
        }
    }
    return out;
}

} // namespace

ImageRef ImageRef::make(graph::NodeId node, geo::GeoPoint location, double heading, const ImageParams& params)
{
    return ImageRef {
        .node = std::move(node),
        .location = location,
        .heading = heading,
        .pitch = params.pitch,
        .fov = params.fov,
        .width = params.width,
        .height = params.height,
    };
}

std::string ImageRef::canonical() const
{
    return "pano=" + node + ";loc=" + fixed(location.lat(), 7) + "," + fixed(location.lon(), 7)
           + ";heading=" + fixed(rounded_heading(heading), 1) + ";pitch=" + fixed(pitch, 1) + ";fov=" + fixed(fov, 1)
           + ";size=" + std::to_string(width) + "x" + std::to_string(height);
}

std::string ImageRef::cache_key() const
{
    return sha256_hex(canonical());
}

ImageBytes StubImageProvider::fetch(const ImageRef& ref)
{
    ++_calls;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << ref.width << "\" height=\"" << ref.height
        << "\"><rect width=\"100%\" height=\"100%\" fill=\"#808080\"/>"
        << "<text x=\"16\" y=\"48\" font-size=\"28\">node " << xml_escape(ref.node) << "</text>"
        << "<text x=\"16\" y=\"96\" font-size=\"28\">heading " << fixed(rounded_heading(ref.heading), 1)
        << "</text></svg>";
    return svg.str();
}

StreetViewProvider::StreetViewProvider(std::string api_key, bool by_pano_id, HttpGet get):
    _key(std::move(api_key)), _byPano(by_pano_id), _get(std::move(get))
{
    if (_key.empty())
        fail(ErrorCode::ConfigError, "Street View API key is empty");
}

std::unique_ptr<StreetViewProvider> StreetViewProvider::from_env(const std::string& env_var, bool by_pano_id)
{
    const char* key = std::getenv(env_var.c_str());
    if (key == nullptr || *key == '\0')
        fail(ErrorCode::ConfigError, "environment variable " + env_var + " is not set");
    return std::make_unique<StreetViewProvider>(key, by_pano_id);
}

std::string StreetViewProvider::request_url(const ImageRef& ref) const
{
    std::string url = "https://maps.googleapis.com/maps/api/streetview?size=" + std::to_string(ref.width) + "x"
                      + std::to_string(ref.height);
    if (_byPano)
        url += "&pano=" + url_encode(ref.node);
    else
        url += "&location=" + fixed(ref.location.lat(), 7) + "," + fixed(ref.location.lon(), 7);
    url += "&heading=" + fixed(rounded_heading(ref.heading), 1) + "&pitch=" + fixed(ref.pitch, 1)
           + "&fov=" + fixed(ref.fov, 1) + "&key=" + url_encode(_key);
    return url;
}

ImageBytes StreetViewProvider::fetch(const ImageRef& ref)
{
    const auto res = _get(request_url(ref));
    if (res.status != 200)
        fail(ErrorCode::ProviderError, "Street View request for node '" + ref.node + "' heading "
                                           + fixed(ref.heading, 1) + " failed: status " + std::to_string(res.status)
                                           + (res.error.empty() ? "" : " (" + res.error + ")"));
    return res.body;
}

CachingImageProvider::CachingImageProvider(std::shared_ptr<ImageProvider> inner, std::filesystem::path dir):
    _inner(std::move(inner)), _dir(std::move(dir))
{
}

std::filesystem::path CachingImageProvider::path_for(const ImageRef& ref) const
{
    return _dir / (ref.cache_key() + ".jpg");
}

ImageBytes CachingImageProvider::fetch(const ImageRef& ref)
{
    const auto target = path_for(ref);
    {
        std::ifstream in(target, std::ios::binary);
        if (in)
        {
            std::ostringstream buf;
            buf << in.rdbuf();
            return buf.str();
        }
    }

    ++_misses;
    auto bytes = _inner->fetch(ref);

    std::error_code ec;
    std::filesystem::create_directories(_dir, ec);
    if (ec)
        fail(ErrorCode::StorageError, "cannot create cache directory " + _dir.string() + ": " + ec.message());

    // Unique temporary name per writer, then an atomic rename into place.
    const auto tag = std::hash<std::thread::id> {}(std::this_thread::get_id()) ^ std::random_device {}();
    const auto tmp = target.string() + ".tmp" + std::to_string(tag);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            fail(ErrorCode::StorageError, "cannot write cache file " + tmp);
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec)
    {
        std::filesystem::remove(tmp);
        fail(ErrorCode::StorageError, "cannot move cache file into place: " + ec.message());
    }
    return bytes;
}

std::string sniff_mime(const ImageBytes& bytes)
{
    if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF && static_cast<unsigned char>(bytes[1]) == 0xD8)
        return "image/jpeg";
    if (bytes.size() >= 8 && bytes.compare(1, 3, "PNG") == 0)
        return "image/png";
    if (bytes.rfind("<svg", 0) == 0 || bytes.rfind("<?xml", 0) == 0)
        return "image/svg+xml";
    return "image/jpeg";
}

} // namespace citynav::clients
