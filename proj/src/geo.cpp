// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>
#include <citynav/geo.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace citynav::geo
{

namespace
{

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Below this separation two points are treated as the same location.
constexpr double kCoincidentM = 1e-6;

// Tolerance for the on-edge test, in projected degrees (~0.1 mm).
constexpr double kEdgeEpsilon = 1e-9;

struct Planar
{
    double x;
    double y;
};

} // namespace

GeoPoint::GeoPoint(double lat, double lon): _lat(lat), _lon(lon)
{
    if (!(lat >= -90.0 && lat <= 90.0) || !(lon >= -180.0 && lon <= 180.0))
        fail(ErrorCode::InvalidArgument,
             "coordinate out of range: (" + std::to_string(lat) + ", " + std::to_string(lon) + ")");
}

GeoPolygon::GeoPolygon(std::vector<GeoPoint> vertices): _vertices(std::move(vertices))
{
    if (_vertices.size() < 3)
        fail(ErrorCode::InvalidArgument, "polygon needs at least 3 vertices");
    for (std::size_t i = 0; i < _vertices.size(); ++i)
    {
        if (_vertices[i] == _vertices[(i + 1) % _vertices.size()])
            fail(ErrorCode::InvalidArgument, "polygon has consecutive identical vertices at index " + std::to_string(i));
    }
}

GeoPoint GeoPolygon::centroid() const noexcept
{
    double lat = 0.0;
    double lon = 0.0;
    for (const auto& v: _vertices)
    {
        lat += v.lat();
        lon += v.lon();
    }
    const auto n = static_cast<double>(_vertices.size());
    return {lat / n, lon / n};
}

std::string_view to_string(Compass c) noexcept
{
    switch (c)
    {
        case Compass::North: return "North";
        case Compass::East: return "East";
        case Compass::South: return "South";
        case Compass::West: return "West";
    }
    return "North";
}

double haversine_distance(const GeoPoint& a, const GeoPoint& b) noexcept
{
    const double lat1 = a.lat() * kDegToRad;
    const double lat2 = b.lat() * kDegToRad;
    const double dlat = lat2 - lat1;
    const double dlon = (b.lon() - a.lon()) * kDegToRad;
    const double s1 = std::sin(dlat / 2.0);
    const double s2 = std::sin(dlon / 2.0);
    const double h = std::clamp(s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2, 0.0, 1.0);
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

double normalize_heading(double degrees) noexcept
{
    double h = std::fmod(degrees, 360.0);
    if (h < 0.0)
        h += 360.0;
    // fmod of a tiny negative value can round back up to 360.
    return h >= 360.0 ? 0.0 : h;
}

double angular_difference(double a, double b) noexcept
{
    const double d = std::fabs(normalize_heading(a) - normalize_heading(b));
    return d > 180.0 ? 360.0 - d : d;
}

double initial_bearing(const GeoPoint& a, const GeoPoint& b)
{
    if (haversine_distance(a, b) < kCoincidentM)
        fail(ErrorCode::DegenerateBearing, "bearing between coincident points is undefined");

    const double lat1 = a.lat() * kDegToRad;
    const double lat2 = b.lat() * kDegToRad;
    const double dlon = (b.lon() - a.lon()) * kDegToRad;
    const double y = std::sin(dlon) * std::cos(lat2);
    const double x = std::cos(lat1) * std::sin(lat2) - std::sin(lat1) * std::cos(lat2) * std::cos(dlon);
    return normalize_heading(std::atan2(y, x) * kRadToDeg);
}

Compass compass_label(double heading)
{
    if (!(heading >= 0.0 && heading < 360.0))
        fail(ErrorCode::InvalidArgument, "heading must be normalized to [0, 360)");
    const auto sector = static_cast<int>(std::floor((heading + 45.0) / 90.0)) % 4;
    return static_cast<Compass>(sector);
}

bool point_in_polygon(const GeoPoint& p, const GeoPolygon& poly)
{
    const auto verts = poly.vertices();
    const auto [minIt, maxIt] =
        std::minmax_element(verts.begin(), verts.end(), [](const auto& l, const auto& r) { return l.lon() < r.lon(); });
    if (maxIt->lon() - minIt->lon() > 180.0)
        fail(ErrorCode::UnsupportedRegion, "polygon spans the antimeridian");

    const GeoPoint origin = poly.centroid();
    const double scale = std::cos(origin.lat() * kDegToRad);
    auto project = [&](const GeoPoint& g) {
        return Planar {(g.lon() - origin.lon()) * scale, g.lat() - origin.lat()};
    };

    const Planar q = project(p);
    std::vector<Planar> ring;
    ring.reserve(verts.size());
    for (const auto& v: verts)
        ring.push_back(project(v));

    bool inside = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++)
    {
        const Planar& a = ring[j];
        const Planar& b = ring[i];

        // Points on an edge count as inside.
        const double cross = (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x);
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        if (std::fabs(cross) <= kEdgeEpsilon * len && q.x >= std::min(a.x, b.x) - kEdgeEpsilon
            && q.x <= std::max(a.x, b.x) + kEdgeEpsilon && q.y >= std::min(a.y, b.y) - kEdgeEpsilon
            && q.y <= std::max(a.y, b.y) + kEdgeEpsilon)
            return true;

        if ((a.y > q.y) != (b.y > q.y))
        {
            const double xCross = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (q.x < xCross)
                inside = !inside;
        }
    }
    return inside;
}

GeoPoint destination_point(const GeoPoint& origin, double bearing_deg, double distance_m)
{
    const double delta = distance_m / kEarthRadiusM;
    const double theta = bearing_deg * kDegToRad;
    const double lat1 = origin.lat() * kDegToRad;
    const double lon1 = origin.lon() * kDegToRad;
    const double lat2 =
        std::asin(std::sin(lat1) * std::cos(delta) + std::cos(lat1) * std::sin(delta) * std::cos(theta));
    const double lon2 = lon1
                        + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(lat1),
                                     std::cos(delta) - std::sin(lat1) * std::sin(lat2));
    double lon = lon2 * kRadToDeg;
    lon = std::fmod(lon + 540.0, 360.0) - 180.0;
    return {lat2 * kRadToDeg, lon};
}

} // namespace citynav::geo
