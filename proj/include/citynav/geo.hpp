// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace citynav::geo
{

/// Mean Earth radius (IUGG), meters.
inline constexpr double kEarthRadiusM = 6'371'008.8;

/// A WGS-84 coordinate in degrees. Construction rejects out-of-range values.
class GeoPoint
{
  public:
    GeoPoint() = default;
    GeoPoint(double lat, double lon);

    [[nodiscard]] double lat() const noexcept { return _lat; }
    [[nodiscard]] double lon() const noexcept { return _lon; }

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

  private:
    double _lat = 0.0;
    double _lon = 0.0;
};

/// Implicitly closed ring of at least three vertices.
class GeoPolygon
{
  public:
    explicit GeoPolygon(std::vector<GeoPoint> vertices);

    [[nodiscard]] std::span<const GeoPoint> vertices() const noexcept { return _vertices; }
    [[nodiscard]] GeoPoint centroid() const noexcept;

  private:
    std::vector<GeoPoint> _vertices;
};

enum class Compass
{
    North,
    East,
    South,
    West,
};

std::string_view to_string(Compass c) noexcept;

double haversine_distance(const GeoPoint& a, const GeoPoint& b) noexcept;

/// Clockwise from north, in [0, 360). Throws DegenerateBearing when a and b coincide.
double initial_bearing(const GeoPoint& a, const GeoPoint& b);

/// Maps any real angle into [0, 360).
double normalize_heading(double degrees) noexcept;

/// Smallest absolute difference between two headings, in [0, 180].
double angular_difference(double a, double b) noexcept;

/// Nearest cardinal direction; exact ties (45, 135, ...) resolve clockwise.
Compass compass_label(double heading);

/// Boundary-inclusive containment test on a local equirectangular projection.
/// Throws UnsupportedRegion for polygons spanning the antimeridian.
bool point_in_polygon(const GeoPoint& p, const GeoPolygon& poly);

/// Point at `distance_m` along `bearing_deg` from `origin` (great-circle).
GeoPoint destination_point(const GeoPoint& origin, double bearing_deg, double distance_m);

} // namespace citynav::geo
