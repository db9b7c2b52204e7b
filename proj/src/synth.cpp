// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>
#include <citynav/rng.hpp>
#include <citynav/synth.hpp>

#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace citynav::synth
{

namespace
{

// Keeps rounding from pushing nominal edges past spacing_m.
constexpr double kShrink = 1.0 - 1e-9;

std::string padded(int value, int width)
{
    auto s = std::to_string(value);
    if (static_cast<int>(s.size()) < width)
        s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
    return s;
}

int digits(int n)
{
    return static_cast<int>(std::to_string(std::max(n - 1, 0)).size());
}

struct GridPoints
{
    std::vector<std::pair<std::string, geo::GeoPoint>> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
};

GridPoints grid_points(const GridSpec& spec)
{
    if (spec.rows < 1 || spec.cols < 1 || !(spec.spacing_m > 0.0))
        fail(ErrorCode::InvalidArgument, "grid needs positive rows, cols and spacing");

    const double metersPerDegLat = geo::kEarthRadiusM * std::numbers::pi / 180.0;
    const double dLat = spec.spacing_m * kShrink / metersPerDegLat;
    // Longitude step fixed at the southern row; rows further north get shorter east-west edges.
    const double dLon = dLat / std::cos(spec.origin.lat() * std::numbers::pi / 180.0);

    GridPoints out;
    for (int r = 0; r < spec.rows; ++r)
    {
        for (int c = 0; c < spec.cols; ++c)
        {
            out.nodes.emplace_back(grid_node_id(spec, r, c),
                                   geo::GeoPoint(spec.origin.lat() + r * dLat, spec.origin.lon() + c * dLon));
            if (c + 1 < spec.cols)
                out.edges.emplace_back(grid_node_id(spec, r, c), grid_node_id(spec, r, c + 1));
            if (r + 1 < spec.rows)
                out.edges.emplace_back(grid_node_id(spec, r, c), grid_node_id(spec, r + 1, c));
        }
    }
    return out;
}

} // namespace

std::string grid_node_id(const GridSpec& spec, int row, int col)
{
    return "r" + padded(row, digits(spec.rows)) + "c" + padded(col, digits(spec.cols));
}

graph::NavGraph make_grid(const GridSpec& spec)
{
    auto pts = grid_points(spec);
    graph::NavGraph::Builder b;
    for (auto& [id, p]: pts.nodes)
        b.add_node(id, p);
    for (auto& [a, c]: pts.edges)
    {
        b.add_link(a, c);
        b.add_link(c, a);
    }
    return std::move(b).build();
}

graph::NavGraph make_noisy_city(const GridSpec& spec, const NoiseSpec& noise)
{
    auto pts = grid_points(spec);
    Rng rng(noise.seed);
    graph::NavGraph::Builder b;
    for (auto& [id, p]: pts.nodes)
        b.add_node(id, p);

    for (auto& [a, c]: pts.edges)
    {
        if (rng.uniform() < noise.asymmetric_fraction)
        {
            if (rng.uniform() < 0.5)
                b.add_link(a, c);
            else
                b.add_link(c, a);
        }
        else
        {
            b.add_link(a, c);
            b.add_link(c, a);
        }
    }

    const double stub = spec.spacing_m * 0.35;
    for (int i = 0; i < noise.dead_end_chains; ++i)
    {
        const auto& [anchorId, anchor] = pts.nodes[rng.index(pts.nodes.size())];
        const double bearing = 45.0 + 90.0 * static_cast<double>(rng.index(4)) + (rng.uniform() - 0.5) * 20.0;
        const int length = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(std::max(noise.max_chain_length, 1))));
        std::string prev = anchorId;
        for (int k = 1; k <= length; ++k)
        {
            const std::string id = "dead" + std::to_string(i) + "_" + std::to_string(k);
            b.add_node(id, geo::destination_point(anchor, bearing, stub * k));
            b.add_link(prev, id);
            if (rng.uniform() < 0.7)
                b.add_link(id, prev);
            prev = id;
        }
    }

    if (noise.teleports > 0 && pts.nodes.size() >= 2)
    {
        std::set<std::pair<std::size_t, std::size_t>> used;
        int placed = 0;
        for (int attempt = 0; placed < noise.teleports && attempt < noise.teleports * 1000; ++attempt)
        {
            std::size_t a = rng.index(pts.nodes.size());
            std::size_t c = rng.index(pts.nodes.size());
            if (a == c)
                continue;
            if (a > c)
                std::swap(a, c);
            if (used.contains({a, c}))
                continue;
            if (geo::haversine_distance(pts.nodes[a].second, pts.nodes[c].second) <= 3.0 * spec.spacing_m)
                continue;
            used.insert({a, c});
            b.add_link(pts.nodes[a].first, pts.nodes[c].first);
            ++placed;
        }
    }

    for (int i = 0; i < noise.islands; ++i)
    {
        const geo::GeoPoint centre =
            geo::destination_point(spec.origin, 200.0 + 20.0 * i, spec.spacing_m * (5.0 + 3.0 * i));
        const std::string base = "island" + std::to_string(i) + "_";
        for (int k = 0; k < 3; ++k)
            b.add_node(base + std::to_string(k), geo::destination_point(centre, 120.0 * k, spec.spacing_m * 0.3));
        for (int k = 0; k < 3; ++k)
        {
            b.add_link(base + std::to_string(k), base + std::to_string((k + 1) % 3));
            b.add_link(base + std::to_string((k + 1) % 3), base + std::to_string(k));
        }
    }

    return std::move(b).build();
}

} // namespace citynav::synth
