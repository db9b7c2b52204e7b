// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <citynav/rng.hpp>

#include <cmath>
#include <set>

namespace fixtures
{

GeoPoint offset_m(double north_m, double east_m)
{
    using citynav::geo::destination_point;
    const GeoPoint ref(40.0, -74.0);
    const GeoPoint lat = destination_point(ref, north_m >= 0 ? 0.0 : 180.0, std::abs(north_m));
    const GeoPoint lon = destination_point(GeoPoint(lat.lat(), ref.lon()), east_m >= 0 ? 90.0 : 270.0, std::abs(east_m));
    // Keep the latitude exact; the great circle drifts slightly off the parallel.
    return {lat.lat(), lon.lon()};
}

NavGraph undirected(const std::vector<NodeSpec>& nodes, const std::vector<std::pair<std::string, std::string>>& edges)
{
    NavGraph::Builder b;
    for (const auto& n: nodes)
        b.add_node(n.id, n.point);
    for (const auto& [a, c]: edges)
    {
        b.add_link(a, c);
        b.add_link(c, a);
    }
    return std::move(b).build();
}

NavGraph undirected_weighted(const std::vector<NodeSpec>& nodes,
                             const std::vector<std::tuple<std::string, std::string, double>>& edges)
{
    NavGraph::Builder b;
    for (const auto& n: nodes)
        b.add_node(n.id, n.point);
    for (const auto& [a, c, len]: edges)
    {
        b.add_link(a, c, len);
        b.add_link(c, a, len);
    }
    return std::move(b).build();
}

std::vector<citynav::sampler::NavTask> grid_tasks(const NavGraph& g, const citynav::synth::GridSpec& spec, int count,
                                                  double d_target, std::uint64_t seed)
{
    using namespace citynav;
    Rng rng(seed);
    std::vector<sampler::NavTask> tasks;
    std::set<std::string> ids;
    for (int attempt = 0; attempt < 50 * count && static_cast<int>(tasks.size()) < count; ++attempt)
    {
        const int r = static_cast<int>(rng.index(static_cast<std::size_t>(spec.rows)));
        const int c = static_cast<int>(rng.index(static_cast<std::size_t>(spec.cols)));
        const auto dest = synth::grid_node_id(spec, r, c);
        sampler::SamplerConfig cfg;
        cfg.d_target = d_target;
        cfg.rng_seed = rng.next();
        const auto crawl = sampler::crawl_start_point(g, dest, cfg);
        const auto poly = sampler::square_polygon(g.point(dest), 0.25 * spec.spacing_m);
        auto task = sampler::build_task(g, crawl.start, "corner " + dest, poly);
        if (ids.insert(task.task_id).second)
            tasks.push_back(std::move(task));
    }
    return tasks;
}

std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("citynav_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace fixtures
