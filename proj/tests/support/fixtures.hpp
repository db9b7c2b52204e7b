// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <citynav/graph.hpp>
#include <citynav/sampler.hpp>
#include <citynav/synth.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fixtures
{

using citynav::geo::GeoPoint;
using citynav::graph::NavGraph;

/// Point `north_m` / `east_m` away from a fixed reference near (40, -74).
GeoPoint offset_m(double north_m, double east_m);

struct NodeSpec
{
    std::string id;
    GeoPoint point;
};

/// Undirected graph: every pair becomes two directed links.
NavGraph undirected(const std::vector<NodeSpec>& nodes, const std::vector<std::pair<std::string, std::string>>& edges);

/// Like `undirected`, with explicit edge lengths.
NavGraph undirected_weighted(const std::vector<NodeSpec>& nodes,
                             const std::vector<std::tuple<std::string, std::string, double>>& edges);

/// Distinct tasks on a grid: random destination node, crawl, small square
/// around the destination holding only that node.
std::vector<citynav::sampler::NavTask> grid_tasks(const NavGraph& g, const citynav::synth::GridSpec& spec, int count,
                                                  double d_target, std::uint64_t seed);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

} // namespace fixtures
