// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <citynav/graph.hpp>

#include <cstdint>
#include <string>

namespace citynav::synth
{

/// Rectangular street grid. Rows run north from `origin`, columns east.
/// Every edge is at most `spacing_m` long.
struct GridSpec
{
    int rows = 10;
    int cols = 10;
    double spacing_m = 100.0;
    geo::GeoPoint origin {40.7128, -74.0060};
};

/// Defects typical of crawled panographs, layered on top of a grid.
struct NoiseSpec
{
    /// Fraction of grid edges that keep only one direction.
    double asymmetric_fraction = 0.1;
    /// Dangling chains of short links hanging off random grid nodes.
    int dead_end_chains = 5;
    int max_chain_length = 3;
    /// One-directional links between distant grid nodes.
    int teleports = 3;
    /// Small disconnected triangles placed away from the grid.
    int islands = 0;
    std::uint64_t seed = 1;
};

/// Node id of grid cell (row, col), zero-padded so ids sort row-major.
std::string grid_node_id(const GridSpec& spec, int row, int col);

graph::NavGraph make_grid(const GridSpec& spec);
graph::NavGraph make_noisy_city(const GridSpec& spec, const NoiseSpec& noise);

} // namespace citynav::synth
