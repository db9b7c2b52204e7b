// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <citynav/geo.hpp>
#include <citynav/graph.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace citynav::sampler
{

struct SamplerConfig
{
    double d_target = 2000.0;
    double t_max = 10.0;
    double t_min = 0.5;
    double gamma = 0.5;
    int d_min_final = 3;
    int max_extra_steps = 10;
    std::uint64_t rng_seed = 0;

    /// Throws InvalidArgument when the invariants do not hold.
    void validate() const;
};

/// One outgoing edge offered to the crawler at a junction.
struct Candidate
{
    /// Deviation from the desired heading, degrees.
    double theta_deg = 0.0;
    /// Times the edge's target node has been visited in this crawl.
    int visits = 0;
};

struct CandidateDistribution
{
    /// Unnormalized exp(cos(theta)/T) * gamma^visits, in input order.
    std::vector<double> weights;
    std::vector<double> probabilities;
    /// Every weight underflowed to zero and the uniform distribution was used.
    bool uniform_fallback = false;
};

CandidateDistribution candidate_distribution(std::span<const Candidate> candidates, double temperature, double gamma);

/// Linear schedule from t_max at the seed down to t_min at d_target and beyond.
double anneal_temperature(double d_from_seed, const SamplerConfig& cfg);

struct WalkStep
{
    graph::NodeId node;
    /// True when this entry was reached by popping the junction stack rather
    /// than traversing an edge from the previous entry.
    bool backtrack = false;
};

struct CrawlResult
{
    graph::NodeId start;
    double radial_distance_m = 0.0;
    std::vector<WalkStep> walk;
};

/// Two-phase crawl away from `seed`: corridor following, then a softmax-guided
/// depth-first search with revisit penalties. Throws TargetUnreachable when the
/// search exhausts the graph before reaching d_target.
CrawlResult crawl_start_point(const graph::NavGraph& g, const graph::NodeId& seed, const SamplerConfig& cfg);

struct NavTask
{
    std::string task_id;
    std::string city;
    graph::NodeId origin;
    std::string destination_name;
    geo::GeoPolygon destination_polygon;
    std::set<graph::NodeId> destination_nodes;
};

/// Resolves the polygon to graph nodes. Throws EmptyDestination or DegenerateTask.
NavTask build_task(const graph::NavGraph& g, const graph::NodeId& start, const std::string& name,
                   const geo::GeoPolygon& polygon, const std::string& city = "synthetic");

/// Stable id derived from (city, origin, destination name).
std::string derive_task_id(const std::string& city, const graph::NodeId& origin, const std::string& name);

/// Axis-aligned square of half-size `half_size_m` centred on `centre`.
geo::GeoPolygon square_polygon(const geo::GeoPoint& centre, double half_size_m);

/// Checks the task invariants against a graph. Throws DegenerateTask or EmptyDestination.
void validate_task(const graph::NavGraph& g, const NavTask& task);

// Task files hold one JSON object per line with sorted keys.
std::string task_to_json(const NavTask& task);
NavTask task_from_json(const std::string& line);
std::vector<NavTask> load_tasks(std::string_view text);
std::vector<NavTask> load_tasks_file(const std::string& path);
void write_tasks(std::span<const NavTask> tasks, std::ostream& out);
void write_tasks_file(std::span<const NavTask> tasks, const std::string& path);

} // namespace citynav::sampler
