// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <citynav/trace.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace citynav::eval
{

/// S * d_opt / max(d_agent, d_opt). Throws InvalidTask when d_opt <= 0.
double compute_spl(int success, double d_opt, double d_agent);

struct DecisionScore
{
    graph::NodeId node_before;
    graph::NodeId node_after;
    double remaining_before = 0.0;
    double remaining_after = 0.0;
    bool correct = false;
};

struct DecisionScores
{
    std::vector<DecisionScore> records;
    /// Percentage; empty when there were no decisions.
    std::optional<double> da;
};

/// Remaining distance is the graph shortest path to any destination node,
/// measured at the decision point and at the next one (or the terminal node).
DecisionScores score_decisions(const env::EpisodeTrace& trace, const graph::NavGraph& g,
                               const sampler::NavTask& task);

struct EpisodeResult
{
    std::string task_id;
    std::string city;
    std::string policy;
    env::Status status = env::Status::Running;
    int success = 0;
    double d_opt = 0.0;
    double d_agent = 0.0;
    double spl = 0.0;
    std::vector<DecisionScore> decision_records;
    std::optional<double> da;
    int decisions = 0;
    int fallback_decisions = 0;
    bool aborted = false;
    std::string abort_reason;
};

/// Re-runs the recorded choices through a fresh environment, checks every
/// node and counter against the trace, then scores the replayed episode.
/// Throws TraceMismatch for unknown nodes or a foreign task and
/// ReplayDivergence (naming the first bad step) when the run differs.
EpisodeResult replay_and_verify(const env::EpisodeTrace& trace, const graph::NavGraph& g,
                                const sampler::NavTask& task, const env::EnvConfig& cfg = {});

struct GroupMetrics
{
    int episodes = 0;
    int scored = 0;
    int aborted = 0;
    std::optional<double> success_rate;
    std::optional<double> mean_spl;
    std::optional<double> mean_da;
    int da_excluded = 0;
    int fallback_decisions = 0;
};

struct MetricsReport
{
    GroupMetrics overall;
    std::map<std::string, GroupMetrics> by_city;
    std::vector<EpisodeResult> episodes;
};

/// Aborted episodes are counted but kept out of every mean.
MetricsReport aggregate(std::vector<EpisodeResult> results);

std::string report_to_json(const MetricsReport& report);

/// FeatureCollection in [lon, lat] order: the walked path, the origin, the
/// destination polygon and one point per decision.
std::string export_geojson(const env::EpisodeTrace& trace, const graph::NavGraph& g, const sampler::NavTask& task);

} // namespace citynav::eval
