// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <citynav/env.hpp>

#include <string>
#include <vector>

namespace citynav::env
{

struct OptionRecord
{
    std::string option_id;
    graph::NodeId toward;
    double heading = 0.0;
    std::string compass;

    friend bool operator==(const OptionRecord&, const OptionRecord&) = default;
};

/// One decision point: what was offered, what was chosen, and where the
/// agent ended up (the path through any corridor, counters after the move).
struct DecisionRecord
{
    int step_index = 0;
    graph::NodeId node;
    std::vector<OptionRecord> options;
    std::string chosen;
    std::string memory_after;
    std::string analysis;
    std::string position_estimate;
    bool self_positioned = false;
    bool fallback = false;
    int retries = 0;
    std::vector<graph::NodeId> path;
    int node_transitions_used = 0;
    double traveled_m = 0.0;
};

struct FinalRecord
{
    Status status = Status::Running;
    int decision_points_used = 0;
    int node_transitions_used = 0;
    double traveled_m = 0.0;
    bool aborted = false;
    std::string abort_reason;
};

/// Full record of one run. Serialized as JSONL: a "start" record, one
/// "decision" record per decision point, and a "final" record.
struct EpisodeTrace
{
    std::string task_id;
    std::string city;
    std::string policy;
    graph::NodeId origin;
    /// Nodes entered before the first observation (origin first).
    std::vector<graph::NodeId> start_path;
    int start_transitions = 0;
    double start_traveled_m = 0.0;
    std::vector<DecisionRecord> decisions;
    FinalRecord final;

    /// Every node entered, in order, starting at the origin.
    [[nodiscard]] std::vector<graph::NodeId> node_sequence() const;
};

std::vector<OptionRecord> record_options(const Observation& obs);

std::string trace_to_jsonl(const EpisodeTrace& trace);
EpisodeTrace trace_from_jsonl(std::string_view text);
void write_trace_file(const EpisodeTrace& trace, const std::string& path);
EpisodeTrace read_trace_file(const std::string& path);

} // namespace citynav::env
