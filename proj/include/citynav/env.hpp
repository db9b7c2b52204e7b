// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <citynav/graph.hpp>
#include <citynav/imagery.hpp>
#include <citynav/sampler.hpp>

#include <optional>
#include <string>
#include <vector>

namespace citynav::env
{

struct EnvConfig
{
    int max_decision_points = 150;
    int max_steps = 2000;
    int self_position_period = 3;
    clients::ImageParams image;

    void validate() const;
};

enum class Status
{
    Running,
    Success,
    BudgetExhausted,
    Stuck,
};

std::string_view to_string(Status s) noexcept;
Status status_from_string(std::string_view s);

struct Option
{
    std::string option_id;
    graph::NodeId toward;
    double heading = 0.0;
    geo::Compass compass = geo::Compass::North;
    clients::ImageRef image;
};

struct Observation
{
    int step_index = 0;
    graph::NodeId node;
    std::vector<Option> options;

    [[nodiscard]] std::vector<std::string> option_ids() const;
    [[nodiscard]] const Option* find(std::string_view option_id) const;
};

struct EpisodeState
{
    graph::NodeId current;
    std::optional<graph::NodeId> arrived_from;
    int decision_points_used = 0;
    int node_transitions_used = 0;
    double traveled_m = 0.0;
    Status status = Status::Running;
};

std::string option_id(int step_index, int option_index);

/// One option per incident link, ordered by heading then NodeId.
Observation decision_point_options(const graph::NavGraph& g, const graph::NodeId& at, int step_index,
                                   const clients::ImageParams& image = {});

/// Result of reset or step. `path` lists every node entered, in order.
struct Transition
{
    EpisodeState state;
    std::optional<Observation> observation;
    std::vector<graph::NodeId> path;
};

/// Sparse-grounding navigation episode. Observations are only emitted at
/// decision points; corridors are traversed silently.
class Environment
{
  public:
    Environment(const graph::NavGraph& g, const sampler::NavTask& task, EnvConfig cfg = {});

    /// Starts at the task origin, advancing along a dead-end stub if needed.
    Transition reset();

    /// Throws InvalidAction (state untouched) for option ids not on offer.
    Transition step(const std::string& choice);

    [[nodiscard]] const EpisodeState& state() const noexcept { return _state; }
    [[nodiscard]] const std::optional<Observation>& observation() const noexcept { return _obs; }
    [[nodiscard]] const EnvConfig& config() const noexcept { return _cfg; }
    [[nodiscard]] bool is_destination(graph::NodeIndex i) const { return _destination.at(i); }

  private:
    /// Walks from `from` into `to`, then on through corridor nodes.
    void traverse(graph::NodeIndex from, graph::NodeIndex to, std::vector<graph::NodeId>& path);
    void finish_at_decision_point();

    const graph::NavGraph& _g;
    const sampler::NavTask& _task;
    EnvConfig _cfg;
    std::vector<bool> _destination;
    EpisodeState _state;
    std::optional<Observation> _obs;
    bool _started = false;
};

/// Onward neighbors of `at` excluding `from` (when set).
std::size_t onward_degree(const graph::NavGraph& g, graph::NodeIndex at, std::optional<graph::NodeIndex> from);

} // namespace citynav::env
