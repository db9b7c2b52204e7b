// SPDX-License-Identifier: Apache-2.0
#include <citynav/env.hpp>
#include <citynav/error.hpp>

#include <algorithm>
#include <tuple>

namespace citynav::env
{

using graph::NodeIndex;

void EnvConfig::validate() const
{
    if (max_decision_points < 1 || max_steps < 1 || self_position_period < 1)
        fail(ErrorCode::InvalidArgument, "environment budgets and periods must be at least 1");
}

std::string_view to_string(Status s) noexcept
{
    switch (s)
    {
        case Status::Running: return "Running";
        case Status::Success: return "Success";
        case Status::BudgetExhausted: return "BudgetExhausted";
        case Status::Stuck: return "Stuck";
    }
    return "Running";
}

Status status_from_string(std::string_view s)
{
    for (const auto st: {Status::Running, Status::Success, Status::BudgetExhausted, Status::Stuck})
    {
        if (to_string(st) == s)
            return st;
    }
    fail(ErrorCode::ParseError, "unknown episode status '" + std::string(s) + "'");
}

std::vector<std::string> Observation::option_ids() const
{
    std::vector<std::string> ids;
    ids.reserve(options.size());
    for (const auto& o: options)
        ids.push_back(o.option_id);
    return ids;
}

const Option* Observation::find(std::string_view id) const
{
    const auto it = std::find_if(options.begin(), options.end(), [&](const Option& o) { return o.option_id == id; });
    return it == options.end() ? nullptr : &*it;
}

std::string option_id(int step_index, int option_index)
{
    return "step" + std::to_string(step_index) + "_option" + std::to_string(option_index);
}

std::size_t onward_degree(const graph::NavGraph& g, NodeIndex at, std::optional<NodeIndex> from)
{
    std::size_t n = 0;
    for (const auto& l: g.links(at))
    {
        if (!from || l.to != *from)
            ++n;
    }
    return n;
}

Observation decision_point_options(const graph::NavGraph& g, const graph::NodeId& at, int step_index,
                                   const clients::ImageParams& image)
{
    const NodeIndex here = g.index_of(at);
    Observation obs;
    obs.step_index = step_index;
    obs.node = at;
    for (const auto& l: g.links(here))
    {
        const double heading = graph::link_heading(g, here, l.to);
        obs.options.push_back(Option {
            .option_id = {},
            .toward = g.id(l.to),
            .heading = heading,
            .compass = geo::compass_label(heading),
            .image = clients::ImageRef::make(at, g.point(here), heading, image),
        });
    }
    std::sort(obs.options.begin(), obs.options.end(), [](const Option& a, const Option& b) {
        return std::tie(a.heading, a.toward) < std::tie(b.heading, b.toward);
    });
    for (std::size_t j = 0; j < obs.options.size(); ++j)
        obs.options[j].option_id = option_id(step_index, static_cast<int>(j));
    return obs;
}

Environment::Environment(const graph::NavGraph& g, const sampler::NavTask& task, EnvConfig cfg):
    _g(g), _task(task), _cfg(cfg), _destination(g.node_count(), false)
{
    _cfg.validate();
    for (const auto& id: task.destination_nodes)
    {
        if (const auto idx = g.find(id))
            _destination[*idx] = true;
    }
}

Transition Environment::reset()
{
    sampler::validate_task(_g, _task);
    _state = EpisodeState {.current = _task.origin};
    _obs.reset();
    _started = true;

    std::vector<graph::NodeId> path {_task.origin};
    const NodeIndex origin = _g.index_of(_task.origin);
    // An origin on a dead-end stub has only one way to go.
    if (_g.degree(origin) == 1)
        traverse(origin, _g.links(origin).front().to, path);
    if (_state.status == Status::Running)
        finish_at_decision_point();
    return {_state, _obs, std::move(path)};
}

Transition Environment::step(const std::string& choice)
{
    if (!_started || _state.status != Status::Running || !_obs)
        fail(ErrorCode::InvalidAction, "episode is not running");
    const Option* option = _obs->find(choice);
    if (option == nullptr)
        fail(ErrorCode::InvalidAction, "'" + choice + "' is not an offered option at step "
                                           + std::to_string(_obs->step_index));

    const NodeIndex from = _g.index_of(_state.current);
    const NodeIndex to = _g.index_of(option->toward);
    ++_state.decision_points_used;
    _obs.reset();

    std::vector<graph::NodeId> path;
    traverse(from, to, path);
    if (_state.status == Status::Running)
    {
        if (_state.decision_points_used >= _cfg.max_decision_points)
            _state.status = Status::BudgetExhausted;
        else
            finish_at_decision_point();
    }
    return {_state, _obs, std::move(path)};
}

void Environment::traverse(NodeIndex from, NodeIndex to, std::vector<graph::NodeId>& path)
{
    NodeIndex prev = from;
    NodeIndex cur = to;
    while (true)
    {
        _state.node_transitions_used += 1;
        _state.traveled_m += _g.link_length(prev, cur).value();
        _state.current = _g.id(cur);
        _state.arrived_from = _g.id(prev);
        path.push_back(_state.current);

        if (_destination[cur])
        {
            _state.status = Status::Success;
            return;
        }
        if (_state.node_transitions_used >= _cfg.max_steps)
        {
            _state.status = Status::BudgetExhausted;
            return;
        }
        if (onward_degree(_g, cur, prev) != 1)
            return;

        NodeIndex next = cur;
        for (const auto& l: _g.links(cur))
        {
            if (l.to != prev)
                next = l.to;
        }
        prev = cur;
        cur = next;
    }
}

void Environment::finish_at_decision_point()
{
    auto obs = decision_point_options(_g, _state.current, _state.decision_points_used, _cfg.image);
    if (obs.options.empty())
    {
        _state.status = Status::Stuck;
        return;
    }
    _obs = std::move(obs);
}

} // namespace citynav::env
