// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>
#include <citynav/eval.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <tuple>

namespace citynav::eval
{

namespace
{

using graph::NodeIndex;
using nlohmann::json;

constexpr double kMeterTolerance = 1e-6;

void check_known_nodes(const env::EpisodeTrace& trace, const graph::NavGraph& g, const sampler::NavTask& task)
{
    if (trace.task_id != task.task_id)
        fail(ErrorCode::TraceMismatch, "trace is for task '" + trace.task_id + "', not '" + task.task_id + "'");
    auto known = [&](const graph::NodeId& id) {
        if (!g.contains(id))
            fail(ErrorCode::TraceMismatch, "trace node '" + id + "' is not in the graph");
    };
    known(trace.origin);
    for (const auto& id: trace.start_path)
        known(id);
    for (const auto& d: trace.decisions)
    {
        known(d.node);
        for (const auto& id: d.path)
            known(id);
        for (const auto& o: d.options)
            known(o.toward);
    }
}

std::vector<double> remaining_to_destination(const graph::NavGraph& g, const sampler::NavTask& task)
{
    std::vector<NodeIndex> targets;
    for (const auto& id: task.destination_nodes)
    {
        const auto idx = g.find(id);
        if (!idx)
            fail(ErrorCode::TraceMismatch, "destination node '" + id + "' is not in the graph");
        targets.push_back(*idx);
    }
    return graph::distances_to(g, targets);
}

[[noreturn]] void diverged(int step, const std::string& what)
{
    fail(ErrorCode::ReplayDivergence, "step " + std::to_string(step) + ": " + what);
}

bool same_meters(double a, double b) { return std::abs(a - b) <= kMeterTolerance; }

bool same_options(const std::vector<env::OptionRecord>& a, const std::vector<env::OptionRecord>& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        if (a[i].option_id != b[i].option_id || a[i].toward != b[i].toward || a[i].compass != b[i].compass
            || std::abs(a[i].heading - b[i].heading) > 1e-9)
            return false;
    }
    return true;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json group_json(const GroupMetrics& m)
{
    return json {
        {"episodes", m.episodes},
        {"scored_episodes", m.scored},
        {"aborted_episodes", m.aborted},
        {"success_rate", optional_number(m.success_rate)},
        {"mean_spl", optional_number(m.mean_spl)},
        {"mean_da", optional_number(m.mean_da)},
        {"da_excluded_count", m.da_excluded},
        {"fallback_decisions", m.fallback_decisions},
    };
}

GroupMetrics fold(const std::vector<const EpisodeResult*>& results)
{
    GroupMetrics m;
    double successSum = 0.0;
    double splSum = 0.0;
    double daSum = 0.0;
    int daCount = 0;
    for (const auto* r: results)
    {
        ++m.episodes;
        m.fallback_decisions += r->fallback_decisions;
        if (r->aborted)
        {
            ++m.aborted;
            continue;
        }
        ++m.scored;
        successSum += r->success;
        splSum += r->spl;
        if (r->da)
        {
            daSum += *r->da;
            ++daCount;
        }
        else
        {
            ++m.da_excluded;
        }
    }
    if (m.scored > 0)
    {
        m.success_rate = 100.0 * successSum / m.scored;
        m.mean_spl = splSum / m.scored;
    }
    if (daCount > 0)
        m.mean_da = daSum / daCount;
    return m;
}

json lonlat(const geo::GeoPoint& p) { return json::array({p.lon(), p.lat()}); }

} // namespace

double compute_spl(int success, double d_opt, double d_agent)
{
    if (!(d_opt > 0.0) || !std::isfinite(d_opt))
        fail(ErrorCode::InvalidTask, "optimal path length must be positive");
    if (success != 0 && success != 1)
        fail(ErrorCode::InvalidArgument, "success must be 0 or 1");
    if (d_agent < 0.0 || std::isnan(d_agent))
        fail(ErrorCode::InvalidArgument, "walked distance must be non-negative");
    if (success == 0)
        return 0.0;
    return d_opt / std::max(d_agent, d_opt);
}

DecisionScores score_decisions(const env::EpisodeTrace& trace, const graph::NavGraph& g,
                               const sampler::NavTask& task)
{
    check_known_nodes(trace, g, task);
    const auto remaining = remaining_to_destination(g, task);

    DecisionScores out;
    int correct = 0;
    for (const auto& d: trace.decisions)
    {
        DecisionScore s;
        s.node_before = d.node;
        s.node_after = d.path.empty() ? d.node : d.path.back();
        s.remaining_before = remaining[g.index_of(s.node_before)];
        s.remaining_after = remaining[g.index_of(s.node_after)];
        s.correct = s.remaining_after < s.remaining_before;
        correct += s.correct ? 1 : 0;
        out.records.push_back(std::move(s));
    }
    if (!out.records.empty())
        out.da = 100.0 * correct / static_cast<double>(out.records.size());
    return out;
}

EpisodeResult replay_and_verify(const env::EpisodeTrace& trace, const graph::NavGraph& g,
                                const sampler::NavTask& task, const env::EnvConfig& cfg)
{
    check_known_nodes(trace, g, task);
    if (trace.origin != task.origin)
        fail(ErrorCode::TraceMismatch, "trace origin '" + trace.origin + "' differs from the task origin");

    env::Environment environment(g, task, cfg);
    auto t = environment.reset();
    if (t.path != trace.start_path || t.state.node_transitions_used != trace.start_transitions
        || !same_meters(t.state.traveled_m, trace.start_traveled_m))
        diverged(0, "start of episode does not match");

    for (std::size_t k = 0; k < trace.decisions.size(); ++k)
    {
        const auto& rec = trace.decisions[k];
        const int step = static_cast<int>(k);
        if (rec.step_index != step)
            diverged(step, "recorded step index is " + std::to_string(rec.step_index));
        const auto& obs = environment.observation();
        if (environment.state().status != env::Status::Running || !obs)
            diverged(step, "replayed episode already ended");
        if (obs->node != rec.node)
            diverged(step, "replay is at '" + obs->node + "', trace says '" + rec.node + "'");
        if (!same_options(env::record_options(*obs), rec.options))
            diverged(step, "offered options differ");
        try
        {
            t = environment.step(rec.chosen);
        }
        catch (const Error& e)
        {
            diverged(step, std::string("recorded choice rejected: ") + e.what());
        }
        if (t.path != rec.path)
            diverged(step, "path after choice differs");
        if (t.state.node_transitions_used != rec.node_transitions_used
            || !same_meters(t.state.traveled_m, rec.traveled_m))
            diverged(step, "counters after choice differ");
    }

    const auto& st = environment.state();
    const int end = static_cast<int>(trace.decisions.size());
    const auto expected = trace.final.aborted ? env::Status::Running : trace.final.status;
    if (st.status != expected)
        diverged(end, "replay ended " + std::string(env::to_string(st.status)) + ", trace says "
                          + std::string(env::to_string(trace.final.status)));
    if (!trace.final.aborted && st.status == env::Status::Running)
        diverged(end, "trace ends while the episode is still running");
    if (st.decision_points_used != trace.final.decision_points_used
        || st.node_transitions_used != trace.final.node_transitions_used
        || !same_meters(st.traveled_m, trace.final.traveled_m))
        diverged(end, "final counters differ");

    EpisodeResult r;
    r.task_id = trace.task_id;
    r.city = trace.city.empty() ? task.city : trace.city;
    r.policy = trace.policy;
    r.status = trace.final.status;
    r.aborted = trace.final.aborted;
    r.abort_reason = trace.final.abort_reason;
    r.decisions = end;
    for (const auto& d: trace.decisions)
        r.fallback_decisions += d.fallback ? 1 : 0;

    r.success = st.status == env::Status::Success ? 1 : 0;
    r.d_opt = graph::shortest_path(g, task.origin, task.destination_nodes).meters;
    r.d_agent = st.traveled_m;
    r.spl = compute_spl(r.success, r.d_opt, r.d_agent);
    auto scores = score_decisions(trace, g, task);
    r.decision_records = std::move(scores.records);
    r.da = scores.da;
    return r;
}

MetricsReport aggregate(std::vector<EpisodeResult> results)
{
    std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
        return std::tie(a.city, a.task_id, a.policy) < std::tie(b.city, b.task_id, b.policy);
    });

    MetricsReport report;
    std::vector<const EpisodeResult*> all;
    std::map<std::string, std::vector<const EpisodeResult*>> groups;
    for (const auto& r: results)
    {
        all.push_back(&r);
        groups[r.city].push_back(&r);
    }
    report.overall = fold(all);
    for (const auto& [city, members]: groups)
        report.by_city.emplace(city, fold(members));
    report.episodes = std::move(results);
    return report;
}

std::string report_to_json(const MetricsReport& report)
{
    json cities = json::object();
    for (const auto& [city, m]: report.by_city)
        cities[city] = group_json(m);

    json episodes = json::array();
    for (const auto& r: report.episodes)
    {
        json decisions = json::array();
        for (const auto& d: r.decision_records)
        {
            decisions.push_back({
                {"node_before", d.node_before},
                {"node_after", d.node_after},
                {"remaining_before_m", d.remaining_before},
                {"remaining_after_m", d.remaining_after},
                {"correct", d.correct},
            });
        }
        json e = {
            {"task_id", r.task_id},
            {"city", r.city},
            {"policy", r.policy},
            {"status", env::to_string(r.status)},
            {"success", r.success},
            {"d_opt_m", r.d_opt},
            {"d_agent_m", r.d_agent},
            {"spl", r.spl},
            {"da", optional_number(r.da)},
            {"decisions", r.decisions},
            {"fallback_decisions", r.fallback_decisions},
            {"aborted", r.aborted},
            {"decision_records", std::move(decisions)},
        };
        if (r.aborted)
            e["abort_reason"] = r.abort_reason;
        episodes.push_back(std::move(e));
    }

    const json doc = {
        {"overall", group_json(report.overall)},
        {"cities", std::move(cities)},
        {"episodes", std::move(episodes)},
    };
    return doc.dump(2) + "\n";
}

std::string export_geojson(const env::EpisodeTrace& trace, const graph::NavGraph& g, const sampler::NavTask& task)
{
    check_known_nodes(trace, g, task);
    json features = json::array();

    const auto nodes = trace.node_sequence();
    if (nodes.size() >= 2)
    {
        json coords = json::array();
        for (const auto& id: nodes)
            coords.push_back(lonlat(g.point(id)));
        features.push_back({
            {"type", "Feature"},
            {"geometry", {{"type", "LineString"}, {"coordinates", std::move(coords)}}},
            {"properties",
             {{"role", "path"},
              {"task_id", trace.task_id},
              {"status", env::to_string(trace.final.status)},
              {"traveled_m", trace.final.traveled_m},
              {"stroke", "#1f5fbf"}}},
        });
    }

    features.push_back({
        {"type", "Feature"},
        {"geometry", {{"type", "Point"}, {"coordinates", lonlat(g.point(trace.origin))}}},
        {"properties", {{"role", "origin"}, {"node", trace.origin}, {"marker-color", "#00a000"}}},
    });

    // Exterior ring, closed and counter-clockwise.
    const auto verts = task.destination_polygon.vertices();
    double twiceArea = 0.0;
    for (std::size_t i = 0; i < verts.size(); ++i)
    {
        const auto& a = verts[i];
        const auto& b = verts[(i + 1) % verts.size()];
        twiceArea += a.lon() * b.lat() - b.lon() * a.lat();
    }
    json ring = json::array();
    for (std::size_t i = 0; i < verts.size(); ++i)
        ring.push_back(lonlat(twiceArea >= 0.0 ? verts[i] : verts[verts.size() - 1 - i]));
    ring.push_back(ring.front());
    features.push_back({
        {"type", "Feature"},
        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({std::move(ring)})}}},
        {"properties",
         {{"role", "destination"}, {"name", task.destination_name}, {"fill", "#800080"}, {"stroke", "#800080"}}},
    });

    for (const auto& d: trace.decisions)
    {
        features.push_back({
            {"type", "Feature"},
            {"geometry", {{"type", "Point"}, {"coordinates", lonlat(g.point(d.node))}}},
            {"properties",
             {{"role", "decision"},
              {"step_index", d.step_index},
              {"node", d.node},
              {"chosen", d.chosen},
              {"fallback", d.fallback}}},
        });
    }

    const json doc = {{"type", "FeatureCollection"}, {"features", std::move(features)}};
    return doc.dump(2) + "\n";
}

} // namespace citynav::eval
