// SPDX-License-Identifier: Apache-2.0
#include <citynav/agent.hpp>
#include <citynav/error.hpp>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace citynav::agent
{

namespace
{

using graph::NodeIndex;

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

// End of the balanced object opening at `open`, honouring string literals.
std::size_t object_end(std::string_view raw, std::size_t open)
{
    int depth = 0;
    bool inString = false;
    bool escaped = false;
    for (std::size_t i = open; i < raw.size(); ++i)
    {
        const char c = raw[i];
        if (inString)
        {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                inString = false;
            continue;
        }
        if (c == '"')
            inString = true;
        else if (c == '{')
            ++depth;
        else if (c == '}' && --depth == 0)
            return i;
    }
    return std::string_view::npos;
}

std::vector<clients::ImageAttachment> fetch_images(const PromptBundle& bundle, clients::ImageProvider& provider)
{
    std::vector<clients::ImageAttachment> out;
    out.reserve(bundle.images.size());
    for (const auto& ref: bundle.images)
    {
        auto bytes = provider.fetch(ref);
        auto mime = clients::sniff_mime(bytes);
        out.push_back({std::move(mime), std::move(bytes)});
    }
    return out;
}

clients::ChatRequest make_request(const PromptBundle& bundle, const LlmContext& ctx, std::string user_text,
                                  std::vector<clients::ImageAttachment> images)
{
    clients::ChatRequest req;
    req.model = ctx.model;
    req.params = ctx.params;
    req.purpose = bundle.purpose;
    req.messages.push_back({"system", bundle.system_text, {}});
    req.messages.push_back({"user", std::move(user_text), std::move(images)});
    return req;
}

std::string corrective_note(const std::string& reason, const std::vector<std::string>& valid_ids)
{
    std::string ids;
    for (const auto& id: valid_ids)
        ids += (ids.empty() ? "" : " | ") + id;
    return "\n\nYOUR PREVIOUS REPLY WAS REJECTED (" + reason
           + "). Reply with exactly one JSON object with string fields \"analysis\", \"decision\" and \"memory\". "
             "The decision must be one of: "
           + ids;
}

void record(AgentMemory& mem, const env::Observation& obs, const std::string& chosen)
{
    const env::Option* opt = obs.find(chosen);
    const geo::Compass compass = opt != nullptr ? opt->compass : geo::Compass::North;
    mem.visit_counts[obs.node] += 1;
    mem.prior_decisions_at[obs.node].push_back({obs.step_index, compass});
    mem.decision_history.push_back({obs.step_index, obs.node, chosen, compass});
}

} // namespace

AgentResponse parse_response(std::string_view raw, const std::vector<std::string>& valid_ids)
{
    std::optional<nlohmann::json> object;
    for (auto open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1))
    {
        const auto close = object_end(raw, open);
        if (close == std::string_view::npos)
            continue;
        auto parsed = nlohmann::json::parse(raw.substr(open, close - open + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object())
        {
            object = std::move(parsed);
            break;
        }
    }
    if (!object)
        fail(ErrorCode::MalformedResponse, "no JSON object found in model reply");

    AgentResponse r;
    for (const auto* key: {"analysis", "decision", "memory"})
    {
        const auto it = object->find(key);
        if (it == object->end())
            fail(ErrorCode::SchemaViolation, std::string("missing field '") + key + "'");
        if (!it->is_string())
            fail(ErrorCode::SchemaViolation, std::string("field '") + key + "' is not a string");
        if (trim(it->get_ref<const std::string&>()).empty())
            fail(ErrorCode::SchemaViolation, std::string("field '") + key + "' is empty");
    }
    r.analysis = (*object)["analysis"].get<std::string>();
    r.decision = trim((*object)["decision"].get<std::string>());
    r.memory = (*object)["memory"].get<std::string>();

    if (std::find(valid_ids.begin(), valid_ids.end(), r.decision) == valid_ids.end())
        fail(ErrorCode::InvalidDecision, "decision '" + r.decision + "' is not an offered option");
    return r;
}

std::optional<AgentResponse> query_with_retries(const PromptBundle& bundle, LlmContext& ctx, int& attempts_used)
{
    attempts_used = 0;
    const auto images = fetch_images(bundle, ctx.images);
    std::string note;
    for (int attempt = 0; attempt < ctx.config.max_attempts; ++attempt)
    {
        attempts_used = attempt + 1;
        // ClientUnavailable propagates: the transport already retried.
        const auto reply = ctx.client.chat(make_request(bundle, ctx, bundle.user_text + note, images));
        try
        {
            return parse_response(reply.text, bundle.valid_ids);
        }
        catch (const Error& e)
        {
            spdlog::debug("step {}: rejected reply on attempt {}: {}", bundle.step_index, attempts_used, e.what());
            note = corrective_note(e.what(), bundle.valid_ids);
        }
    }
    return std::nullopt;
}

PositionEstimate self_position(const env::Observation& obs, const sampler::NavTask& task, AgentMemory& mem,
                               LlmContext& ctx)
{
    const auto bundle = build_self_position_prompt(obs, task, mem, ctx.templates);
    const auto images = fetch_images(bundle, ctx.images);

    PositionEstimate est;
    std::string note;
    bool parsed = false;
    for (int attempt = 0; attempt < ctx.config.max_attempts && !parsed; ++attempt)
    {
        const auto reply = ctx.client.chat(make_request(bundle, ctx, bundle.user_text + note, images));
        std::string line = trim(reply.text);
        if (const auto nl = line.find('\n'); nl != std::string::npos)
            line = trim(std::string_view(line).substr(0, nl));

        const auto marker = line.find("(evidence:");
        const auto close = line.rfind(')');
        if (marker == std::string::npos || close == std::string::npos || close < marker)
        {
            note = "\n\nYOUR PREVIOUS REPLY WAS REJECTED. Answer with one line in exactly this form: "
                   "<estimated location> (evidence: <visual evidence>)";
            continue;
        }
        est.estimate = trim(std::string_view(line).substr(0, marker));
        est.evidence = trim(std::string_view(line).substr(marker + 10, close - marker - 10));
        parsed = !est.estimate.empty();
    }
    if (!parsed)
    {
        est = PositionEstimate {.estimate = "unknown", .evidence = "", .fallback = true};
        spdlog::warn("step {}: self-positioning failed, using 'unknown'", obs.step_index);
    }

    mem.position_estimate = est.estimate;
    mem.position_evidence = est.evidence;
    return est;
}

std::string random_decide(const env::Observation& obs, Rng& rng)
{
    if (obs.options.empty())
        fail(ErrorCode::InvalidArgument, "observation has no options");
    return obs.options[rng.index(obs.options.size())].option_id;
}

Decision agentnav_decide(const env::Observation& obs, const sampler::NavTask& task, AgentMemory& mem,
                         LlmContext& ctx, Rng& rng)
{
    const auto bundle = build_vop_prompt(obs, task, mem, ctx.templates);
    int attempts = 0;
    const auto resp = query_with_retries(bundle, ctx, attempts);

    Decision d;
    d.retries = std::max(0, attempts - 1);
    if (resp)
    {
        d.option_id = resp->decision;
        d.analysis = resp->analysis;
        mem.markovian = truncate_memory(resp->memory, ctx.config.memory_cap);
    }
    else
    {
        d.option_id = random_decide(obs, rng);
        d.fallback = true;
        spdlog::warn("step {}: no valid reply after {} attempts, choosing {} at random", obs.step_index, attempts,
                     d.option_id);
    }
    d.memory_after = mem.markovian;
    d.position_estimate = mem.position_line();
    record(mem, obs, d.option_id);
    return d;
}

Decision base_decide(const env::Observation& obs, const sampler::NavTask& task, LlmContext& ctx, Rng& rng)
{
    const auto bundle = build_base_prompt(obs, task, ctx.templates);
    int attempts = 0;
    const auto resp = query_with_retries(bundle, ctx, attempts);

    Decision d;
    d.retries = std::max(0, attempts - 1);
    if (resp)
    {
        d.option_id = resp->decision;
        d.analysis = resp->analysis;
    }
    else
    {
        d.option_id = random_decide(obs, rng);
        d.fallback = true;
    }
    return d;
}

AgentNavPolicy::AgentNavPolicy(const sampler::NavTask& task, LlmContext ctx)
    : _task(task), _ctx(std::move(ctx)), _rng(_ctx.config.rng_seed)
{
    if (_ctx.config.max_attempts < 1)
        fail(ErrorCode::ConfigError, "max_attempts must be at least 1");
    if (_ctx.config.self_position_period < 1)
        fail(ErrorCode::ConfigError, "self_position_period must be at least 1");
    _memory.position_estimate = "unknown";
    _memory.position_evidence.clear();
}

Decision AgentNavPolicy::decide(const env::Observation& obs)
{
    const bool locate = obs.step_index % _ctx.config.self_position_period == 0;
    if (locate)
        self_position(obs, _task, _memory, _ctx);
    auto d = agentnav_decide(obs, _task, _memory, _ctx, _rng);
    d.self_positioned = locate;
    return d;
}

BasePolicy::BasePolicy(const sampler::NavTask& task, LlmContext ctx)
    : _task(task), _ctx(std::move(ctx)), _rng(_ctx.config.rng_seed)
{
    if (_ctx.config.max_attempts < 1)
        fail(ErrorCode::ConfigError, "max_attempts must be at least 1");
}

Decision BasePolicy::decide(const env::Observation& obs) { return base_decide(obs, _task, _ctx, _rng); }

OraclePolicy::OraclePolicy(const graph::NavGraph& g, const sampler::NavTask& task)
    : _g(g), _destination(g.node_count(), false)
{
    std::vector<NodeIndex> targets;
    for (const auto& id: task.destination_nodes)
    {
        const NodeIndex i = g.index_of(id);
        _destination[i] = true;
        targets.push_back(i);
    }
    _remaining = graph::distances_to(g, targets);
}

double OraclePolicy::option_cost(const graph::NodeId& at, const graph::NodeId& toward) const
{
    constexpr double kInf = std::numeric_limits<double>::infinity();
    NodeIndex prev = _g.index_of(at);
    NodeIndex cur = _g.index_of(toward);
    const auto first = _g.link_length(prev, cur);
    if (!first)
        fail(ErrorCode::InvalidArgument, "'" + toward + "' is not adjacent to '" + at + "'");
    double cost = *first;

    // Follow the corridor the environment would walk silently.
    for (std::size_t hops = 0; hops <= _g.node_count(); ++hops)
    {
        if (_destination[cur])
            return cost;
        if (env::onward_degree(_g, cur, prev) != 1)
            return cost + _remaining[cur];
        NodeIndex next = cur;
        for (const auto& l: _g.links(cur))
        {
            if (l.to != prev)
                next = l.to;
        }
        cost += *_g.link_length(cur, next);
        prev = cur;
        cur = next;
    }
    return kInf; // closed loop with no exit
}

std::string oracle_decide(const env::Observation& obs, const OraclePolicy& oracle)
{
    if (obs.options.empty())
        fail(ErrorCode::InvalidArgument, "observation has no options");
    const env::Option* best = nullptr;
    double bestCost = std::numeric_limits<double>::infinity();
    for (const auto& o: obs.options)
    {
        const double c = oracle.option_cost(obs.node, o.toward);
        if (!std::isfinite(c))
            continue;
        if (best == nullptr || c < bestCost || (c == bestCost && o.option_id < best->option_id))
        {
            best = &o;
            bestCost = c;
        }
    }
    if (best == nullptr)
        fail(ErrorCode::Unreachable, "no option at '" + obs.node + "' leads to the destination");
    return best->option_id;
}

Decision OraclePolicy::decide(const env::Observation& obs)
{
    Decision d;
    d.option_id = oracle_decide(obs, *this);
    return d;
}

Decision RandomPolicy::decide(const env::Observation& obs)
{
    Decision d;
    d.option_id = random_decide(obs, _rng);
    return d;
}

} // namespace citynav::agent
