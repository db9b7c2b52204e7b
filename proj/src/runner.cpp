// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>
#include <citynav/runner.hpp>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

namespace citynav::runner
{

namespace
{

using nlohmann::json;

// Rejects keys outside `allowed` so typos surface instead of being ignored.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object())
        fail(ErrorCode::ConfigError, where + " must be a JSON object");
    const std::set<std::string> known(allowed.begin(), allowed.end());
    for (const auto& [key, _]: obj.items())
    {
        if (!known.contains(key))
            fail(ErrorCode::ConfigError, "unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out)
{
    const auto it = obj.find(key);
    if (it == obj.end())
        return;
    try
    {
        out = it->get<T>();
    }
    catch (const json::exception& e)
    {
        fail(ErrorCode::ConfigError, std::string("bad value for '") + key + "': " + e.what());
    }
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& out)
{
    const auto it = obj.find(key);
    if (it == obj.end())
        return;
    if (it->is_null())
    {
        out.reset();
        return;
    }
    T value {};
    read(obj, key, value);
    out = std::move(value);
}

clients::GenerationParams provider_defaults(const std::string& provider)
{
    if (provider == "mock")
        return {};
    return clients::ProviderProfile::named(provider).params;
}

void read_generation(const json& obj, clients::GenerationParams& p)
{
    check_keys(obj, "generation",
               {"temperature", "top_p", "top_k", "presence_penalty", "frequency_penalty", "repeat_penalty",
                "repeat_last_n", "max_tokens", "candidate_count"});
    read(obj, "temperature", p.temperature);
    read(obj, "top_p", p.top_p);
    read_optional(obj, "top_k", p.top_k);
    read(obj, "presence_penalty", p.presence_penalty);
    read(obj, "frequency_penalty", p.frequency_penalty);
    read_optional(obj, "repeat_penalty", p.repeat_penalty);
    read_optional(obj, "repeat_last_n", p.repeat_last_n);
    read(obj, "max_tokens", p.max_tokens);
    read(obj, "candidate_count", p.candidate_count);
}

std::vector<std::string> offered_ids(const std::string& prompt)
{
    std::vector<std::string> ids;
    const auto marker = prompt.find("VALID OPTION IDS");
    if (marker == std::string::npos)
        return ids;
    const auto start = prompt.find('\n', marker);
    if (start == std::string::npos)
        return ids;
    const auto end = prompt.find('\n', start + 1);
    std::istringstream line(prompt.substr(start + 1, end == std::string::npos ? end : end - start - 1));
    std::string token;
    while (line >> token)
    {
        if (token != "|")
            ids.push_back(token);
    }
    return ids;
}

} // namespace

RunConfig parse_run_config(std::string_view json_text)
{
    const json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded())
        fail(ErrorCode::ConfigError, "config is not valid JSON");
    check_keys(doc, "config",
               {"provider", "model", "base_url", "generation", "retry", "imagery", "prompts_dir", "env", "agent",
                "rng_seed"});

    RunConfig cfg;
    read(doc, "provider", cfg.provider);
    if (cfg.provider != "mock" && cfg.provider != "openai" && cfg.provider != "gemini" && cfg.provider != "ollama")
        fail(ErrorCode::ConfigError, "provider must be one of mock, openai, gemini, ollama");
    read(doc, "model", cfg.model);
    read_optional(doc, "base_url", cfg.base_url);
    read(doc, "rng_seed", cfg.rng_seed);

    auto params = provider_defaults(cfg.provider);
    if (doc.contains("generation"))
    {
        read_generation(doc["generation"], params);
        params.validate();
        cfg.params = params;
    }

    if (doc.contains("retry"))
    {
        const auto& r = doc["retry"];
        check_keys(r, "retry", {"max_attempts", "initial_backoff_ms", "multiplier"});
        read(r, "max_attempts", cfg.retry.max_attempts);
        long long ms = cfg.retry.initial_backoff.count();
        read(r, "initial_backoff_ms", ms);
        cfg.retry.initial_backoff = std::chrono::milliseconds(ms);
        read(r, "multiplier", cfg.retry.multiplier);
        if (cfg.retry.max_attempts < 1 || ms < 0 || cfg.retry.multiplier < 1.0)
            fail(ErrorCode::ConfigError, "retry settings out of range");
    }

    if (doc.contains("imagery"))
    {
        const auto& im = doc["imagery"];
        check_keys(im, "imagery", {"source", "key_env", "by_pano", "cache_dir", "width", "height", "fov", "pitch"});
        read(im, "source", cfg.imagery);
        if (cfg.imagery != "stub" && cfg.imagery != "streetview")
            fail(ErrorCode::ConfigError, "imagery.source must be stub or streetview");
        read(im, "key_env", cfg.streetview_key_env);
        read(im, "by_pano", cfg.streetview_by_pano);
        std::optional<std::string> cache = cfg.cache_dir ? std::optional(cfg.cache_dir->string()) : std::nullopt;
        read_optional(im, "cache_dir", cache);
        cfg.cache_dir = cache ? std::optional<std::filesystem::path>(*cache) : std::nullopt;
        read(im, "width", cfg.env.image.width);
        read(im, "height", cfg.env.image.height);
        read(im, "fov", cfg.env.image.fov);
        read(im, "pitch", cfg.env.image.pitch);
    }

    std::optional<std::string> prompts;
    read_optional(doc, "prompts_dir", prompts);
    if (prompts)
        cfg.prompts_dir = *prompts;

    if (doc.contains("env"))
    {
        const auto& e = doc["env"];
        check_keys(e, "env", {"max_decision_points", "max_steps"});
        read(e, "max_decision_points", cfg.env.max_decision_points);
        read(e, "max_steps", cfg.env.max_steps);
    }
    if (doc.contains("agent"))
    {
        const auto& a = doc["agent"];
        check_keys(a, "agent", {"memory_cap", "max_attempts", "self_position_period"});
        read(a, "memory_cap", cfg.agent.memory_cap);
        read(a, "max_attempts", cfg.agent.max_attempts);
        read(a, "self_position_period", cfg.agent.self_position_period);
        if (cfg.agent.max_attempts < 1 || cfg.agent.self_position_period < 1)
            fail(ErrorCode::ConfigError, "agent.max_attempts and agent.self_position_period must be positive");
    }
    cfg.env.self_position_period = cfg.agent.self_position_period;
    try
    {
        cfg.env.validate();
    }
    catch (const Error& e)
    {
        fail(ErrorCode::ConfigError, e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::ConfigError, "cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

clients::MockChatClient::Responder make_mock_responder(std::uint64_t seed)
{
    struct State
    {
        explicit State(std::uint64_t s): rng(s) {}
        std::mutex mutex;
        Rng rng;
        int calls = 0;
    };
    auto state = std::make_shared<State>(seed);

    return [state](const clients::ChatRequest& req) -> std::string {
        std::lock_guard lock(state->mutex);
        const int call = ++state->calls;
        if (req.purpose == "self_position")
            return "Somewhere in the synthetic city (evidence: placeholder imagery only)";

        const std::string& prompt = req.messages.empty() ? std::string() : req.messages.back().text;
        const auto ids = offered_ids(prompt);
        if (ids.empty())
            return "I cannot see any options.";
        const auto& pick = ids[state->rng.index(ids.size())];
        const json reply = {
            {"analysis", "Mock analysis for call " + std::to_string(call) + "."},
            {"decision", pick},
            {"memory", "call " + std::to_string(call) + ": took " + pick},
        };
        return reply.dump();
    };
}

Resources Resources::from_config(const RunConfig& cfg)
{
    Resources res;
    res.templates = cfg.prompts_dir ? agent::PromptTemplates::from_directory(*cfg.prompts_dir)
                                    : agent::PromptTemplates::builtin();
    res.params = cfg.params.value_or(provider_defaults(cfg.provider));

    if (cfg.provider == "mock")
    {
        res.client = std::make_unique<clients::MockChatClient>(make_mock_responder(cfg.rng_seed));
        res.model = cfg.model.empty() ? "mock" : cfg.model;
    }
    else
    {
        auto profile = clients::ProviderProfile::named(cfg.provider);
        if (!cfg.model.empty())
            profile.model = cfg.model;
        if (cfg.base_url)
            profile.base_url = *cfg.base_url;
        profile.params = res.params;
        res.model = profile.model;
        res.client = std::make_unique<clients::RetryingChatClient>(
            std::make_unique<clients::HttpChatTransport>(std::move(profile)), cfg.retry);
    }

    if (cfg.imagery == "streetview")
    {
        std::shared_ptr<clients::ImageProvider> live =
            clients::StreetViewProvider::from_env(cfg.streetview_key_env, cfg.streetview_by_pano);
        res.images = cfg.cache_dir ? std::make_shared<clients::CachingImageProvider>(live, *cfg.cache_dir) : live;
    }
    else
    {
        // Placeholders are free to regenerate, so they skip the disk cache.
        res.images = std::make_shared<clients::StubImageProvider>();
    }
    return res;
}

std::unique_ptr<agent::Policy> make_policy(const std::string& name, const graph::NavGraph& g,
                                           const sampler::NavTask& task, Resources& res, const RunConfig& cfg,
                                           std::uint64_t seed)
{
    auto llm = [&] {
        auto agentCfg = cfg.agent;
        agentCfg.rng_seed = seed;
        return agent::LlmContext {*res.client, *res.images, res.model, res.params, agentCfg, res.templates};
    };
    if (name == "agentnav")
        return std::make_unique<agent::AgentNavPolicy>(task, llm());
    if (name == "base")
        return std::make_unique<agent::BasePolicy>(task, llm());
    if (name == "oracle")
        return std::make_unique<agent::OraclePolicy>(g, task);
    if (name == "random")
        return std::make_unique<agent::RandomPolicy>(seed);
    fail(ErrorCode::InvalidArgument, "unknown policy '" + name + "' (expected agentnav, base, oracle or random)");
}

env::EpisodeTrace run_episode(const graph::NavGraph& g, const sampler::NavTask& task, agent::Policy& policy,
                              const env::EnvConfig& cfg)
{
    env::EpisodeTrace trace;
    trace.task_id = task.task_id;
    trace.city = task.city;
    trace.policy = policy.name();
    trace.origin = task.origin;

    env::Environment environment(g, task, cfg);
    auto t = environment.reset();
    trace.start_path = t.path;
    trace.start_transitions = t.state.node_transitions_used;
    trace.start_traveled_m = t.state.traveled_m;

    while (environment.state().status == env::Status::Running && environment.observation())
    {
        const env::Observation obs = *environment.observation();
        agent::Decision d;
        try
        {
            d = policy.decide(obs);
        }
        catch (const Error& e)
        {
            if (e.code() != ErrorCode::ClientUnavailable)
                throw;
            spdlog::error("task {}: aborting at step {}: {}", task.task_id, obs.step_index, e.what());
            trace.final.aborted = true;
            trace.final.abort_reason = e.what();
            break;
        }

        t = environment.step(d.option_id);
        env::DecisionRecord rec;
        rec.step_index = obs.step_index;
        rec.node = obs.node;
        rec.options = env::record_options(obs);
        rec.chosen = d.option_id;
        rec.memory_after = d.memory_after;
        rec.analysis = d.analysis;
        rec.position_estimate = d.position_estimate;
        rec.self_positioned = d.self_positioned;
        rec.fallback = d.fallback;
        rec.retries = d.retries;
        rec.path = std::move(t.path);
        rec.node_transitions_used = t.state.node_transitions_used;
        rec.traveled_m = t.state.traveled_m;
        trace.decisions.push_back(std::move(rec));
    }

    const auto& st = environment.state();
    trace.final.status = st.status;
    trace.final.decision_points_used = st.decision_points_used;
    trace.final.node_transitions_used = st.node_transitions_used;
    trace.final.traveled_m = st.traveled_m;
    return trace;
}

std::uint64_t episode_seed(std::uint64_t batch_seed, std::size_t task_index)
{
    // splitmix64 step keeps neighbouring tasks decorrelated.
    std::uint64_t z = batch_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(task_index) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<env::EpisodeTrace> run_batch(const graph::NavGraph& g, const std::vector<sampler::NavTask>& tasks,
                                         const std::string& policy, const RunConfig& cfg,
                                         const std::optional<std::filesystem::path>& out_dir)
{
    auto res = Resources::from_config(cfg);
    if (out_dir)
        std::filesystem::create_directories(*out_dir);

    std::vector<env::EpisodeTrace> traces;
    traces.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i)
    {
        auto p = make_policy(policy, g, tasks[i], res, cfg, episode_seed(cfg.rng_seed, i));
        auto trace = run_episode(g, tasks[i], *p, cfg.env);
        spdlog::info("task {}: {} after {} decisions, {:.1f} m", trace.task_id, env::to_string(trace.final.status),
                     trace.decisions.size(), trace.final.traveled_m);
        if (out_dir)
            env::write_trace_file(trace, (*out_dir / (trace.task_id + ".jsonl")).string());
        traces.push_back(std::move(trace));
    }
    return traces;
}

} // namespace citynav::runner
