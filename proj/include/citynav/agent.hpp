// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <citynav/chat.hpp>
#include <citynav/env.hpp>
#include <citynav/imagery.hpp>
#include <citynav/rng.hpp>
#include <citynav/sampler.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace citynav::agent
{

struct DecisionEntry
{
    int step_index = 0;
    graph::NodeId node;
    std::string option_id;
    geo::Compass compass = geo::Compass::North;
};

struct PriorDecision
{
    int step_index = 0;
    geo::Compass compass = geo::Compass::North;
};

/// Per-episode agent state: the agent-authored Markovian memory, the ordered
/// decision history, visit counts, and the latest self-position estimate.
struct AgentMemory
{
    std::string markovian;
    std::vector<DecisionEntry> decision_history;
    std::map<graph::NodeId, int> visit_counts;
    std::map<graph::NodeId, std::vector<PriorDecision>> prior_decisions_at;
    std::string position_estimate;
    std::string position_evidence;

    /// "<estimate> (evidence: <evidence>)", as shown to the model.
    [[nodiscard]] std::string position_line() const;
};

struct AgentResponse
{
    std::string analysis;
    std::string decision;
    std::string memory;
};

struct PromptBundle
{
    std::string system_text;
    std::string user_text;
    /// One per option, in option order.
    std::vector<clients::ImageRef> images;
    std::vector<std::string> option_legend;
    std::vector<std::string> valid_ids;
    int step_index = 0;
    int retry_count = 0;
    std::string purpose;
};

/// Text assets with {{placeholder}} slots. Built-ins are compiled in from
/// assets/prompts; a directory may override any of them.
struct PromptTemplates
{
    std::string agentnav;
    std::string base;
    std::string self_position;
    std::string response_contract;

    static const PromptTemplates& builtin();
    static PromptTemplates from_directory(const std::filesystem::path& dir);
};

/// Replaces every {{name}}; throws ConfigError on placeholders without a value.
std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars);

struct AgentConfig
{
    std::size_t memory_cap = 4000;
    int max_attempts = 3;
    int self_position_period = 3;
    std::uint64_t rng_seed = 0;
};

/// Keeps the newest `cap` characters (UTF-8 code points).
std::string truncate_memory(std::string_view text, std::size_t cap);

/// "Option step0_option1: facing South (212°)"
std::string legend_line(const env::Option& option);

PromptBundle build_vop_prompt(const env::Observation& obs, const sampler::NavTask& task, const AgentMemory& mem,
                              const PromptTemplates& templates = PromptTemplates::builtin());
PromptBundle build_base_prompt(const env::Observation& obs, const sampler::NavTask& task,
                               const PromptTemplates& templates = PromptTemplates::builtin());
PromptBundle build_self_position_prompt(const env::Observation& obs, const sampler::NavTask& task,
                                        const AgentMemory& mem,
                                        const PromptTemplates& templates = PromptTemplates::builtin());

/// Extracts the first JSON object in `raw` (prose and code fences around it
/// are ignored) and validates it against the three-field schema.
AgentResponse parse_response(std::string_view raw, const std::vector<std::string>& valid_ids);

/// What a policy decided at one decision point, plus audit details.
struct Decision
{
    std::string option_id;
    std::string analysis;
    std::string memory_after;
    std::string position_estimate;
    bool self_positioned = false;
    bool fallback = false;
    int retries = 0;
};

/// Everything an LLM-backed decision needs besides the observation.
struct LlmContext
{
    clients::ChatClient& client;
    clients::ImageProvider& images;
    std::string model;
    clients::GenerationParams params;
    AgentConfig config;
    const PromptTemplates& templates = PromptTemplates::builtin();
};

/// Sends a prompt and retries with a corrective note on malformed replies.
/// Returns nullopt once every attempt failed; `attempts_used` reports how many ran.
std::optional<AgentResponse> query_with_retries(const PromptBundle& bundle, LlmContext& ctx, int& attempts_used);

struct PositionEstimate
{
    std::string estimate;
    std::string evidence;
    bool fallback = false;
};

/// Dedicated localization call; stores the result in `mem`.
PositionEstimate self_position(const env::Observation& obs, const sampler::NavTask& task, AgentMemory& mem,
                               LlmContext& ctx);

/// VoP prompt, parse, retry, random fallback, then memory bookkeeping.
Decision agentnav_decide(const env::Observation& obs, const sampler::NavTask& task, AgentMemory& mem,
                         LlmContext& ctx, Rng& rng);

/// Base prompt without grounding or memory blocks.
Decision base_decide(const env::Observation& obs, const sampler::NavTask& task, LlmContext& ctx, Rng& rng);

std::string random_decide(const env::Observation& obs, Rng& rng);

class Policy
{
  public:
    virtual ~Policy() = default;
    virtual Decision decide(const env::Observation& obs) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

/// Full AgentNav policy: self-positioning on schedule plus agentnav_decide.
class AgentNavPolicy final: public Policy
{
  public:
    AgentNavPolicy(const sampler::NavTask& task, LlmContext ctx);
    Decision decide(const env::Observation& obs) override;
    [[nodiscard]] std::string name() const override { return "agentnav"; }
    [[nodiscard]] const AgentMemory& memory() const noexcept { return _memory; }

  private:
    const sampler::NavTask& _task;
    LlmContext _ctx;
    AgentMemory _memory;
    Rng _rng;
};

class BasePolicy final: public Policy
{
  public:
    BasePolicy(const sampler::NavTask& task, LlmContext ctx);
    Decision decide(const env::Observation& obs) override;
    [[nodiscard]] std::string name() const override { return "base"; }

  private:
    const sampler::NavTask& _task;
    LlmContext _ctx;
    Rng _rng;
};

/// Picks the option with the least total distance to the destination,
/// counting the corridor walked before the next decision point.
class OraclePolicy final: public Policy
{
  public:
    OraclePolicy(const graph::NavGraph& g, const sampler::NavTask& task);
    Decision decide(const env::Observation& obs) override;
    [[nodiscard]] std::string name() const override { return "oracle"; }

    /// Corridor length plus remaining distance for one option (infinity if unreachable).
    [[nodiscard]] double option_cost(const graph::NodeId& at, const graph::NodeId& toward) const;

  private:
    const graph::NavGraph& _g;
    std::vector<bool> _destination;
    std::vector<double> _remaining;
};

std::string oracle_decide(const env::Observation& obs, const OraclePolicy& oracle);

class RandomPolicy final: public Policy
{
  public:
    explicit RandomPolicy(std::uint64_t seed): _rng(seed) {}
    Decision decide(const env::Observation& obs) override;
    [[nodiscard]] std::string name() const override { return "random"; }

  private:
    Rng _rng;
};

} // namespace citynav::agent
