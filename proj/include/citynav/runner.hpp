// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <citynav/agent.hpp>
#include <citynav/trace.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace citynav::runner
{

/// Run settings, read from a JSON config file. Every key is optional.
struct RunConfig
{
    /// mock | openai | gemini | ollama
    std::string provider = "mock";
    std::string model;
    std::optional<std::string> base_url;
    std::optional<clients::GenerationParams> params;
    clients::RetryPolicy retry;

    /// stub | streetview
    std::string imagery = "stub";
    std::string streetview_key_env = "GOOGLE_MAPS_API_KEY";
    bool streetview_by_pano = true;
    std::optional<std::filesystem::path> cache_dir = std::filesystem::path("cache");
    std::optional<std::filesystem::path> prompts_dir;

    env::EnvConfig env;
    agent::AgentConfig agent;
    std::uint64_t rng_seed = 0;
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Offline stand-in for a model: answers self-position prompts with a fixed
/// line and decision prompts with a seeded pick from the offered ids.
clients::MockChatClient::Responder make_mock_responder(std::uint64_t seed);

/// Chat client, image provider and templates shared by a batch.
struct Resources
{
    std::unique_ptr<clients::ChatClient> client;
    std::shared_ptr<clients::ImageProvider> images;
    agent::PromptTemplates templates;
    std::string model;
    clients::GenerationParams params;

    static Resources from_config(const RunConfig& cfg);
};

std::unique_ptr<agent::Policy> make_policy(const std::string& name, const graph::NavGraph& g,
                                           const sampler::NavTask& task, Resources& res, const RunConfig& cfg,
                                           std::uint64_t seed);

/// Drives one episode to a terminal status. A ClientUnavailable from the
/// policy ends the run early with the trace marked aborted.
env::EpisodeTrace run_episode(const graph::NavGraph& g, const sampler::NavTask& task, agent::Policy& policy,
                              const env::EnvConfig& cfg = {});

/// Per-task seed derived from the batch seed and the task position.
std::uint64_t episode_seed(std::uint64_t batch_seed, std::size_t task_index);

/// Runs every task and, when `out_dir` is set, writes {task_id}.jsonl there.
std::vector<env::EpisodeTrace> run_batch(const graph::NavGraph& g, const std::vector<sampler::NavTask>& tasks,
                                         const std::string& policy, const RunConfig& cfg,
                                         const std::optional<std::filesystem::path>& out_dir);

} // namespace citynav::runner
