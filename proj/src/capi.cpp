// SPDX-License-Identifier: Apache-2.0
#include <citynav/citynav.h>

#include <citynav/error.hpp>
#include <citynav/eval.hpp>
#include <citynav/runner.hpp>
#include <citynav/synth.hpp>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cstring>
#include <filesystem>
#include <map>
#include <new>
#include <set>

struct cn_graph
{
    citynav::graph::NavGraph graph;
};

struct cn_tasks
{
    std::vector<citynav::sampler::NavTask> tasks;
};

namespace
{

using namespace citynav;
using nlohmann::json;

thread_local std::string t_lastError;

template <typename Fn>
cn_status guarded(Fn&& fn) noexcept
{
    try
    {
        fn();
        t_lastError.clear();
        return CN_OK;
    }
    catch (const Error& e)
    {
        t_lastError = e.what();
        return static_cast<cn_status>(e.code());
    }
    catch (const std::filesystem::filesystem_error& e)
    {
        t_lastError = std::string("IoError: ") + e.what();
        return CN_E_IO;
    }
    catch (const std::exception& e)
    {
        t_lastError = std::string("internal error: ") + e.what();
        return CN_E_INTERNAL;
    }
    catch (...)
    {
        t_lastError = "internal error: unknown exception";
        return CN_E_INTERNAL;
    }
}

void require(bool ok, const char* what)
{
    if (!ok)
        fail(ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s)
{
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr)
        throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

std::string repair_report_json(const graph::GraphRepairReport& r, const graph::NavGraph& g)
{
    json isolated = json::array();
    for (const auto& c: r.isolated_components)
        isolated.push_back({{"size", c.size}, {"sample", c.sample}});
    const json doc = {
        {"reverse_edges_added", r.reverse_edges_added},
        {"dead_end_nodes_removed", r.dead_end_nodes_removed},
        {"long_jump_edges_removed", r.long_jump_edges_removed},
        {"isolated_components", std::move(isolated)},
        {"nodes", g.node_count()},
        {"edges", g.edge_count()},
    };
    return doc.dump(2) + "\n";
}

std::map<std::string, const sampler::NavTask*> index_tasks(const cn_tasks* tasks)
{
    std::map<std::string, const sampler::NavTask*> byId;
    for (const auto& t: tasks->tasks)
        byId.emplace(t.task_id, &t);
    return byId;
}

const sampler::NavTask& task_for(const std::map<std::string, const sampler::NavTask*>& byId,
                                 const env::EpisodeTrace& trace)
{
    const auto it = byId.find(trace.task_id);
    if (it == byId.end())
        fail(ErrorCode::TraceMismatch, "no task with id '" + trace.task_id + "' in the task file");
    return *it->second;
}

runner::RunConfig config_from(const char* path)
{
    return path == nullptr ? runner::RunConfig {} : runner::load_run_config(path);
}

} // namespace

extern "C" {

const char* cn_last_error(void) { return t_lastError.c_str(); }

const char* cn_status_name(cn_status status)
{
    if (status == CN_OK)
        return "Ok";
    if (status == CN_E_INTERNAL)
        return "Internal";
    if (status >= CN_E_INVALID_ARGUMENT && status <= CN_E_IO)
        return to_string(static_cast<ErrorCode>(status)).data();
    return "Unknown";
}

const char* cn_version(void) { return CITYNAV_VERSION; }

void cn_string_free(char* s) { std::free(s); }

cn_status cn_set_log_level(const char* level)
{
    return guarded([&] {
        require(level != nullptr, "level is null");
        static const std::map<std::string, spdlog::level::level_enum> levels {
            {"trace", spdlog::level::trace}, {"debug", spdlog::level::debug}, {"info", spdlog::level::info},
            {"warn", spdlog::level::warn},   {"error", spdlog::level::err},   {"off", spdlog::level::off},
        };
        const auto it = levels.find(level);
        if (it == levels.end())
            fail(ErrorCode::InvalidArgument, std::string("unknown log level '") + level + "'");
        spdlog::set_level(it->second);
    });
}

cn_status cn_graph_load(const char* path, cn_graph** out)
{
    return guarded([&] {
        require(path != nullptr && out != nullptr, "path and out must be non-null");
        *out = new cn_graph {graph::load_graph_file(path).graph};
    });
}

cn_status cn_graph_save(const cn_graph* g, const char* path)
{
    return guarded([&] {
        require(g != nullptr && path != nullptr, "graph and path must be non-null");
        graph::write_graph_file(g->graph, path);
    });
}

cn_status cn_graph_stats(const cn_graph* g, size_t* nodes, size_t* edges)
{
    return guarded([&] {
        require(g != nullptr, "graph is null");
        if (nodes != nullptr)
            *nodes = g->graph.node_count();
        if (edges != nullptr)
            *edges = g->graph.edge_count();
    });
}

void cn_graph_free(cn_graph* g) { delete g; }

cn_status cn_graph_synth_grid(int rows, int cols, double spacing_m, cn_graph** out)
{
    return guarded([&] {
        require(out != nullptr, "out is null");
        synth::GridSpec spec;
        spec.rows = rows;
        spec.cols = cols;
        spec.spacing_m = spacing_m;
        *out = new cn_graph {synth::make_grid(spec)};
    });
}

cn_status cn_graph_synth_noisy(int rows, int cols, double spacing_m, uint64_t seed, cn_graph** out)
{
    return guarded([&] {
        require(out != nullptr, "out is null");
        synth::GridSpec spec;
        spec.rows = rows;
        spec.cols = cols;
        spec.spacing_m = spacing_m;
        synth::NoiseSpec noise;
        noise.seed = seed;
        *out = new cn_graph {synth::make_noisy_city(spec, noise)};
    });
}

cn_status cn_graph_repair(const cn_graph* g, const char* const* protect, size_t protect_count, double max_edge_m,
                          cn_graph** out, char** report_json)
{
    return guarded([&] {
        require(g != nullptr && out != nullptr, "graph and out must be non-null");
        require(protect != nullptr || protect_count == 0, "protect is null but count is not zero");
        std::set<graph::NodeId> keep;
        for (size_t i = 0; i < protect_count; ++i)
        {
            require(protect[i] != nullptr, "protected id is null");
            keep.emplace(protect[i]);
        }
        auto result = graph::repair_graph(g->graph, keep, max_edge_m == 0.0 ? graph::kDefaultMaxEdgeM : max_edge_m);
        char* report = report_json != nullptr ? dup_string(repair_report_json(result.report, result.graph)) : nullptr;
        *out = new cn_graph {std::move(result.graph)};
        if (report_json != nullptr)
            *report_json = report;
    });
}

cn_status cn_tasks_load(const char* path, cn_tasks** out)
{
    return guarded([&] {
        require(path != nullptr && out != nullptr, "path and out must be non-null");
        *out = new cn_tasks {sampler::load_tasks_file(path)};
    });
}

cn_status cn_tasks_count(const cn_tasks* tasks, size_t* count)
{
    return guarded([&] {
        require(tasks != nullptr && count != nullptr, "tasks and count must be non-null");
        *count = tasks->tasks.size();
    });
}

void cn_tasks_free(cn_tasks* tasks) { delete tasks; }

cn_sampler_options cn_sampler_options_default(void)
{
    const sampler::SamplerConfig d;
    cn_sampler_options o {};
    o.d_target_m = d.d_target;
    o.t_max = d.t_max;
    o.t_min = d.t_min;
    o.gamma = d.gamma;
    o.d_min_final = d.d_min_final;
    o.max_extra_steps = d.max_extra_steps;
    o.rng_seed = d.rng_seed;
    o.destination_half_size_m = 25.0;
    o.destination_name = nullptr;
    o.city = nullptr;
    return o;
}

cn_status cn_sample_task(const cn_graph* g, const char* destination_node, const cn_sampler_options* opts,
                         char** task_json)
{
    return guarded([&] {
        require(g != nullptr && destination_node != nullptr && opts != nullptr && task_json != nullptr,
                "graph, destination node, options and output must be non-null");
        sampler::SamplerConfig cfg;
        cfg.d_target = opts->d_target_m;
        cfg.t_max = opts->t_max;
        cfg.t_min = opts->t_min;
        cfg.gamma = opts->gamma;
        cfg.d_min_final = opts->d_min_final;
        cfg.max_extra_steps = opts->max_extra_steps;
        cfg.rng_seed = opts->rng_seed;
        cfg.validate();
        require(opts->destination_half_size_m > 0.0, "destination half size must be positive");

        const std::string dest(destination_node);
        const auto crawl = sampler::crawl_start_point(g->graph, dest, cfg);
        const auto polygon = sampler::square_polygon(g->graph.point(dest), opts->destination_half_size_m);
        const std::string name = opts->destination_name != nullptr ? opts->destination_name : "node " + dest;
        const std::string city = opts->city != nullptr ? opts->city : "synthetic";
        const auto task = sampler::build_task(g->graph, crawl.start, name, polygon, city);
        *task_json = dup_string(sampler::task_to_json(task) + "\n");
    });
}

cn_status cn_run(const cn_graph* g, const cn_tasks* tasks, const char* policy, const char* config_path,
                 const char* out_dir, char** summary_json)
{
    return guarded([&] {
        require(g != nullptr && tasks != nullptr && policy != nullptr, "graph, tasks and policy must be non-null");
        const auto cfg = config_from(config_path);
        const std::optional<std::filesystem::path> dir =
            out_dir != nullptr ? std::optional<std::filesystem::path>(out_dir) : std::nullopt;
        const auto traces = runner::run_batch(g->graph, tasks->tasks, policy, cfg, dir);

        if (summary_json == nullptr)
            return;
        json rows = json::array();
        for (const auto& t: traces)
        {
            rows.push_back({
                {"task_id", t.task_id},
                {"status", env::to_string(t.final.status)},
                {"decisions", t.decisions.size()},
                {"traveled_m", t.final.traveled_m},
                {"aborted", t.final.aborted},
            });
        }
        *summary_json = dup_string(rows.dump(2) + "\n");
    });
}

cn_status cn_score(const cn_graph* g, const cn_tasks* tasks, const char* const* trace_paths, size_t count,
                   const char* config_path, char** report_json)
{
    return guarded([&] {
        require(g != nullptr && tasks != nullptr && report_json != nullptr, "graph, tasks and output must be non-null");
        require(trace_paths != nullptr || count == 0, "trace_paths is null but count is not zero");
        require(count > 0, "no traces to score");
        const auto cfg = config_from(config_path);
        const auto byId = index_tasks(tasks);

        std::vector<eval::EpisodeResult> results;
        for (size_t i = 0; i < count; ++i)
        {
            require(trace_paths[i] != nullptr, "trace path is null");
            const auto trace = env::read_trace_file(trace_paths[i]);
            results.push_back(eval::replay_and_verify(trace, g->graph, task_for(byId, trace), cfg.env));
        }
        *report_json = dup_string(eval::report_to_json(eval::aggregate(std::move(results))));
    });
}

cn_status cn_export_geojson(const cn_graph* g, const cn_tasks* tasks, const char* trace_path, char** geojson)
{
    return guarded([&] {
        require(g != nullptr && tasks != nullptr && trace_path != nullptr && geojson != nullptr,
                "graph, tasks, trace path and output must be non-null");
        const auto trace = env::read_trace_file(trace_path);
        const auto byId = index_tasks(tasks);
        *geojson = dup_string(eval::export_geojson(trace, g->graph, task_for(byId, trace)));
    });
}

} // extern "C"
