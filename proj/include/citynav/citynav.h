/* SPDX-License-Identifier: Apache-2.0 */
#ifndef CITYNAV_CITYNAV_H
#define CITYNAV_CITYNAV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CN_API __declspec(dllexport)
#else
#define CN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values match the library's internal error codes one to one. */
typedef enum cn_status
{
    CN_OK = 0,
    CN_E_INVALID_ARGUMENT = 1,
    CN_E_DEGENERATE_BEARING,
    CN_E_UNSUPPORTED_REGION,
    CN_E_PARSE,
    CN_E_INTEGRITY,
    CN_E_PROTECTED_ISOLATION,
    CN_E_UNREACHABLE,
    CN_E_EMPTY_GRAPH,
    CN_E_TARGET_UNREACHABLE,
    CN_E_EMPTY_DESTINATION,
    CN_E_DEGENERATE_TASK,
    CN_E_INVALID_ACTION,
    CN_E_MALFORMED_RESPONSE,
    CN_E_SCHEMA_VIOLATION,
    CN_E_INVALID_DECISION,
    CN_E_CLIENT_UNAVAILABLE,
    CN_E_CONFIG,
    CN_E_PROVIDER,
    CN_E_STORAGE,
    CN_E_INVALID_TASK,
    CN_E_TRACE_MISMATCH,
    CN_E_REPLAY_DIVERGENCE,
    CN_E_IO,
    CN_E_INTERNAL = 100
} cn_status;

typedef struct cn_graph cn_graph;
typedef struct cn_tasks cn_tasks;

/* Message for the last failure on the calling thread; never NULL. */
CN_API const char* cn_last_error(void);
CN_API const char* cn_status_name(cn_status status);
CN_API const char* cn_version(void);

/* Frees strings handed out by this library. NULL is ignored. */
CN_API void cn_string_free(char* s);

/* trace | debug | info | warn | error | off */
CN_API cn_status cn_set_log_level(const char* level);

/* ---- graphs ---- */
CN_API cn_status cn_graph_load(const char* path, cn_graph** out);
CN_API cn_status cn_graph_save(const cn_graph* g, const char* path);
CN_API cn_status cn_graph_stats(const cn_graph* g, size_t* nodes, size_t* edges);
CN_API void cn_graph_free(cn_graph* g);

/* Square grid; spacing in meters. */
CN_API cn_status cn_graph_synth_grid(int rows, int cols, double spacing_m, cn_graph** out);

/* Grid with asymmetric links, dead-end chains and long jumps mixed in. */
CN_API cn_status cn_graph_synth_noisy(int rows, int cols, double spacing_m, uint64_t seed, cn_graph** out);

/* Symmetrize, drop long jumps, prune dead ends, then audit connectivity.
 * `protect` is an array of node ids that must survive (may be NULL when
 * count is 0). A max_edge_m of 0 selects the 100 m default. `report_json`
 * receives the repair report. */
CN_API cn_status cn_graph_repair(const cn_graph* g, const char* const* protect, size_t protect_count,
                                 double max_edge_m, cn_graph** out, char** report_json);

/* ---- tasks ---- */
CN_API cn_status cn_tasks_load(const char* path, cn_tasks** out);
CN_API cn_status cn_tasks_count(const cn_tasks* tasks, size_t* count);
CN_API void cn_tasks_free(cn_tasks* tasks);

typedef struct cn_sampler_options
{
    double d_target_m;
    double t_max;
    double t_min;
    double gamma;
    int d_min_final;
    int max_extra_steps;
    uint64_t rng_seed;
    /* Half the side of the square drawn around the destination node. */
    double destination_half_size_m;
    const char* destination_name; /* NULL: derived from the node id */
    const char* city;             /* NULL: "synthetic" */
} cn_sampler_options;

CN_API cn_sampler_options cn_sampler_options_default(void);

/* Crawls away from `destination_node` and builds one task whose origin is
 * the crawl's end. `task_json` receives a single JSONL line with newline. */
CN_API cn_status cn_sample_task(const cn_graph* g, const char* destination_node, const cn_sampler_options* opts,
                                char** task_json);

/* ---- episodes ---- */

/* Runs every task with policy agentnav | base | oracle | random. `config_path`
 * may be NULL for the built-in offline defaults. Traces are written to
 * out_dir/{task_id}.jsonl; `summary_json` lists per-task outcomes. */
CN_API cn_status cn_run(const cn_graph* g, const cn_tasks* tasks, const char* policy, const char* config_path,
                        const char* out_dir, char** summary_json);

/* Replays and scores trace files; `report_json` receives the metrics report. */
CN_API cn_status cn_score(const cn_graph* g, const cn_tasks* tasks, const char* const* trace_paths, size_t count,
                          const char* config_path, char** report_json);

CN_API cn_status cn_export_geojson(const cn_graph* g, const cn_tasks* tasks, const char* trace_path,
                                   char** geojson);

#ifdef __cplusplus
}
#endif

#endif
