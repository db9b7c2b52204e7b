// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Talks to the library only through citynav.h.
#include <citynav/citynav.h>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace
{

struct Failure
{
    int exit_code;
};

void check(cn_status s)
{
    if (s != CN_OK)
    {
        std::cerr << "citynav: " << cn_last_error() << "\n";
        throw Failure {static_cast<int>(s)};
    }
}

struct GraphHandle
{
    cn_graph* ptr = nullptr;
    ~GraphHandle() { cn_graph_free(ptr); }
};

struct TasksHandle
{
    cn_tasks* ptr = nullptr;
    ~TasksHandle() { cn_tasks_free(ptr); }
};

struct OwnedString
{
    char* ptr = nullptr;
    ~OwnedString() { cn_string_free(ptr); }
};

void emit(const std::string& text, const std::string& path)
{
    if (path.empty() || path == "-")
    {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out)
    {
        std::cerr << "citynav: cannot write " << path << "\n";
        throw Failure {static_cast<int>(CN_E_IO)};
    }
}

std::vector<std::string> expand_traces(const std::vector<std::string>& inputs)
{
    std::vector<std::string> files;
    for (const auto& in: inputs)
    {
        if (fs::is_directory(in))
        {
            std::vector<std::string> found;
            for (const auto& entry: fs::directory_iterator(in))
            {
                if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
                    found.push_back(entry.path().string());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        }
        else
        {
            files.push_back(in);
        }
    }
    return files;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app {"City navigation graphs, tasks, episodes and metrics"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cn_version()));
    std::string logLevel = "warn";
    app.add_option("--log-level", logLevel, "trace|debug|info|warn|error|off")->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic grid city");
    int rows = 20;
    int cols = 20;
    double spacing = 100.0;
    bool noisy = false;
    std::uint64_t noiseSeed = 1;
    std::string synthOut;
    synth->add_option("--rows", rows)->capture_default_str();
    synth->add_option("--cols", cols)->capture_default_str();
    synth->add_option("--spacing", spacing, "meters between neighbours")->capture_default_str();
    synth->add_flag("--noisy", noisy, "add asymmetric links, dead ends and long jumps");
    synth->add_option("--noise-seed", noiseSeed)->capture_default_str();
    synth->add_option("--out", synthOut)->required();

    // repair
    auto* repair = app.add_subcommand("repair", "Symmetrize, drop long jumps, prune dead ends");
    std::string repairGraph;
    std::string repairOut;
    std::string repairReport;
    std::vector<std::string> protectIds;
    double maxEdge = 100.0;
    repair->add_option("--graph", repairGraph)->required()->check(CLI::ExistingFile);
    repair->add_option("--out", repairOut)->required();
    repair->add_option("--report", repairReport, "repair report (JSON); stdout if omitted");
    repair->add_option("--protect", protectIds, "node ids that must survive pruning");
    repair->add_option("--max-edge", maxEdge, "meters")->capture_default_str();

    // sample
    auto* sample = app.add_subcommand("sample", "Sample tasks by crawling away from a destination node");
    cn_sampler_options sopts = cn_sampler_options_default();
    std::string sampleGraph;
    std::string seedNode;
    std::string sampleOut;
    std::string destName;
    std::string city;
    int count = 1;
    sample->add_option("--graph", sampleGraph)->required()->check(CLI::ExistingFile);
    sample->add_option("--seed-node", seedNode, "destination node the crawl starts from")->required();
    sample->add_option("--d-target", sopts.d_target_m, "meters")->capture_default_str();
    sample->add_option("--rng-seed", sopts.rng_seed)->capture_default_str();
    sample->add_option("--t-max", sopts.t_max)->capture_default_str();
    sample->add_option("--t-min", sopts.t_min)->capture_default_str();
    sample->add_option("--gamma", sopts.gamma)->capture_default_str();
    sample->add_option("--d-min-final", sopts.d_min_final)->capture_default_str();
    sample->add_option("--max-extra-steps", sopts.max_extra_steps)->capture_default_str();
    sample->add_option("--destination-half-size", sopts.destination_half_size_m, "meters")->capture_default_str();
    sample->add_option("--destination-name", destName);
    sample->add_option("--city", city);
    sample->add_option("--count", count, "tasks to draw, seeds rng-seed, rng-seed+1, ...")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sample->add_option("--out", sampleOut)->required();

    // run
    auto* run = app.add_subcommand("run", "Run a policy on every task and write traces");
    std::string runGraph;
    std::string runTasks;
    std::string policy = "agentnav";
    std::string configPath;
    std::string outDir;
    run->add_option("--graph", runGraph)->required()->check(CLI::ExistingFile);
    run->add_option("--tasks", runTasks)->required()->check(CLI::ExistingFile);
    run->add_option("--policy", policy)
        ->check(CLI::IsMember({"agentnav", "base", "oracle", "random"}))
        ->capture_default_str();
    run->add_option("--config", configPath, "JSON run config")->check(CLI::ExistingFile);
    run->add_option("--out-dir", outDir)->required();

    // score
    auto* score = app.add_subcommand("score", "Replay traces and compute Success, SPL and D.A.");
    std::vector<std::string> traceInputs;
    std::string scoreGraph;
    std::string scoreTasks;
    std::string reportPath;
    std::string scoreConfig;
    score->add_option("--traces", traceInputs, "trace files or directories")->required();
    score->add_option("--graph", scoreGraph)->required()->check(CLI::ExistingFile);
    score->add_option("--tasks", scoreTasks)->required()->check(CLI::ExistingFile);
    score->add_option("--report", reportPath, "report file; stdout if omitted");
    score->add_option("--config", scoreConfig, "run config used for the traces")->check(CLI::ExistingFile);

    // export
    auto* exportCmd = app.add_subcommand("export", "Render one trace for map viewers");
    std::string exportTrace;
    std::string format = "geojson";
    std::string exportGraph;
    std::string exportTasks;
    std::string exportOut;
    exportCmd->add_option("--trace", exportTrace)->required()->check(CLI::ExistingFile);
    exportCmd->add_option("--format", format)->check(CLI::IsMember({"geojson"}))->capture_default_str();
    exportCmd->add_option("--graph", exportGraph)->required()->check(CLI::ExistingFile);
    exportCmd->add_option("--tasks", exportTasks)->required()->check(CLI::ExistingFile);
    exportCmd->add_option("--out", exportOut, "output file; stdout if omitted");

    CLI11_PARSE(app, argc, argv);

    try
    {
        check(cn_set_log_level(logLevel.c_str()));

        if (*synth)
        {
            GraphHandle g;
            if (noisy)
                check(cn_graph_synth_noisy(rows, cols, spacing, noiseSeed, &g.ptr));
            else
                check(cn_graph_synth_grid(rows, cols, spacing, &g.ptr));
            check(cn_graph_save(g.ptr, synthOut.c_str()));
        }
        else if (*repair)
        {
            GraphHandle in;
            GraphHandle out;
            OwnedString report;
            check(cn_graph_load(repairGraph.c_str(), &in.ptr));
            std::vector<const char*> ids;
            for (const auto& id: protectIds)
                ids.push_back(id.c_str());
            check(cn_graph_repair(in.ptr, ids.data(), ids.size(), maxEdge, &out.ptr, &report.ptr));
            check(cn_graph_save(out.ptr, repairOut.c_str()));
            emit(report.ptr, repairReport);
        }
        else if (*sample)
        {
            GraphHandle g;
            check(cn_graph_load(sampleGraph.c_str(), &g.ptr));
            sopts.destination_name = destName.empty() ? nullptr : destName.c_str();
            sopts.city = city.empty() ? nullptr : city.c_str();
            // Different seeds can land on the same origin; keep drawing until
            // `count` distinct tasks are found or the attempt budget runs out.
            std::string lines;
            std::set<std::string> seen;
            const std::uint64_t base = sopts.rng_seed;
            const int maxAttempts = 20 * count;
            for (int i = 0; i < maxAttempts && static_cast<int>(seen.size()) < count; ++i)
            {
                sopts.rng_seed = base + static_cast<std::uint64_t>(i);
                OwnedString line;
                check(cn_sample_task(g.ptr, seedNode.c_str(), &sopts, &line.ptr));
                if (seen.insert(line.ptr).second)
                    lines += line.ptr;
            }
            if (static_cast<int>(seen.size()) < count)
                std::cerr << "citynav: only " << seen.size() << " distinct tasks found after " << maxAttempts
                          << " seeds\n";
            emit(lines, sampleOut);
        }
        else if (*run)
        {
            GraphHandle g;
            TasksHandle t;
            OwnedString summary;
            check(cn_graph_load(runGraph.c_str(), &g.ptr));
            check(cn_tasks_load(runTasks.c_str(), &t.ptr));
            check(cn_run(g.ptr, t.ptr, policy.c_str(), configPath.empty() ? nullptr : configPath.c_str(),
                         outDir.c_str(), &summary.ptr));
            std::cout << summary.ptr;
        }
        else if (*score)
        {
            GraphHandle g;
            TasksHandle t;
            OwnedString report;
            check(cn_graph_load(scoreGraph.c_str(), &g.ptr));
            check(cn_tasks_load(scoreTasks.c_str(), &t.ptr));
            const auto files = expand_traces(traceInputs);
            std::vector<const char*> paths;
            for (const auto& f: files)
                paths.push_back(f.c_str());
            check(cn_score(g.ptr, t.ptr, paths.data(), paths.size(), scoreConfig.empty() ? nullptr : scoreConfig.c_str(),
                           &report.ptr));
            emit(report.ptr, reportPath);
        }
        else if (*exportCmd)
        {
            GraphHandle g;
            TasksHandle t;
            OwnedString doc;
            check(cn_graph_load(exportGraph.c_str(), &g.ptr));
            check(cn_tasks_load(exportTasks.c_str(), &t.ptr));
            check(cn_export_geojson(g.ptr, t.ptr, exportTrace.c_str(), &doc.ptr));
            emit(doc.ptr, exportOut);
        }
    }
    catch (const Failure& f)
    {
        return f.exit_code;
    }
    return 0;
}
