// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>
#include <citynav/trace.hpp>

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace citynav::env
{

using nlohmann::json;

std::vector<graph::NodeId> EpisodeTrace::node_sequence() const
{
    std::vector<graph::NodeId> nodes = start_path;
    for (const auto& d: decisions)
        nodes.insert(nodes.end(), d.path.begin(), d.path.end());
    return nodes;
}

std::vector<OptionRecord> record_options(const Observation& obs)
{
    std::vector<OptionRecord> out;
    out.reserve(obs.options.size());
    for (const auto& o: obs.options)
        out.push_back({o.option_id, o.toward, o.heading, std::string(geo::to_string(o.compass))});
    return out;
}

std::string trace_to_jsonl(const EpisodeTrace& t)
{
    std::ostringstream out;
    out << json {
        {"kind", "start"},
        {"task_id", t.task_id},
        {"city", t.city},
        {"policy", t.policy},
        {"origin", t.origin},
        {"path", t.start_path},
        {"node_transitions_used", t.start_transitions},
        {"traveled_m", t.start_traveled_m},
    }.dump() << '\n';

    for (const auto& d: t.decisions)
    {
        json options = json::array();
        for (const auto& o: d.options)
            options.push_back({{"option_id", o.option_id}, {"toward", o.toward}, {"heading", o.heading}, {"compass", o.compass}});
        out << json {
            {"kind", "decision"},
            {"step_index", d.step_index},
            {"node", d.node},
            {"options", std::move(options)},
            {"chosen", d.chosen},
            {"memory_after", d.memory_after},
            {"analysis", d.analysis},
            {"position_estimate", d.position_estimate},
            {"self_positioned", d.self_positioned},
            {"fallback", d.fallback},
            {"retries", d.retries},
            {"path", d.path},
            {"node_transitions_used", d.node_transitions_used},
            {"traveled_m", d.traveled_m},
        }.dump() << '\n';
    }

    json fin {
        {"kind", "final"},
        {"status", std::string(to_string(t.final.status))},
        {"decision_points_used", t.final.decision_points_used},
        {"node_transitions_used", t.final.node_transitions_used},
        {"traveled_m", t.final.traveled_m},
        {"aborted", t.final.aborted},
    };
    if (t.final.aborted)
        fin["abort_reason"] = t.final.abort_reason;
    out << fin.dump() << '\n';
    return out.str();
}

EpisodeTrace trace_from_jsonl(std::string_view text)
{
    EpisodeTrace t;
    bool sawStart = false;
    bool sawFinal = false;
    std::istringstream in {std::string(text)};
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try
        {
            const auto j = json::parse(line);
            const auto kind = j.at("kind").get<std::string>();
            if (kind == "start")
            {
                t.task_id = j.at("task_id").get<std::string>();
                t.city = j.value("city", "");
                t.policy = j.value("policy", "");
                t.origin = j.at("origin").get<std::string>();
                t.start_path = j.at("path").get<std::vector<std::string>>();
                t.start_transitions = j.at("node_transitions_used").get<int>();
                t.start_traveled_m = j.at("traveled_m").get<double>();
                sawStart = true;
            }
            else if (kind == "decision")
            {
                DecisionRecord d;
                d.step_index = j.at("step_index").get<int>();
                d.node = j.at("node").get<std::string>();
                for (const auto& o: j.at("options"))
                    d.options.push_back({o.at("option_id").get<std::string>(), o.at("toward").get<std::string>(),
                                         o.at("heading").get<double>(), o.at("compass").get<std::string>()});
                d.chosen = j.at("chosen").get<std::string>();
                d.memory_after = j.value("memory_after", "");
                d.analysis = j.value("analysis", "");
                d.position_estimate = j.value("position_estimate", "");
                d.self_positioned = j.value("self_positioned", false);
                d.fallback = j.value("fallback", false);
                d.retries = j.value("retries", 0);
                d.path = j.at("path").get<std::vector<std::string>>();
                d.node_transitions_used = j.at("node_transitions_used").get<int>();
                d.traveled_m = j.at("traveled_m").get<double>();
                t.decisions.push_back(std::move(d));
            }
            else if (kind == "final")
            {
                t.final.status = status_from_string(j.at("status").get<std::string>());
                t.final.decision_points_used = j.at("decision_points_used").get<int>();
                t.final.node_transitions_used = j.at("node_transitions_used").get<int>();
                t.final.traveled_m = j.at("traveled_m").get<double>();
                t.final.aborted = j.value("aborted", false);
                t.final.abort_reason = j.value("abort_reason", "");
                sawFinal = true;
            }
            else
            {
                fail(ErrorCode::ParseError, "unknown trace record kind '" + kind + "'");
            }
        }
        catch (const json::exception& e)
        {
            fail(ErrorCode::ParseError, "trace line " + std::to_string(lineNo) + ": " + e.what());
        }
    }
    if (!sawStart || !sawFinal)
        fail(ErrorCode::ParseError, "trace needs both a start and a final record");
    return t;
}

void write_trace_file(const EpisodeTrace& trace, const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorCode::IoError, "cannot write trace file '" + path + "'");
    out << trace_to_jsonl(trace);
}

EpisodeTrace read_trace_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoError, "cannot open trace file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return trace_from_jsonl(buf.str());
}

} // namespace citynav::env
