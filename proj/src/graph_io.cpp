// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>
#include <citynav/graph.hpp>

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace citynav::graph
{

using nlohmann::json;

namespace
{

[[noreturn]] void parse_fail(std::size_t line, const std::string& what)
{
    fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

const json& require(const json& record, const char* key, std::size_t line)
{
    const auto it = record.find(key);
    if (it == record.end())
        parse_fail(line, std::string("missing field '") + key + "'");
    return *it;
}

std::string require_string(const json& record, const char* key, std::size_t line)
{
    const auto& v = require(record, key, line);
    if (!v.is_string())
        parse_fail(line, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

double require_number(const json& record, const char* key, std::size_t line)
{
    const auto& v = require(record, key, line);
    if (!v.is_number())
        parse_fail(line, std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

} // namespace

RepairResult load_graph(std::string_view text)
{
    NavGraph::Builder builder;
    std::istringstream in {std::string(text)};
    std::string raw;
    std::size_t lineNo = 0;
    while (std::getline(in, raw))
    {
        ++lineNo;
        if (raw.find_first_not_of(" \t\r") == std::string::npos)
            continue;

        json record;
        try
        {
            record = json::parse(raw);
        }
        catch (const json::parse_error& e)
        {
            parse_fail(lineNo, e.what());
        }
        if (!record.is_object())
            parse_fail(lineNo, "record must be a JSON object");

        const auto kind = require_string(record, "kind", lineNo);
        if (kind == "node")
        {
            auto id = require_string(record, "id", lineNo);
            const double lat = require_number(record, "lat", lineNo);
            const double lon = require_number(record, "lon", lineNo);
            try
            {
                builder.add_node(std::move(id), geo::GeoPoint(lat, lon));
            }
            catch (const Error& e)
            {
                parse_fail(lineNo, e.what());
            }
        }
        else if (kind == "link")
        {
            auto from = require_string(record, "from_id", lineNo);
            auto to = require_string(record, "to_id", lineNo);
            std::optional<double> length;
            if (record.contains("length_m"))
                length = require_number(record, "length_m", lineNo);
            builder.add_link(std::move(from), std::move(to), length);
        }
        else
        {
            parse_fail(lineNo, "unknown record kind '" + kind + "'");
        }
    }
    return {std::move(builder).build(), GraphRepairReport {}};
}

RepairResult load_graph_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoError, "cannot open graph file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_graph(buf.str());
}

void write_graph(const NavGraph& g, std::ostream& out)
{
    for (NodeIndex i = 0; i < g.node_count(); ++i)
    {
        const auto& p = g.point(i);
        out << json {{"kind", "node"}, {"id", g.id(i)}, {"lat", p.lat()}, {"lon", p.lon()}}.dump() << '\n';
    }
    for (NodeIndex i = 0; i < g.node_count(); ++i)
    {
        for (const auto& l: g.links(i))
        {
            json record {{"kind", "link"}, {"from_id", g.id(i)}, {"to_id", g.id(l.to)}};
            // Only persist lengths that differ from the coordinate-derived default.
            if (l.length_m != geo::haversine_distance(g.point(i), g.point(l.to)))
                record["length_m"] = l.length_m;
            out << record.dump() << '\n';
        }
    }
}

void write_graph_file(const NavGraph& g, const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorCode::IoError, "cannot write graph file '" + path + "'");
    write_graph(g, out);
}

} // namespace citynav::graph
