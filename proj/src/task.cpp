// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>
#include <citynav/sampler.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace citynav::sampler
{

using nlohmann::json;

std::string derive_task_id(const std::string& city, const graph::NodeId& origin, const std::string& name)
{
    // FNV-1a over the unit-separated fields.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::string_view s) {
        for (const unsigned char ch: s)
        {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    };
    mix(city);
    mix("\x1f");
    mix(origin);
    mix("\x1f");
    mix(name);

    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string("task-") + buf;
}

geo::GeoPolygon square_polygon(const geo::GeoPoint& centre, double half_size_m)
{
    if (!(half_size_m > 0.0))
        fail(ErrorCode::InvalidArgument, "half size must be positive");
    const double dLat = half_size_m / (geo::kEarthRadiusM * std::numbers::pi / 180.0);
    const double dLon = dLat / std::cos(centre.lat() * std::numbers::pi / 180.0);
    return geo::GeoPolygon({
        {centre.lat() - dLat, centre.lon() - dLon},
        {centre.lat() + dLat, centre.lon() - dLon},
        {centre.lat() + dLat, centre.lon() + dLon},
        {centre.lat() - dLat, centre.lon() + dLon},
    });
}

NavTask build_task(const graph::NavGraph& g, const graph::NodeId& start, const std::string& name,
                   const geo::GeoPolygon& polygon, const std::string& city)
{
    const auto startIndex = g.index_of(start);
    std::set<graph::NodeId> inside;
    for (graph::NodeIndex i = 0; i < g.node_count(); ++i)
    {
        if (geo::point_in_polygon(g.point(i), polygon))
            inside.insert(g.id(i));
    }
    if (inside.empty())
        fail(ErrorCode::EmptyDestination, "no graph node lies inside the destination polygon of '" + name + "'");
    if (inside.contains(g.id(startIndex)))
        fail(ErrorCode::DegenerateTask, "start node '" + start + "' lies inside the destination polygon");

    return NavTask {
        .task_id = derive_task_id(city, start, name),
        .city = city,
        .origin = start,
        .destination_name = name,
        .destination_polygon = polygon,
        .destination_nodes = std::move(inside),
    };
}

void validate_task(const graph::NavGraph& g, const NavTask& task)
{
    if (!g.contains(task.origin))
        fail(ErrorCode::DegenerateTask, "task " + task.task_id + ": origin '" + task.origin + "' is not in the graph");
    if (task.destination_nodes.empty())
        fail(ErrorCode::EmptyDestination, "task " + task.task_id + " has no destination nodes");
    for (const auto& id: task.destination_nodes)
    {
        if (!g.contains(id))
            fail(ErrorCode::DegenerateTask, "task " + task.task_id + ": destination node '" + id + "' is not in the graph");
    }
    if (task.destination_nodes.contains(task.origin))
        fail(ErrorCode::DegenerateTask, "task " + task.task_id + ": origin lies inside the destination");
}

namespace
{

json task_json(const NavTask& task)
{
    json polygon = json::array();
    for (const auto& v: task.destination_polygon.vertices())
        polygon.push_back({v.lat(), v.lon()});
    return json {
        {"task_id", task.task_id},
        {"city", task.city},
        {"origin", task.origin},
        {"destination_name", task.destination_name},
        {"destination_polygon", std::move(polygon)},
        {"destination_nodes", task.destination_nodes},
    };
}

NavTask parse_task(const json& j)
{
    try
    {
        std::vector<geo::GeoPoint> vertices;
        for (const auto& v: j.at("destination_polygon"))
        {
            if (!v.is_array() || v.size() != 2)
                fail(ErrorCode::ParseError, "polygon vertices must be [lat, lon] pairs");
            vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
        }
        // Accept rings that repeat the first vertex at the end.
        if (vertices.size() > 3 && vertices.front() == vertices.back())
            vertices.pop_back();

        return NavTask {
            .task_id = j.at("task_id").get<std::string>(),
            .city = j.at("city").get<std::string>(),
            .origin = j.at("origin").get<std::string>(),
            .destination_name = j.at("destination_name").get<std::string>(),
            .destination_polygon = geo::GeoPolygon(std::move(vertices)),
            .destination_nodes = j.at("destination_nodes").get<std::set<std::string>>(),
        };
    }
    catch (const json::exception& e)
    {
        fail(ErrorCode::ParseError, std::string("task record: ") + e.what());
    }
    catch (const Error& e)
    {
        if (e.code() == ErrorCode::ParseError)
            throw;
        fail(ErrorCode::ParseError, std::string("task record: ") + e.what());
    }
}

} // namespace

std::string task_to_json(const NavTask& task)
{
    return task_json(task).dump();
}

NavTask task_from_json(const std::string& line)
{
    json j;
    try
    {
        j = json::parse(line);
    }
    catch (const json::parse_error& e)
    {
        fail(ErrorCode::ParseError, e.what());
    }
    return parse_task(j);
}

std::vector<NavTask> load_tasks(std::string_view text)
{
    std::vector<NavTask> tasks;
    std::set<std::string> ids;
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
            tasks.push_back(task_from_json(line));
        }
        catch (const Error& e)
        {
            fail(ErrorCode::ParseError, "line " + std::to_string(lineNo) + ": " + e.what());
        }
        // Traces are keyed by task id, so a repeat would overwrite its twin.
        if (!ids.insert(tasks.back().task_id).second)
            fail(ErrorCode::ParseError,
                 "line " + std::to_string(lineNo) + ": duplicate task_id '" + tasks.back().task_id + "'");
    }
    return tasks;
}

std::vector<NavTask> load_tasks_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoError, "cannot open task file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_tasks(buf.str());
}

void write_tasks(std::span<const NavTask> tasks, std::ostream& out)
{
    for (const auto& t: tasks)
        out << task_to_json(t) << '\n';
}

void write_tasks_file(std::span<const NavTask> tasks, const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorCode::IoError, "cannot write task file '" + path + "'");
    write_tasks(tasks, out);
}

} // namespace citynav::sampler
