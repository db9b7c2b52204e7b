// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>
#include <citynav/graph.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

namespace citynav::graph
{

// Internal access for the repair passes, which assemble graphs directly.
struct GraphMutator
{
    static std::vector<std::vector<Link>>& adjacency(NavGraph& g) { return g._adjacency; }
};

void NavGraph::Builder::add_node(NodeId id, geo::GeoPoint point)
{
    if (id.empty())
        fail(ErrorCode::IntegrityError, "node id must be non-empty");
    _nodes.emplace_back(std::move(id), point);
}

void NavGraph::Builder::add_link(NodeId from, NodeId to, std::optional<double> length_m)
{
    _links.push_back({std::move(from), std::move(to), length_m, _links.size()});
}

NavGraph NavGraph::Builder::build() &&
{
    NavGraph g;
    std::sort(_nodes.begin(), _nodes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i + 1 < _nodes.size(); ++i)
    {
        if (_nodes[i].first == _nodes[i + 1].first)
            fail(ErrorCode::IntegrityError, "duplicate node id '" + _nodes[i].first + "'");
    }

    g._ids.reserve(_nodes.size());
    g._points.reserve(_nodes.size());
    for (auto& [id, point]: _nodes)
    {
        g._index.emplace(id, static_cast<NodeIndex>(g._ids.size()));
        g._ids.push_back(std::move(id));
        g._points.push_back(point);
    }
    g._adjacency.resize(g._ids.size());

    for (const auto& link: _links)
    {
        const auto from = g.find(link.from);
        const auto to = g.find(link.to);
        if (!from || !to)
            fail(ErrorCode::IntegrityError, "link " + std::to_string(link.ordinal) + " references undefined node '"
                                                + (from ? link.to : link.from) + "'");
        if (*from == *to)
            fail(ErrorCode::IntegrityError, "self-loop on node '" + link.from + "'");

        const double length = link.length_m.value_or(geo::haversine_distance(g._points[*from], g._points[*to]));
        if (!(length > 0.0) || !std::isfinite(length))
            fail(ErrorCode::IntegrityError,
                 "link " + link.from + " -> " + link.to + " has non-positive length " + std::to_string(length));

        auto& out = g._adjacency[*from];
        const auto pos =
            std::lower_bound(out.begin(), out.end(), *to, [](const Link& l, NodeIndex target) { return l.to < target; });
        // Repeated records keep the first occurrence.
        if (pos == out.end() || pos->to != *to)
            out.insert(pos, Link {*to, length});
    }
    return g;
}

std::size_t NavGraph::link_count() const noexcept
{
    std::size_t n = 0;
    for (const auto& out: _adjacency)
        n += out.size();
    return n;
}

std::size_t NavGraph::edge_count() const noexcept
{
    std::size_t n = 0;
    for (NodeIndex a = 0; a < _adjacency.size(); ++a)
    {
        for (const auto& l: _adjacency[a])
        {
            // Count each unordered pair once: from the smaller end, or from the
            // larger end when the reverse record is missing.
            if (a < l.to || !has_link(l.to, a))
                ++n;
        }
    }
    return n;
}

std::optional<NodeIndex> NavGraph::find(std::string_view id) const
{
    const auto it = _index.find(std::string(id));
    if (it == _index.end())
        return std::nullopt;
    return it->second;
}

NodeIndex NavGraph::index_of(std::string_view id) const
{
    const auto idx = find(id);
    if (!idx)
        fail(ErrorCode::InvalidArgument, "unknown node '" + std::string(id) + "'");
    return *idx;
}

std::optional<double> NavGraph::link_length(NodeIndex from, NodeIndex to) const
{
    const auto& out = _adjacency.at(from);
    const auto pos =
        std::lower_bound(out.begin(), out.end(), to, [](const Link& l, NodeIndex target) { return l.to < target; });
    if (pos == out.end() || pos->to != to)
        return std::nullopt;
    return pos->length_m;
}

bool NavGraph::is_symmetric() const
{
    for (NodeIndex a = 0; a < _adjacency.size(); ++a)
    {
        for (const auto& l: _adjacency[a])
        {
            if (!has_link(l.to, a))
                return false;
        }
    }
    return true;
}

NavGraph NavGraph::subgraph(const std::vector<bool>& keep) const
{
    NavGraph g;
    std::vector<NodeIndex> remap(_ids.size(), std::numeric_limits<NodeIndex>::max());
    for (NodeIndex i = 0; i < _ids.size(); ++i)
    {
        if (!keep.at(i))
            continue;
        remap[i] = static_cast<NodeIndex>(g._ids.size());
        g._index.emplace(_ids[i], remap[i]);
        g._ids.push_back(_ids[i]);
        g._points.push_back(_points[i]);
    }
    g._adjacency.resize(g._ids.size());
    for (NodeIndex i = 0; i < _ids.size(); ++i)
    {
        if (!keep[i])
            continue;
        auto& out = g._adjacency[remap[i]];
        for (const auto& l: _adjacency[i])
        {
            // Remapping preserves relative order, so `out` stays sorted.
            if (keep[l.to])
                out.push_back({remap[l.to], l.length_m});
        }
    }
    return g;
}

bool operator==(const NavGraph& a, const NavGraph& b)
{
    if (a._ids != b._ids || a._points != b._points || a._adjacency.size() != b._adjacency.size())
        return false;
    for (std::size_t i = 0; i < a._adjacency.size(); ++i)
    {
        const auto& la = a._adjacency[i];
        const auto& lb = b._adjacency[i];
        if (la.size() != lb.size())
            return false;
        for (std::size_t k = 0; k < la.size(); ++k)
        {
            if (la[k].to != lb[k].to || la[k].length_m != lb[k].length_m)
                return false;
        }
    }
    return true;
}

RepairResult symmetrize(const NavGraph& g, GraphRepairReport report)
{
    NavGraph out = g;
    auto& adj = GraphMutator::adjacency(out);
    std::size_t added = 0;
    for (NodeIndex a = 0; a < g.node_count(); ++a)
    {
        for (const auto& l: g.links(a))
        {
            if (g.has_link(l.to, a))
                continue;
            auto& rev = adj[l.to];
            const auto pos =
                std::lower_bound(rev.begin(), rev.end(), a, [](const Link& x, NodeIndex t) { return x.to < t; });
            rev.insert(pos, Link {a, l.length_m});
            ++added;
        }
    }
    report.reverse_edges_added += added;
    return {std::move(out), std::move(report)};
}

RepairResult prune_dead_ends(const NavGraph& g, const std::set<NodeId>& protect, GraphRepairReport report)
{
    const std::size_t n = g.node_count();
    std::vector<bool> isProtected(n, false);
    for (const auto& id: protect)
    {
        const auto idx = g.find(id);
        if (!idx)
            fail(ErrorCode::IntegrityError, "protected node '" + id + "' is not in the graph");
        isProtected[*idx] = true;
    }

    std::vector<std::size_t> degree(n);
    for (NodeIndex i = 0; i < n; ++i)
        degree[i] = g.degree(i);

    std::vector<bool> keep(n, true);
    std::vector<NodeIndex> queue;
    for (NodeIndex i = 0; i < n; ++i)
    {
        if (!isProtected[i] && degree[i] <= 1)
            queue.push_back(i);
    }

    std::size_t removed = 0;
    while (!queue.empty())
    {
        const NodeIndex v = queue.back();
        queue.pop_back();
        if (!keep[v])
            continue;
        keep[v] = false;
        ++removed;
        for (const auto& l: g.links(v))
        {
            if (!keep[l.to])
                continue;
            --degree[l.to];
            if (!isProtected[l.to] && degree[l.to] <= 1)
                queue.push_back(l.to);
        }
    }

    for (NodeIndex i = 0; i < n; ++i)
    {
        if (isProtected[i] && g.degree(i) > 0 && degree[i] == 0)
            fail(ErrorCode::ProtectedIsolation,
                 "pruning dead ends would leave protected node '" + g.id(i) + "' without neighbors");
    }

    report.dead_end_nodes_removed += removed;
    if (removed == 0)
        return {g, std::move(report)};
    return {g.subgraph(keep), std::move(report)};
}

RepairResult reject_long_jumps(const NavGraph& g, double max_edge_m, GraphRepairReport report)
{
    if (!(max_edge_m > 0.0))
        fail(ErrorCode::InvalidArgument, "max_edge_m must be positive");

    NavGraph out = g;
    auto& adj = GraphMutator::adjacency(out);
    std::size_t removed = 0;
    for (NodeIndex a = 0; a < g.node_count(); ++a)
    {
        for (const auto& l: g.links(a))
        {
            const auto reverse = g.link_length(l.to, a);
            const bool tooLong = l.length_m > max_edge_m || (reverse && *reverse > max_edge_m);
            if (tooLong && (a < l.to || !reverse))
                ++removed;
        }
    }
    for (NodeIndex a = 0; a < g.node_count(); ++a)
    {
        std::erase_if(adj[a], [&](const Link& l) {
            const auto reverse = g.link_length(l.to, a);
            return l.length_m > max_edge_m || (reverse && *reverse > max_edge_m);
        });
    }
    report.long_jump_edges_removed += removed;
    return {std::move(out), std::move(report)};
}

std::vector<IsolatedComponent> validate_connectivity(const NavGraph& g)
{
    if (g.empty())
        fail(ErrorCode::EmptyGraph, "graph has no nodes");

    const std::size_t n = g.node_count();
    // Undirected view: include reverse directions of one-way records.
    std::vector<std::vector<NodeIndex>> undirected(n);
    for (NodeIndex a = 0; a < n; ++a)
    {
        for (const auto& l: g.links(a))
        {
            undirected[a].push_back(l.to);
            undirected[l.to].push_back(a);
        }
    }

    struct Component
    {
        std::size_t size;
        NodeIndex root;
    };
    std::vector<Component> components;
    std::vector<bool> seen(n, false);
    for (NodeIndex start = 0; start < n; ++start)
    {
        if (seen[start])
            continue;
        std::size_t size = 0;
        std::vector<NodeIndex> stack {start};
        seen[start] = true;
        while (!stack.empty())
        {
            const NodeIndex v = stack.back();
            stack.pop_back();
            ++size;
            for (const NodeIndex w: undirected[v])
            {
                if (!seen[w])
                {
                    seen[w] = true;
                    stack.push_back(w);
                }
            }
        }
        // Roots are the smallest index reached, i.e. the lexicographically smallest id.
        components.push_back({size, start});
    }

    // Largest component is kept; among equal sizes the larger root wins.
    const auto main = std::max_element(components.begin(), components.end(), [](const auto& a, const auto& b) {
        return std::tie(a.size, a.root) < std::tie(b.size, b.root);
    });
    const NodeIndex mainRoot = main->root;

    std::vector<Component> isolated;
    for (const auto& c: components)
    {
        if (c.root != mainRoot)
            isolated.push_back(c);
    }
    std::sort(isolated.begin(), isolated.end(), [](const auto& a, const auto& b) {
        return a.size != b.size ? a.size > b.size : a.root < b.root;
    });

    std::vector<IsolatedComponent> out;
    out.reserve(isolated.size());
    for (const auto& c: isolated)
        out.push_back({c.size, g.id(c.root)});
    return out;
}

RepairResult repair_graph(const NavGraph& g, const std::set<NodeId>& protect, double max_edge_m,
                          GraphRepairReport report)
{
    auto sym = symmetrize(g, std::move(report));
    auto trimmed = reject_long_jumps(sym.graph, max_edge_m, std::move(sym.report));
    auto pruned = prune_dead_ends(trimmed.graph, protect, std::move(trimmed.report));
    if (!pruned.graph.empty())
        pruned.report.isolated_components = validate_connectivity(pruned.graph);
    else
        pruned.report.isolated_components.clear();
    return pruned;
}

namespace
{

struct QueueEntry
{
    double dist;
    NodeIndex node;

    bool operator>(const QueueEntry& o) const { return dist != o.dist ? dist > o.dist : node > o.node; }
};

using MinQueue = std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr NodeIndex kNone = std::numeric_limits<NodeIndex>::max();

} // namespace

PathResult shortest_path(const NavGraph& g, std::string_view from, const std::set<NodeId>& targets)
{
    if (targets.empty())
        fail(ErrorCode::InvalidArgument, "shortest_path needs at least one target");
    const NodeIndex source = g.index_of(from);
    std::vector<bool> isTarget(g.node_count(), false);
    for (const auto& t: targets)
        isTarget[g.index_of(t)] = true;

    std::vector<double> dist(g.node_count(), kInf);
    std::vector<NodeIndex> pred(g.node_count(), kNone);
    std::vector<bool> settled(g.node_count(), false);
    MinQueue queue;
    dist[source] = 0.0;
    queue.push({0.0, source});

    while (!queue.empty())
    {
        const auto [d, v] = queue.top();
        queue.pop();
        if (settled[v])
            continue;
        settled[v] = true;

        if (isTarget[v])
        {
            PathResult result;
            result.meters = d;
            for (NodeIndex cur = v; cur != kNone; cur = pred[cur])
                result.nodes.push_back(g.id(cur));
            std::reverse(result.nodes.begin(), result.nodes.end());
            return result;
        }

        for (const auto& l: g.links(v))
        {
            const double nd = d + l.length_m;
            if (nd < dist[l.to])
            {
                dist[l.to] = nd;
                pred[l.to] = v;
                queue.push({nd, l.to});
            }
            else if (nd == dist[l.to] && !settled[l.to] && v < pred[l.to])
            {
                pred[l.to] = v;
            }
        }
    }
    fail(ErrorCode::Unreachable, "no target reachable from '" + std::string(from) + "'");
}

std::vector<double> distances_to(const NavGraph& g, std::span<const NodeIndex> targets)
{
    const std::size_t n = g.node_count();
    std::vector<std::vector<Link>> reverse(n);
    for (NodeIndex a = 0; a < n; ++a)
    {
        for (const auto& l: g.links(a))
            reverse[l.to].push_back({a, l.length_m});
    }

    std::vector<double> dist(n, kInf);
    MinQueue queue;
    for (const NodeIndex t: targets)
    {
        dist.at(t) = 0.0;
        queue.push({0.0, t});
    }
    while (!queue.empty())
    {
        const auto [d, v] = queue.top();
        queue.pop();
        if (d > dist[v])
            continue;
        for (const auto& l: reverse[v])
        {
            const double nd = d + l.length_m;
            if (nd < dist[l.to])
            {
                dist[l.to] = nd;
                queue.push({nd, l.to});
            }
        }
    }
    return dist;
}

double link_heading(const NavGraph& g, NodeIndex at, NodeIndex toward)
{
    if (!g.has_link(at, toward))
        fail(ErrorCode::InvalidArgument, "'" + g.id(toward) + "' is not adjacent to '" + g.id(at) + "'");

    constexpr int kMaxHops = 3;
    NodeIndex prev = at;
    NodeIndex cur = toward;
    for (int hops = 1; hops < kMaxHops; ++hops)
    {
        NodeIndex onward = kNone;
        int count = 0;
        for (const auto& l: g.links(cur))
        {
            if (l.to != prev)
            {
                onward = l.to;
                ++count;
            }
        }
        if (count != 1 || onward == at)
            break;
        prev = cur;
        cur = onward;
    }

    try
    {
        return geo::initial_bearing(g.point(at), g.point(cur));
    }
    catch (const Error&)
    {
        return geo::initial_bearing(g.point(at), g.point(toward));
    }
}

double link_heading(const NavGraph& g, std::string_view at, std::string_view toward)
{
    return link_heading(g, g.index_of(at), g.index_of(toward));
}

} // namespace citynav::graph
