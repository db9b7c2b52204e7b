// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <citynav/geo.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace citynav::graph
{

using NodeId = std::string;
using NodeIndex = std::uint32_t;

struct Link
{
    NodeIndex to;
    double length_m;
};

/// Street graph with nodes stored in lexicographic NodeId order, so index
/// order doubles as the deterministic tie-break order everywhere.
///
/// Links are directed as recorded; `symmetrize` restores the undirected view.
class NavGraph
{
  public:
    class Builder
    {
      public:
        void add_node(NodeId id, geo::GeoPoint point);
        /// Length defaults to the haversine distance between the endpoints.
        void add_link(NodeId from, NodeId to, std::optional<double> length_m = std::nullopt);

        /// Throws IntegrityError on dangling references, self-loops, or non-positive lengths.
        [[nodiscard]] NavGraph build() &&;

      private:
        struct PendingLink
        {
            NodeId from;
            NodeId to;
            std::optional<double> length_m;
            std::size_t ordinal;
        };
        std::vector<std::pair<NodeId, geo::GeoPoint>> _nodes;
        std::vector<PendingLink> _links;
    };

    NavGraph() = default;

    [[nodiscard]] std::size_t node_count() const noexcept { return _ids.size(); }
    /// Directed link records.
    [[nodiscard]] std::size_t link_count() const noexcept;
    /// Unordered node pairs joined in at least one direction.
    [[nodiscard]] std::size_t edge_count() const noexcept;
    [[nodiscard]] bool empty() const noexcept { return _ids.empty(); }

    [[nodiscard]] std::optional<NodeIndex> find(std::string_view id) const;
    /// Throws InvalidArgument for unknown ids.
    [[nodiscard]] NodeIndex index_of(std::string_view id) const;
    [[nodiscard]] bool contains(std::string_view id) const { return find(id).has_value(); }

    [[nodiscard]] const NodeId& id(NodeIndex i) const { return _ids.at(i); }
    [[nodiscard]] const geo::GeoPoint& point(NodeIndex i) const { return _points.at(i); }
    [[nodiscard]] const geo::GeoPoint& point(std::string_view id) const { return point(index_of(id)); }

    /// Outgoing links sorted by target index.
    [[nodiscard]] std::span<const Link> links(NodeIndex i) const { return _adjacency.at(i); }
    [[nodiscard]] std::size_t degree(NodeIndex i) const { return _adjacency.at(i).size(); }
    [[nodiscard]] std::optional<double> link_length(NodeIndex from, NodeIndex to) const;
    [[nodiscard]] bool has_link(NodeIndex from, NodeIndex to) const { return link_length(from, to).has_value(); }
    [[nodiscard]] bool is_symmetric() const;

    [[nodiscard]] std::span<const NodeId> ids() const noexcept { return _ids; }

    /// Keeps the nodes flagged in `keep` and only links between kept nodes.
    [[nodiscard]] NavGraph subgraph(const std::vector<bool>& keep) const;

    friend bool operator==(const NavGraph& a, const NavGraph& b);

  private:
    friend class Builder;
    friend struct GraphMutator;

    std::vector<NodeId> _ids;
    std::vector<geo::GeoPoint> _points;
    std::vector<std::vector<Link>> _adjacency;
    std::unordered_map<std::string, NodeIndex> _index;
};

struct IsolatedComponent
{
    std::size_t size = 0;
    NodeId sample;

    friend bool operator==(const IsolatedComponent&, const IsolatedComponent&) = default;
};

/// Audit trail of the repair passes. Counts accumulate across passes.
struct GraphRepairReport
{
    std::size_t reverse_edges_added = 0;
    std::size_t dead_end_nodes_removed = 0;
    std::size_t long_jump_edges_removed = 0;
    std::vector<IsolatedComponent> isolated_components;

    friend bool operator==(const GraphRepairReport&, const GraphRepairReport&) = default;
};

struct RepairResult
{
    NavGraph graph;
    GraphRepairReport report;
};

inline constexpr double kDefaultMaxEdgeM = 100.0;

// Ingestion: one JSON object per line with a "kind" of "node" or "link".
RepairResult load_graph(std::string_view text);
RepairResult load_graph_file(const std::string& path);
void write_graph(const NavGraph& g, std::ostream& out);
void write_graph_file(const NavGraph& g, const std::string& path);

RepairResult symmetrize(const NavGraph& g, GraphRepairReport report = {});

/// Removes non-protected nodes of degree <= 1 until none remain.
RepairResult prune_dead_ends(const NavGraph& g, const std::set<NodeId>& protect, GraphRepairReport report = {});

/// Drops both directions of every edge strictly longer than `max_edge_m`.
RepairResult reject_long_jumps(const NavGraph& g, double max_edge_m = kDefaultMaxEdgeM,
                               GraphRepairReport report = {});

std::vector<IsolatedComponent> validate_connectivity(const NavGraph& g);

/// symmetrize -> reject_long_jumps -> prune_dead_ends, then connectivity audit.
RepairResult repair_graph(const NavGraph& g, const std::set<NodeId>& protect, double max_edge_m = kDefaultMaxEdgeM,
                          GraphRepairReport report = {});

struct PathResult
{
    double meters = 0.0;
    std::vector<NodeId> nodes;
};

/// Uniform-cost search to the nearest member of `targets`. Ties between equal
/// costs resolve toward the lexicographically smaller NodeId.
PathResult shortest_path(const NavGraph& g, std::string_view from, const std::set<NodeId>& targets);

/// Distance from every node to the nearest target along directed links
/// (infinity when unreachable).
std::vector<double> distances_to(const NavGraph& g, std::span<const NodeIndex> targets);

/// Heading of the street leaving `at` through `toward`, sighted up to three
/// nodes ahead while the street continues without branching.
double link_heading(const NavGraph& g, NodeIndex at, NodeIndex toward);
double link_heading(const NavGraph& g, std::string_view at, std::string_view toward);

} // namespace citynav::graph
