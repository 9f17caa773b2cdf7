#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "got/geometry.hpp"

namespace got {

struct NodeId {
    std::uint32_t value = 0;
    friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

struct EdgeId {
    std::uint32_t value = 0;
    friend constexpr auto operator<=>(EdgeId, EdgeId) = default;
};

// Raised for out-of-domain inputs (bad coordinates, mismatched shapes, disconnected edits).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Edge {
    std::string name;
    NodeId tail;
    NodeId head;
    double length = 0.0;
    std::optional<Polyline> embed;
};

class MetricGraph {
public:
    NodeId add_node(std::string name);
    EdgeId add_edge(std::string name, NodeId tail, NodeId head, double length,
                    std::optional<Polyline> embed = std::nullopt);

    std::size_t node_count() const { return node_names_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

    const Edge& edge(EdgeId e) const { return edges_.at(e.value); }
    std::span<const Edge> edges() const { return edges_; }
    const std::string& node_name(NodeId v) const { return node_names_.at(v.value); }
    std::span<const EdgeId> incident(NodeId v) const { return incidence_.at(v.value); }

    std::optional<NodeId> find_node(std::string_view name) const;
    std::optional<EdgeId> find_edge(std::string_view name) const;

    // -1 at the tail, +1 at the head, 0 when not incident. Self-loops are rejected upstream.
    int orientation(NodeId v, EdgeId e) const;

    bool has_embedding() const;
    double total_length() const;

    // Copy with the listed edges removed; nodes are kept. Surviving edges keep their relative order.
    struct Edit;
    Edit without_edges(std::span<const EdgeId> removed) const;

private:
    std::vector<std::string> node_names_;
    std::vector<Edge> edges_;
    std::vector<std::vector<EdgeId>> incidence_;
};

struct MetricGraph::Edit {
    MetricGraph graph;
    std::vector<std::optional<EdgeId>> edge_map;  // old edge -> new edge
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_graph(const MetricGraph& g);
bool is_connected(const MetricGraph& g);

struct GraphPoint {
    EdgeId edge;
    double coord = 0.0;
};

// Canonical key: points at an edge end collapse onto the node.
struct PointKey {
    bool at_node = false;
    std::uint32_t id = 0;  // NodeId or EdgeId value
    double coord = 0.0;    // zero for nodes
    friend constexpr auto operator<=>(const PointKey&, const PointKey&) = default;
};

PointKey canonical_key(const MetricGraph& g, const GraphPoint& p);
bool same_point(const MetricGraph& g, const GraphPoint& a, const GraphPoint& b);
GraphPoint point_at_node(const MetricGraph& g, NodeId v);
void check_point(const MetricGraph& g, const GraphPoint& p);

struct PathSegment {
    EdgeId edge;
    double from = 0.0;
    double to = 0.0;
};

struct GraphPath {
    std::vector<PathSegment> segments;
    double length = 0.0;

    std::vector<GraphPoint> waypoints() const;
    double recomputed_length() const;
};

double graph_distance(const MetricGraph& g, const GraphPoint& x, const GraphPoint& y);
GraphPath shortest_path(const MetricGraph& g, const GraphPoint& x, const GraphPoint& y);
std::size_t geodesic_multiplicity(const MetricGraph& g, const GraphPoint& x, const GraphPoint& y,
                                  double tol = 1e-9);

// All-pairs distances from each point in `from` to each point in `to` (row-major).
std::vector<double> distance_table(const MetricGraph& g, std::span<const GraphPoint> from,
                                   std::span<const GraphPoint> to);

// Embedded position of a graph point; throws DomainError without an embedding.
Point embed_point(const MetricGraph& g, const GraphPoint& p);

}  // namespace got
