#include "got/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <set>
#include <utility>

namespace got {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

NodeId MetricGraph::add_node(std::string name) {
    node_names_.push_back(std::move(name));
    incidence_.emplace_back();
    return NodeId{static_cast<std::uint32_t>(node_names_.size() - 1)};
}

EdgeId MetricGraph::add_edge(std::string name, NodeId tail, NodeId head, double length,
                             std::optional<Polyline> embed) {
    if (tail.value >= node_count() || head.value >= node_count())
        throw DomainError("edge '" + name + "' references an unknown node");
    const EdgeId id{static_cast<std::uint32_t>(edges_.size())};
    edges_.push_back(Edge{std::move(name), tail, head, length, std::move(embed)});
    incidence_[tail.value].push_back(id);
    if (head != tail) incidence_[head.value].push_back(id);
    return id;
}

std::optional<NodeId> MetricGraph::find_node(std::string_view name) const {
    for (std::size_t i = 0; i < node_names_.size(); ++i)
        if (node_names_[i] == name) return NodeId{static_cast<std::uint32_t>(i)};
    return std::nullopt;
}

std::optional<EdgeId> MetricGraph::find_edge(std::string_view name) const {
    for (std::size_t i = 0; i < edges_.size(); ++i)
        if (edges_[i].name == name) return EdgeId{static_cast<std::uint32_t>(i)};
    return std::nullopt;
}

int MetricGraph::orientation(NodeId v, EdgeId e) const {
    const Edge& ed = edge(e);
    if (ed.tail == v) return -1;
    if (ed.head == v) return +1;
    return 0;
}

bool MetricGraph::has_embedding() const {
    return !edges_.empty() &&
           std::all_of(edges_.begin(), edges_.end(), [](const Edge& e) { return e.embed.has_value(); });
}

double MetricGraph::total_length() const {
    double s = 0.0;
    for (const auto& e : edges_) s += e.length;
    return s;
}

MetricGraph::Edit MetricGraph::without_edges(std::span<const EdgeId> removed) const {
    Edit out;
    for (const auto& name : node_names_) out.graph.add_node(name);
    out.edge_map.assign(edges_.size(), std::nullopt);
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const EdgeId id{static_cast<std::uint32_t>(i)};
        if (std::find(removed.begin(), removed.end(), id) != removed.end()) continue;
        const Edge& e = edges_[i];
        out.edge_map[i] = out.graph.add_edge(e.name, e.tail, e.head, e.length, e.embed);
    }
    return out;
}

bool is_connected(const MetricGraph& g) {
    if (g.node_count() == 0) return true;
    std::vector<char> seen(g.node_count(), 0);
    std::vector<std::uint32_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const NodeId v{stack.back()};
        stack.pop_back();
        for (EdgeId e : g.incident(v)) {
            const Edge& ed = g.edge(e);
            const NodeId w = ed.tail == v ? ed.head : ed.tail;
            if (!seen[w.value]) {
                seen[w.value] = 1;
                stack.push_back(w.value);
            }
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

ValidationReport validate_graph(const MetricGraph& g) {
    ValidationReport report;
    const auto edges = g.edges();
    for (const auto& e : edges) {
        if (!(e.length > 0.0) || !std::isfinite(e.length))
            report.violations.push_back("non-positive length on edge '" + e.name + "'");
        if (e.tail == e.head) report.violations.push_back("self-loop on edge '" + e.name + "'");
        if (e.embed) {
            const double len = e.embed->length();
            if (std::abs(len - e.length) > 1e-9 * std::max(1.0, std::abs(e.length)))
                report.violations.push_back("embed length mismatch on edge '" + e.name + "'");
        }
    }
    for (std::size_t i = 0; i < edges.size(); ++i)
        for (std::size_t k = i + 1; k < edges.size(); ++k)
            if (edges[i].tail == edges[k].head && edges[i].head == edges[k].tail &&
                edges[i].tail != edges[i].head)
                report.violations.push_back("reversed duplicate: '" + edges[i].name + "' and '" +
                                            edges[k].name + "'");
    // Embedded edges meeting at a node must agree on its position.
    for (std::size_t v = 0; v < g.node_count(); ++v) {
        std::optional<Point> where;
        for (EdgeId e : g.incident(NodeId{static_cast<std::uint32_t>(v)})) {
            const Edge& ed = g.edge(e);
            if (!ed.embed || ed.embed->empty()) continue;
            const Point p = ed.tail.value == v ? ed.embed->front() : ed.embed->back();
            if (!where) {
                where = p;
            } else if (distance(*where, p) > 1e-9) {
                report.violations.push_back("embeds disagree at node '" +
                                            g.node_name(NodeId{static_cast<std::uint32_t>(v)}) + "'");
                break;
            }
        }
    }
    if (!is_connected(g)) report.violations.push_back("not connected");
    return report;
}

void check_point(const MetricGraph& g, const GraphPoint& p) {
    if (p.edge.value >= g.edge_count()) throw DomainError("graph point on unknown edge");
    const double len = g.edge(p.edge).length;
    if (!(p.coord >= 0.0 && p.coord <= len))
        throw DomainError("graph point coordinate " + std::to_string(p.coord) + " outside [0, " +
                          std::to_string(len) + "] on edge '" + g.edge(p.edge).name + "'");
}

PointKey canonical_key(const MetricGraph& g, const GraphPoint& p) {
    check_point(g, p);
    const Edge& e = g.edge(p.edge);
    if (p.coord == 0.0) return {true, e.tail.value, 0.0};
    if (p.coord == e.length) return {true, e.head.value, 0.0};
    return {false, p.edge.value, p.coord};
}

bool same_point(const MetricGraph& g, const GraphPoint& a, const GraphPoint& b) {
    return canonical_key(g, a) == canonical_key(g, b);
}

GraphPoint point_at_node(const MetricGraph& g, NodeId v) {
    const auto inc = g.incident(v);
    if (inc.empty()) throw DomainError("isolated node '" + g.node_name(v) + "'");
    const EdgeId e = *std::min_element(inc.begin(), inc.end());
    return {e, g.edge(e).tail == v ? 0.0 : g.edge(e).length};
}

std::vector<GraphPoint> GraphPath::waypoints() const {
    std::vector<GraphPoint> out;
    if (segments.empty()) return out;
    out.push_back({segments.front().edge, segments.front().from});
    for (const auto& s : segments) out.push_back({s.edge, s.to});
    return out;
}

double GraphPath::recomputed_length() const {
    double s = 0.0;
    for (const auto& seg : segments) s += std::abs(seg.to - seg.from);
    return s;
}

Point embed_point(const MetricGraph& g, const GraphPoint& p) {
    check_point(g, p);
    const Edge& e = g.edge(p.edge);
    if (!e.embed) throw DomainError("edge '" + e.name + "' has no embedding");
    return e.embed->at(p.coord / e.length * e.embed->length());
}

namespace {

struct Arc {
    std::uint32_t to;
    double length;
    EdgeId edge;
    double from_coord;
    double to_coord;
};

// Graph nodes plus the query points, with the edges carrying them split at the query coordinates.
struct AuxGraph {
    std::vector<std::vector<Arc>> adj;
    std::uint32_t source = 0;
    std::uint32_t target = 0;
};

AuxGraph build_aux(const MetricGraph& g, const GraphPoint& x, const std::optional<GraphPoint>& y) {
    const auto n = static_cast<std::uint32_t>(g.node_count());
    AuxGraph aux;
    aux.adj.resize(n);

    auto vertex_for = [&](const GraphPoint& p, std::uint32_t fresh) -> std::uint32_t {
        const PointKey k = canonical_key(g, p);
        if (k.at_node) return k.id;
        return fresh;
    };
    aux.source = vertex_for(x, n);
    if (aux.source == n) aux.adj.emplace_back();
    if (y) {
        if (same_point(g, x, *y)) {
            aux.target = aux.source;
        } else {
            const auto fresh = static_cast<std::uint32_t>(aux.adj.size());
            aux.target = vertex_for(*y, fresh);
            if (aux.target == fresh) aux.adj.emplace_back();
        }
    }

    for (std::uint32_t ei = 0; ei < g.edge_count(); ++ei) {
        const EdgeId id{ei};
        const Edge& e = g.edge(id);
        std::vector<std::pair<double, std::uint32_t>> stops{{0.0, e.tail.value}, {e.length, e.head.value}};
        auto add_stop = [&](const GraphPoint& p, std::uint32_t v) {
            if (p.edge == id && p.coord > 0.0 && p.coord < e.length &&
                std::none_of(stops.begin(), stops.end(), [&](const auto& s) { return s.second == v; }))
                stops.emplace_back(p.coord, v);
        };
        add_stop(x, aux.source);
        if (y) add_stop(*y, aux.target);
        std::sort(stops.begin(), stops.end());
        for (std::size_t k = 1; k < stops.size(); ++k) {
            const auto [c0, a] = stops[k - 1];
            const auto [c1, b] = stops[k];
            aux.adj[a].push_back({b, c1 - c0, id, c0, c1});
            aux.adj[b].push_back({a, c1 - c0, id, c1, c0});
        }
    }
    return aux;
}

std::vector<double> dijkstra(const AuxGraph& aux, std::uint32_t root) {
    std::vector<double> dist(aux.adj.size(), kInf);
    using Item = std::pair<double, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[root] = 0.0;
    pq.push({0.0, root});
    while (!pq.empty()) {
        const auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        for (const Arc& a : aux.adj[u]) {
            const double nd = d + a.length;
            if (nd < dist[a.to]) {
                dist[a.to] = nd;
                pq.push({nd, a.to});
            }
        }
    }
    return dist;
}

}  // namespace

double graph_distance(const MetricGraph& g, const GraphPoint& x, const GraphPoint& y) {
    check_point(g, x);
    check_point(g, y);
    if (same_point(g, x, y)) return 0.0;
    if (canonical_key(g, y) < canonical_key(g, x)) return graph_distance(g, y, x);
    const AuxGraph aux = build_aux(g, x, y);
    return dijkstra(aux, aux.source)[aux.target];
}

GraphPath shortest_path(const MetricGraph& g, const GraphPoint& x, const GraphPoint& y) {
    check_point(g, x);
    check_point(g, y);
    GraphPath path;
    if (same_point(g, x, y)) return path;
    const AuxGraph aux = build_aux(g, x, y);
    const std::vector<double> to_target = dijkstra(aux, aux.target);
    if (!std::isfinite(to_target[aux.source])) throw DomainError("points are not connected");
    const double tol = 1e-12 * (1.0 + to_target[aux.source]);

    std::uint32_t u = aux.source;
    while (u != aux.target) {
        const Arc* best = nullptr;
        for (const Arc& a : aux.adj[u]) {
            if (std::abs(to_target[u] - (a.length + to_target[a.to])) > tol) continue;
            if (!(to_target[a.to] < to_target[u])) continue;
            if (!best || a.edge < best->edge || (a.edge == best->edge && a.to < best->to)) best = &a;
        }
        if (!best) throw std::logic_error("shortest path reconstruction failed");
        if (!path.segments.empty() && path.segments.back().edge == best->edge &&
            path.segments.back().to == best->from_coord)
            path.segments.back().to = best->to_coord;
        else
            path.segments.push_back({best->edge, best->from_coord, best->to_coord});
        u = best->to;
    }
    path.length = to_target[aux.source];
    return path;
}

std::size_t geodesic_multiplicity(const MetricGraph& g, const GraphPoint& x, const GraphPoint& y,
                                  double tol) {
    check_point(g, x);
    check_point(g, y);
    if (same_point(g, x, y)) return 1;
    const AuxGraph aux = build_aux(g, x, y);
    const double best = dijkstra(aux, aux.source)[aux.target];
    const double bound = best + tol;

    std::vector<char> on_path(aux.adj.size(), 0);
    std::size_t count = 0;
    std::function<void(std::uint32_t, double)> dfs = [&](std::uint32_t u, double len) {
        if (u == aux.target) {
            ++count;
            return;
        }
        on_path[u] = 1;
        for (const Arc& a : aux.adj[u])
            if (!on_path[a.to] && len + a.length <= bound) dfs(a.to, len + a.length);
        on_path[u] = 0;
    };
    dfs(aux.source, 0.0);
    return std::max<std::size_t>(count, 1);
}

std::vector<double> distance_table(const MetricGraph& g, std::span<const GraphPoint> from,
                                   std::span<const GraphPoint> to) {
    std::vector<double> out(from.size() * to.size(), 0.0);
    for (std::size_t i = 0; i < from.size(); ++i) {
        const AuxGraph aux = build_aux(g, from[i], std::nullopt);
        const std::vector<double> dist = dijkstra(aux, aux.source);
        const PointKey kx = canonical_key(g, from[i]);
        for (std::size_t j = 0; j < to.size(); ++j) {
            const GraphPoint& y = to[j];
            const PointKey ky = canonical_key(g, y);
            double d;
            if (ky == kx) {
                d = 0.0;
            } else if (ky.at_node) {
                d = dist[ky.id];
            } else {
                const Edge& e = g.edge(y.edge);
                d = std::min(dist[e.tail.value] + y.coord, dist[e.head.value] + (e.length - y.coord));
                if (!kx.at_node && from[i].edge == y.edge) d = std::min(d, std::abs(from[i].coord - y.coord));
            }
            out[i * to.size() + j] = d;
        }
    }
    return out;
}

}  // namespace got
