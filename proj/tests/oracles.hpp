#pragma once

// Independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "got/coupling.hpp"
#include "got/graph.hpp"
#include "got/random.hpp"

namespace oracle {

inline constexpr double inf = std::numeric_limits<double>::infinity();

// Shortest node-to-node length by enumerating every simple path.
inline double node_distance(const got::MetricGraph& g, got::NodeId a, got::NodeId b) {
    std::vector<char> seen(g.node_count(), 0);
    double best = inf;
    std::function<void(got::NodeId, double)> walk = [&](got::NodeId v, double len) {
        if (v == b) {
            best = std::min(best, len);
            return;
        }
        seen[v.value] = 1;
        for (auto e : g.incident(v)) {
            const auto& ed = g.edge(e);
            const got::NodeId w = ed.tail == v ? ed.head : ed.tail;
            if (!seen[w.value]) walk(w, len + ed.length);
        }
        seen[v.value] = 0;
    };
    walk(a, 0.0);
    return best;
}

// Leave each point through either end of its edge, or stay on a shared edge.
inline double point_distance(const got::MetricGraph& g, const got::GraphPoint& x, const got::GraphPoint& y) {
    const auto& ex = g.edge(x.edge);
    const auto& ey = g.edge(y.edge);
    double best = inf;
    if (x.edge == y.edge) best = std::abs(x.coord - y.coord);
    const std::pair<got::NodeId, double> xs[] = {{ex.tail, x.coord}, {ex.head, ex.length - x.coord}};
    const std::pair<got::NodeId, double> ys[] = {{ey.tail, y.coord}, {ey.head, ey.length - y.coord}};
    for (const auto& [u, du] : xs)
        for (const auto& [v, dv] : ys) best = std::min(best, du + node_distance(g, u, v) + dv);
    return best;
}

// Minimum over all permutations of a square cost matrix, uniform weights 1/n.
inline double permutation_ot(const got::CostMatrix& c) {
    const std::size_t n = c.rows();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = inf;
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += c(i, perm[i]);
        best = std::min(best, s / static_cast<double>(n));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Unit square cycle embedded in the plane.
inline got::MetricGraph square_loop() {
    got::MetricGraph g;
    const auto a = g.add_node("a");
    const auto b = g.add_node("b");
    const auto c = g.add_node("c");
    const auto d = g.add_node("d");
    g.add_edge("ab", a, b, 1.0, got::Polyline({got::make_point(0, 0), got::make_point(1, 0)}));
    g.add_edge("bc", b, c, 1.0, got::Polyline({got::make_point(1, 0), got::make_point(1, 1)}));
    g.add_edge("cd", c, d, 1.0, got::Polyline({got::make_point(1, 1), got::make_point(0, 1)}));
    g.add_edge("da", d, a, 1.0, got::Polyline({got::make_point(0, 1), got::make_point(0, 0)}));
    return g;
}

// Random connected graph: a spanning tree plus extra edges, no reversed duplicates.
inline got::MetricGraph random_graph(got::Rng& rng, std::size_t nodes, std::size_t extra_edges) {
    got::MetricGraph g;
    for (std::size_t i = 0; i < nodes; ++i) g.add_node("n" + std::to_string(i));
    std::vector<std::pair<std::size_t, std::size_t>> used;
    auto add = [&](std::size_t a, std::size_t b) {
        for (auto [u, v] : used)
            if ((u == a && v == b) || (u == b && v == a)) return;
        used.emplace_back(a, b);
        g.add_edge("e" + std::to_string(used.size()), got::NodeId{static_cast<std::uint32_t>(a)},
                   got::NodeId{static_cast<std::uint32_t>(b)}, 0.2 + rng.uniform());
    };
    for (std::size_t i = 1; i < nodes; ++i) add(rng.below(i), i);
    for (std::size_t k = 0; k < extra_edges; ++k) {
        const std::size_t a = rng.below(nodes);
        const std::size_t b = rng.below(nodes);
        if (a != b) add(a, b);
    }
    return g;
}

inline got::GraphPoint random_point(got::Rng& rng, const got::MetricGraph& g) {
    const got::EdgeId e{static_cast<std::uint32_t>(rng.below(g.edge_count()))};
    return {e, rng.uniform() * g.edge(e).length};
}

// W_p^p between two discrete measures on a line via the monotone (north-west corner) coupling.
inline double line_transport(std::vector<double> xs, std::vector<double> a, std::vector<double> ys,
                             std::vector<double> b, double p) {
    auto sort_by = [](std::vector<double>& pos, std::vector<double>& w) {
        std::vector<std::size_t> idx(pos.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return pos[i] < pos[j]; });
        std::vector<double> p2, w2;
        for (auto i : idx) {
            p2.push_back(pos[i]);
            w2.push_back(w[i]);
        }
        pos = p2;
        w = w2;
    };
    sort_by(xs, a);
    sort_by(ys, b);
    double cost = 0.0;
    std::size_t i = 0, j = 0;
    while (i < xs.size() && j < ys.size()) {
        const double m = std::min(a[i], b[j]);
        cost += m * std::pow(std::abs(xs[i] - ys[j]), p);
        a[i] -= m;
        b[j] -= m;
        if (a[i] <= 1e-15) ++i;
        if (j < ys.size() && b[j] <= 1e-15) ++j;
    }
    return cost;
}

}  // namespace oracle
