#include "got/static_ot.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "got/random.hpp"

namespace got {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows * cols) throw DomainError("cost matrix size mismatch");
}

double CostMatrix::max_finite() const {
    double m = 0.0;
    for (double v : values_)
        if (std::isfinite(v)) m = std::max(m, std::abs(v));
    return m;
}

CostMatrix build_cost_matrix(const DiscreteMeasure& src, const DiscreteMeasure& dst, const GroundCost& cost,
                             double p) {
    if (!(p >= 1.0)) throw DomainError("exponent p must be at least 1");
    if (src.kind() != dst.kind()) throw DomainError("source and target atoms are of different kinds");
    const std::size_t m = src.size();
    const std::size_t n = dst.size();
    auto powered = [p](std::vector<double> d) {
        for (auto& v : d) v = std::isfinite(v) ? std::pow(v, p) : kInfinity;
        return d;
    };
    return std::visit(
        [&](const auto& model) -> CostMatrix {
            using T = std::decay_t<decltype(model)>;
            if constexpr (std::is_same_v<T, GraphGroundCost>) {
                if (src.kind() != MeasureKind::graph) throw DomainError("graph cost needs graph-supported atoms");
                return CostMatrix(m, n, powered(distance_table(*model.graph, src.graph_points(), dst.graph_points())));
            } else if constexpr (std::is_same_v<T, TubeGroundCost>) {
                if (src.kind() != MeasureKind::ambient) throw DomainError("tube cost needs ambient atoms");
                return CostMatrix(m, n, tube_cost_table(*model.tube, src.ambient_points(), dst.ambient_points(), p));
            } else {
                if (src.kind() != MeasureKind::ambient) throw DomainError("Euclidean cost needs ambient atoms");
                std::vector<double> d(m * n);
                const auto xs = src.ambient_points();
                const auto ys = dst.ambient_points();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = distance(xs[i], ys[j]);
                return CostMatrix(m, n, powered(std::move(d)));
            }
        },
        cost);
}

namespace {

double sentinel_for(const CostMatrix& c) { return 1e12 * std::max(1.0, c.max_finite()); }

void check_feasible_pattern(const CostMatrix& c, std::span<const double> a, std::span<const double> b) {
    for (std::size_t i = 0; i < c.rows(); ++i) {
        if (!(a[i] > 0.0)) continue;
        bool any = false;
        for (std::size_t j = 0; j < c.cols() && !any; ++j) any = std::isfinite(c(i, j)) && b[j] > 0.0;
        if (!any) throw InfeasibleError("source atom " + std::to_string(i) + " has no finite-cost target");
    }
    for (std::size_t j = 0; j < c.cols(); ++j) {
        if (!(b[j] > 0.0)) continue;
        bool any = false;
        for (std::size_t i = 0; i < c.rows() && !any; ++i) any = std::isfinite(c(i, j)) && a[i] > 0.0;
        if (!any) throw InfeasibleError("target atom " + std::to_string(j) + " has no finite-cost source");
    }
}

// Successive shortest paths with node potentials on the bipartite transportation network.
struct TransportSolver {
    const CostMatrix& cost;
    double big;
    std::size_t m, n;
    std::vector<double> supply, demand;
    std::vector<double> flow;  // m x n
    std::vector<double> pot;   // sources then sinks

    double c(std::size_t i, std::size_t j) const {
        const double v = cost(i, j);
        return std::isfinite(v) ? v : big;
    }

    void run() {
        const std::size_t V = m + n;
        pot.assign(V, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            double lo = kInfinity;
            for (std::size_t i = 0; i < m; ++i) lo = std::min(lo, c(i, j));
            pot[m + j] = lo;
        }
        double remaining = std::accumulate(supply.begin(), supply.end(), 0.0);
        const double stop = 1e-14 * std::max(1.0, remaining);
        std::vector<double> dist(V);
        std::vector<std::size_t> prev(V);
        std::vector<char> done(V);
        const std::size_t none = V;

        for (std::size_t guard = 0; remaining > stop; ++guard) {
            if (guard > 100 * (V + 1) * (V + 1)) throw std::runtime_error("transport solver failed to converge");
            std::fill(dist.begin(), dist.end(), kInfinity);
            std::fill(prev.begin(), prev.end(), none);
            std::fill(done.begin(), done.end(), 0);
            for (std::size_t i = 0; i < m; ++i)
                if (supply[i] > stop * 1e-3) dist[i] = 0.0;
            std::size_t target = none;
            for (;;) {
                std::size_t u = none;
                for (std::size_t v = 0; v < V; ++v)
                    if (!done[v] && std::isfinite(dist[v]) && (u == none || dist[v] < dist[u])) u = v;
                if (u == none) break;
                done[u] = 1;
                if (u >= m && demand[u - m] > stop * 1e-3) {
                    target = u;
                    break;
                }
                if (u < m) {
                    for (std::size_t j = 0; j < n; ++j) {
                        const std::size_t v = m + j;
                        if (done[v]) continue;
                        const double nd = dist[u] + std::max(0.0, c(u, j) + pot[u] - pot[v]);
                        if (nd < dist[v]) {
                            dist[v] = nd;
                            prev[v] = u;
                        }
                    }
                } else {
                    const std::size_t j = u - m;
                    for (std::size_t i = 0; i < m; ++i) {
                        if (done[i] || !(flow[i * n + j] > 0.0)) continue;
                        const double nd = dist[u] + std::max(0.0, -c(i, j) + pot[u] - pot[i]);
                        if (nd < dist[i]) {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
            if (target == none) throw std::runtime_error("transport solver: no augmenting path");
            const double dt = dist[target];
            for (std::size_t v = 0; v < V; ++v) pot[v] += std::min(dist[v], dt);

            // Bottleneck along the path.
            std::size_t v = target;
            double delta = demand[target - m];
            while (prev[v] != none) {
                const std::size_t u = prev[v];
                if (u >= m) delta = std::min(delta, flow[v * n + (u - m)]);
                v = u;
            }
            delta = std::min(delta, supply[v]);
            for (std::size_t w = target; prev[w] != none; w = prev[w]) {
                const std::size_t u = prev[w];
                if (u < m) {
                    flow[u * n + (w - m)] += delta;
                } else {
                    double& f = flow[w * n + (u - m)];
                    f -= delta;
                    if (f < 1e-18) f = 0.0;
                }
            }
            supply[v] -= delta;
            demand[target - m] -= delta;
            remaining -= delta;
        }
    }
};

OtSolution finish(const CostMatrix& c, std::span<const double> a, std::span<const double> b,
                  std::vector<PlanEntry> entries, std::vector<double> phi, std::vector<double> psi) {
    OtSolution s;
    for (const auto& e : entries)
        if (!std::isfinite(c(e.source, e.target)) && e.mass > 1e-12)
            throw InfeasibleError("no finite-cost plan: source atom " + std::to_string(e.source) +
                                  " is forced onto forbidden target atom " + std::to_string(e.target));
    double primal = 0.0;
    for (const auto& e : entries) primal += e.mass * c(e.source, e.target);
    double dual = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dual += a[i] * phi[i];
    for (std::size_t j = 0; j < b.size(); ++j) dual += b[j] * psi[j];
    s.plan.entries = std::move(entries);
    s.plan.value = primal;
    s.certificate = DualCertificate{std::move(phi), std::move(psi), primal, dual, primal - dual};
    return s;
}

bool uniform(std::span<const double> w) {
    return std::all_of(w.begin(), w.end(), [&](double v) { return v == w.front(); });
}

}  // namespace

Assignment solve_assignment(const CostMatrix& cm) {
    const std::size_t n = cm.rows();
    if (cm.cols() != n) throw DomainError("assignment needs a square cost matrix");
    const double big = sentinel_for(cm);
    auto c = [&](std::size_t i, std::size_t j) {
        const double v = cm(i - 1, j - 1);
        return std::isfinite(v) ? v : big;
    };
    // Shortest augmenting paths, 1-based with a virtual column 0.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), kInfinity);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = kInfinity;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = c(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Assignment out;
    out.column_of_row.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) out.column_of_row[match[j] - 1] = j - 1;
    out.row_potential.assign(u.begin() + 1, u.end());
    out.col_potential.assign(v.begin() + 1, v.end());
    for (std::size_t i = 0; i < n; ++i) out.cost += cm(i, out.column_of_row[i]);
    return out;
}

OtSolution solve_ot(const CostMatrix& c, std::span<const double> a, std::span<const double> b) {
    if (a.size() != c.rows() || b.size() != c.cols()) throw DomainError("cost matrix does not match marginals");
    for (double v : c.values())
        if (std::isnan(v)) throw DomainError("cost matrix contains NaN");
    const double ma = std::accumulate(a.begin(), a.end(), 0.0);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0);
    if (std::abs(ma - mb) > 1e-9 * std::max(1.0, ma)) throw DomainError("marginals have different total mass");
    check_feasible_pattern(c, a, b);

    const std::size_t m = c.rows();
    const std::size_t n = c.cols();
    if (m == n && uniform(a) && uniform(b) && a.front() > 0.0) {
        const Assignment asg = solve_assignment(c);
        std::vector<PlanEntry> entries;
        for (std::size_t i = 0; i < m; ++i) entries.push_back({i, asg.column_of_row[i], a[i]});
        // Both marginals carry weight 1/n, so assignment potentials are transport potentials.
        OtSolution s = finish(c, a, b, std::move(entries), asg.row_potential, asg.col_potential);
        s.used_assignment = true;
        return s;
    }

    TransportSolver solver{c, sentinel_for(c), m, n, {}, {}, std::vector<double>(m * n, 0.0), {}};
    solver.supply.assign(a.begin(), a.end());
    solver.demand.assign(b.begin(), b.end());
    for (auto& d : solver.demand) d *= ma / mb;
    solver.run();

    std::vector<PlanEntry> entries;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (solver.flow[i * n + j] > 0.0) entries.push_back({i, j, solver.flow[i * n + j]});
    std::vector<double> phi(m), psi(n);
    for (std::size_t i = 0; i < m; ++i) phi[i] = -solver.pot[i];
    for (std::size_t j = 0; j < n; ++j) psi[j] = solver.pot[m + j];
    return finish(c, a, b, std::move(entries), std::move(phi), std::move(psi));
}

OtSolution solve_ot(const CostMatrix& c, const DiscreteMeasure& src, const DiscreteMeasure& dst) {
    return solve_ot(c, src.weights(), dst.weights());
}

double wasserstein_p(const MetricGraph& g, const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
    const CostMatrix c = build_cost_matrix(mu, nu, GraphGroundCost{&g}, p);
    const double v = solve_ot(c, mu, nu).plan.value;
    return std::pow(std::max(0.0, v), 1.0 / p);
}

SlacknessReport complementary_slackness(const CostMatrix& c, const OtSolution& s, double mass_threshold,
                                        double tol) {
    SlacknessReport r;
    const auto& phi = s.certificate.phi;
    const auto& psi = s.certificate.psi;
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j) {
            if (!std::isfinite(c(i, j))) continue;
            const double excess = phi[i] + psi[j] - c(i, j);
            r.worst = std::max(r.worst, excess);
            if (excess > tol) ++r.violations;
        }
    for (const auto& e : s.plan.entries) {
        if (!(e.mass > mass_threshold)) continue;
        const double slack = std::abs(phi[e.source] + psi[e.target] - c(e.source, e.target));
        r.worst = std::max(r.worst, slack);
        if (slack > tol) ++r.violations;
    }
    return r;
}

MonotonicityReport check_cyclical_monotonicity(const Coupling& plan, const CostMatrix& c, std::size_t max_cycle,
                                               std::size_t trials, double delta, std::uint64_t seed,
                                               double mass_threshold) {
    std::vector<std::size_t> support;
    for (std::size_t k = 0; k < plan.entries.size(); ++k)
        if (plan.entries[k].mass > mass_threshold) support.push_back(k);
    MonotonicityReport rep;
    const std::size_t s = support.size();
    const std::size_t longest = std::min(max_cycle, s);

    std::vector<std::size_t> cycle;
    auto evaluate = [&]() {
        double lhs = 0.0;
        double rhs = 0.0;
        for (std::size_t k = 0; k < cycle.size(); ++k) {
            const auto& cur = plan.entries[support[cycle[k]]];
            const auto& nxt = plan.entries[support[cycle[(k + 1) % cycle.size()]]];
            lhs += c(cur.source, cur.target);
            rhs += c(cur.source, nxt.target);
        }
        const double margin = (lhs - rhs) / static_cast<double>(cycle.size());
        ++rep.cycles_checked;
        if (rep.cycles_checked == 1 || margin > rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst_cycle.clear();
            for (auto k : cycle) rep.worst_cycle.push_back(support[k]);
        }
        if (lhs > rhs + delta) ++rep.violations;
    };

    if (s <= 8) {
        rep.exhaustive = true;
        std::vector<char> used(s, 0);
        // Cycles are enumerated with their smallest member first.
        std::function<void()> extend = [&]() {
            if (cycle.size() >= 1) evaluate();
            if (cycle.size() == longest) return;
            for (std::size_t k = cycle.front() + 1; k < s; ++k) {
                if (used[k]) continue;
                used[k] = 1;
                cycle.push_back(k);
                extend();
                cycle.pop_back();
                used[k] = 0;
            }
        };
        for (std::size_t first = 0; first < s; ++first) {
            used[first] = 1;
            cycle.assign(1, first);
            extend();
            used[first] = 0;
        }
    } else {
        Rng rng(seed);
        for (std::size_t t = 0; t < trials; ++t) {
            const std::size_t len = 2 + rng.below(std::max<std::size_t>(1, longest - 1));
            std::vector<std::size_t> pool(s);
            std::iota(pool.begin(), pool.end(), 0);
            cycle.clear();
            for (std::size_t k = 0; k < len; ++k) {
                const std::size_t pick = k + rng.below(s - k);
                std::swap(pool[k], pool[pick]);
                cycle.push_back(pool[k]);
            }
            evaluate();
        }
    }
    return rep;
}

EditedGraph apply_edit(const MetricGraph& g, const GraphEdit& edit) {
    std::vector<EdgeId> removed;
    for (const auto& name : edit.remove) {
        const auto e = g.find_edge(name);
        if (!e) throw DomainError("edit removes unknown edge '" + name + "'");
        removed.push_back(*e);
    }
    auto cut = g.without_edges(removed);
    for (const auto& ne : edit.add) {
        const auto t = cut.graph.find_node(ne.tail);
        const auto h = cut.graph.find_node(ne.head);
        if (!t || !h) throw DomainError("added edge '" + ne.name + "' references an unknown node");
        if (!(ne.length > 0.0)) throw DomainError("added edge '" + ne.name + "' needs a positive length");
        cut.graph.add_edge(ne.name, *t, *h, ne.length);
    }
    if (!is_connected(cut.graph)) {
        std::string names;
        for (const auto& n : edit.remove) names += (names.empty() ? "'" : ", '") + n + "'";
        throw DomainError("removing edge " + names + " disconnects the network");
    }
    return {std::move(cut.graph), std::move(cut.edge_map)};
}

StabilityResult stability_experiment(const MetricGraph& g, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     const GraphEdit& edit, double p) {
    const EditedGraph edited = apply_edit(g, edit);
    auto remap = [&](const DiscreteMeasure& m, const char* label) {
        std::vector<GraphPoint> pts;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const GraphPoint& x = m.graph_points()[i];
            const auto e = edited.edge_map.at(x.edge.value);
            if (!e) {
                const PointKey k = canonical_key(g, x);
                if (!k.at_node)
                    throw DomainError(std::string(label) + " atom " + std::to_string(i) + " lies on removed edge '" +
                                      g.edge(x.edge).name + "'");
                pts.push_back(point_at_node(edited.graph, NodeId{k.id}));
            } else {
                pts.push_back({*e, x.coord});
            }
        }
        return DiscreteMeasure::on_graph(std::move(pts), {m.weights().begin(), m.weights().end()});
    };
    const DiscreteMeasure mu2 = remap(mu, "source");
    const DiscreteMeasure nu2 = remap(nu, "target");

    StabilityResult r;
    r.cost_before = build_cost_matrix(mu, nu, GraphGroundCost{&g}, p);
    r.cost_after = build_cost_matrix(mu2, nu2, GraphGroundCost{&edited.graph}, p);
    r.before = solve_ot(r.cost_before, mu, nu);
    r.after = solve_ot(r.cost_after, mu2, nu2);
    r.ot_before = r.before.plan.value;
    r.ot_after = r.after.plan.value;

    auto witness = [&](const Coupling& plan) {
        double s = 0.0;
        for (const auto& e : plan.entries)
            s += e.mass * std::abs(r.cost_after(e.source, e.target) - r.cost_before(e.source, e.target));
        return s;
    };
    r.bound_pi = std::max(witness(r.before.plan), witness(r.after.plan));
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = 0; j < nu.size(); ++j)
            r.bound_inf = std::max(r.bound_inf, std::abs(r.cost_after(i, j) - r.cost_before(i, j)));
    const double delta = std::abs(r.ot_after - r.ot_before);
    r.bounds_hold = delta <= r.bound_pi + 1e-8 && r.bound_pi <= r.bound_inf + 1e-8;
    return r;
}

}  // namespace got
