#include <algorithm>
#include <cmath>

#include "got/coupling.hpp"
#include "got/dynamic_ot.hpp"

namespace got {

double perspective_h(double a, double b, double p) {
    if (b > 0.0) return std::pow(std::abs(a), p) / std::pow(b, p - 1.0);
    if (b == 0.0 && a == 0.0) return 0.0;
    return kInfinity;
}

DynamicGrid::DynamicGrid(const MetricGraph& g, std::vector<int> cells_per_edge)
    : graph_(g), cells_(std::move(cells_per_edge)) {
    if (cells_.size() != g.edge_count()) throw DomainError("one cell count per edge is required");
    for (std::size_t e = 0; e < cells_.size(); ++e) {
        if (cells_[e] < 1) throw DomainError("every edge needs at least one cell");
        const Edge& ed = g.edge(EdgeId{static_cast<std::uint32_t>(e)});
        if (ed.tail == ed.head) throw DomainError("self-loops are not supported");
        dx_.push_back(ed.length / cells_[e]);
        cell_offset_.push_back(total_cells_);
        face_offset_.push_back(total_faces_);
        total_cells_ += static_cast<std::size_t>(cells_[e]);
        total_faces_ += static_cast<std::size_t>(cells_[e]) + 1;
        cell_edge_.insert(cell_edge_.end(), static_cast<std::size_t>(cells_[e]), e);
    }
}

DynamicGrid DynamicGrid::uniform(const MetricGraph& g, double target_dx) {
    if (!(target_dx > 0.0)) throw DomainError("cell width must be positive");
    std::vector<int> cells;
    for (const auto& e : g.edges()) cells.push_back(std::max(1, static_cast<int>(std::lround(e.length / target_dx))));
    return DynamicGrid(g, std::move(cells));
}

double DynamicGrid::centre(std::size_t c) const {
    const std::size_t e = cell_edge_[c];
    return (static_cast<double>(c - cell_offset_[e]) + 0.5) * dx_[e];
}

GraphState GraphState::zero(const DynamicGrid& grid) {
    return {std::vector<double>(grid.cell_count(), 0.0), std::vector<double>(grid.node_count(), 0.0)};
}

double GraphState::edge_mass(const DynamicGrid& grid) const {
    double m = 0.0;
    for (std::size_t c = 0; c < rho.size(); ++c) m += rho[c] * grid.cell_width(c);
    return m;
}

double GraphState::mass(const DynamicGrid& grid) const {
    double m = edge_mass(grid);
    for (double g : gamma) m += g;
    return m;
}

double ContinuityResidual::max_abs() const {
    double m = 0.0;
    for (double v : cells) m = std::max(m, std::abs(v));
    for (double v : nodes) m = std::max(m, std::abs(v));
    return m;
}

namespace {

void check_shapes(const DynamicGrid& grid, const DynamicField& f) {
    if (f.levels.size() != f.flux.size() + 1 || f.flux.empty()) throw DomainError("field needs steps + 1 levels");
    for (const auto& s : f.levels)
        if (s.rho.size() != grid.cell_count() || s.gamma.size() != grid.node_count())
            throw DomainError("field level does not match the grid");
    for (const auto& j : f.flux)
        if (j.size() != grid.face_count()) throw DomainError("flux level does not match the grid");
}

// Inflow into node v from edge e, i.e. the outward normal flux of the edge at v.
template <class Fn>
void for_each_boundary(const DynamicGrid& grid, Fn&& fn) {
    for (std::size_t e = 0; e < grid.edge_count(); ++e) {
        const Edge& ed = grid.graph().edge(EdgeId{static_cast<std::uint32_t>(e)});
        fn(e, ed.tail.value, grid.face(e, 0), -1.0, grid.cell(e, 0));
        fn(e, ed.head.value, grid.face(e, grid.cells(e)), 1.0, grid.cell(e, grid.cells(e) - 1));
    }
}

}  // namespace

ContinuityResidual discrete_continuity_residual(const DynamicGrid& grid, const DynamicField& f, FlowVariant variant) {
    check_shapes(grid, f);
    const std::size_t T = f.steps();
    const double dt = 1.0 / static_cast<double>(T);
    ContinuityResidual r;
    r.cells.assign(T * grid.cell_count(), 0.0);
    r.nodes.assign(T * grid.node_count(), 0.0);
    for (std::size_t k = 0; k < T; ++k) {
        const auto& a = f.levels[k];
        const auto& b = f.levels[k + 1];
        const auto& j = f.flux[k];
        for (std::size_t e = 0; e < grid.edge_count(); ++e)
            for (int i = 0; i < grid.cells(e); ++i) {
                const std::size_t c = grid.cell(e, i);
                r.cells[k * grid.cell_count() + c] =
                    (b.rho[c] - a.rho[c]) / dt + (j[grid.face(e, i + 1)] - j[grid.face(e, i)]) / grid.dx(e);
            }
        double* node = r.nodes.data() + k * grid.node_count();
        for_each_boundary(grid, [&](std::size_t, std::uint32_t v, std::size_t face, double sign, std::size_t) {
            node[v] += sign * j[face];
        });
        if (variant != FlowVariant::kirchhoff)
            for (std::size_t v = 0; v < grid.node_count(); ++v) node[v] = (b.gamma[v] - a.gamma[v]) / dt - node[v];
    }
    return r;
}

double field_action(const DynamicGrid& grid, const DynamicField& f, FlowVariant variant, double p) {
    check_shapes(grid, f);
    const std::size_t T = f.steps();
    const double dt = 1.0 / static_cast<double>(T);
    double total = 0.0;
    for (std::size_t k = 0; k < T; ++k) {
        const auto& a = f.levels[k];
        const auto& b = f.levels[k + 1];
        const auto& j = f.flux[k];
        for (std::size_t e = 0; e < grid.edge_count(); ++e) {
            const int n = grid.cells(e);
            const double dx = grid.dx(e);
            for (int i = 0; i <= n; ++i) {
                const int lo = std::max(i - 1, 0);
                const int hi = std::min(i, n - 1);
                const std::size_t cl = grid.cell(e, lo);
                const std::size_t ch = grid.cell(e, hi);
                const double dens = 0.25 * (a.rho[cl] + a.rho[ch] + b.rho[cl] + b.rho[ch]);
                const double w = (i == 0 || i == n) ? 0.5 * dx : dx;
                total += w * dt * perspective_h(j[grid.face(e, i)], dens, p);
            }
        }
        if (variant == FlowVariant::kirchhoff) continue;
        std::vector<double> net(grid.node_count(), 0.0);
        for_each_boundary(grid, [&](std::size_t, std::uint32_t v, std::size_t face, double sign, std::size_t) {
            const double inflow = sign * j[face];
            if (variant == FlowVariant::reservoir_per_edge)
                total += dt * perspective_h(inflow, 0.5 * (a.gamma[v] + b.gamma[v]), p);
            else
                net[v] += inflow;
        });
        if (variant == FlowVariant::reservoir_net)
            for (std::size_t v = 0; v < grid.node_count(); ++v)
                total += dt * perspective_h(net[v], 0.5 * (a.gamma[v] + b.gamma[v]), p);
    }
    return total;
}

NodeExchange detailed_balance_exchange(const DynamicGrid& grid, std::span<const double> potential,
                                       std::span<const double> node_reference, double rate) {
    if (potential.size() != grid.cell_count() || node_reference.size() != grid.node_count())
        throw DomainError("reference does not match the grid");
    NodeExchange x;
    x.edge_to_node.assign(2 * grid.edge_count(), 0.0);
    x.node_to_edge.assign(2 * grid.edge_count(), 0.0);
    for_each_boundary(grid, [&](std::size_t e, std::uint32_t v, std::size_t, double sign, std::size_t c) {
        const double omega = node_reference[v];
        if (!(omega > 0.0)) return;
        const double pi = std::exp(-potential[c]);
        const std::size_t slot = 2 * e + (sign > 0 ? 1 : 0);
        x.edge_to_node[slot] = rate * std::sqrt(omega / pi);
        x.node_to_edge[slot] = rate * std::sqrt(pi / omega);
    });
    return x;
}

GraphState equilibrium_state(const DynamicGrid& grid, std::span<const double> potential,
                             std::span<const double> node_reference) {
    GraphState s = GraphState::zero(grid);
    for (std::size_t c = 0; c < grid.cell_count(); ++c) s.rho[c] = std::exp(-potential[c]);
    s.gamma.assign(node_reference.begin(), node_reference.end());
    return s;
}

std::vector<GraphState> simulate_drift_diffusion(const DynamicGrid& grid, const DriftDiffusionSpec& spec, double dt,
                                                 std::size_t steps, const GraphState& initial) {
    const std::size_t C = grid.cell_count();
    const std::size_t V = grid.node_count();
    if (spec.diffusion.size() != grid.edge_count() || spec.potential.size() != C)
        throw DomainError("drift-diffusion data does not match the grid");
    const bool coupled = !spec.exchange.edge_to_node.empty();
    if (coupled && (spec.exchange.edge_to_node.size() != 2 * grid.edge_count() ||
                    spec.exchange.node_to_edge.size() != 2 * grid.edge_count()))
        throw DomainError("node exchange rates do not match the grid");
    if (initial.rho.size() != C || initial.gamma.size() != V) throw DomainError("initial state does not match the grid");
    if (!(dt > 0.0)) throw DomainError("time step must be positive");

    double bound = kInfinity;
    for (std::size_t e = 0; e < grid.edge_count(); ++e) {
        if (spec.diffusion[e] < 0.0) throw DomainError("diffusion must be nonnegative");
        if (spec.diffusion[e] > 0.0) bound = std::min(bound, 0.5 * grid.dx(e) * grid.dx(e) / spec.diffusion[e]);
    }
    if (dt > bound) throw DomainError("time step violates the explicit stability bound dt <= 0.5 dx^2 / d");

    // Link rates per unit mass, square-root weighting of the equilibrium ratio.
    struct Link {
        std::size_t a, b;
        double ab, ba;
    };
    std::vector<Link> links;
    for (std::size_t e = 0; e < grid.edge_count(); ++e) {
        const double k = spec.diffusion[e] / (grid.dx(e) * grid.dx(e));
        for (int i = 0; i + 1 < grid.cells(e); ++i) {
            const std::size_t a = grid.cell(e, i);
            const std::size_t b = grid.cell(e, i + 1);
            const double half = 0.5 * (spec.potential[b] - spec.potential[a]);
            links.push_back({a, b, k * std::exp(-half), k * std::exp(half)});
        }
    }
    struct Port {
        std::size_t cell;
        std::uint32_t node;
        double out, in;  // cell -> node per unit mass, node -> cell per unit node mass
    };
    std::vector<Port> ports;
    if (coupled)
        for_each_boundary(grid, [&](std::size_t e, std::uint32_t v, std::size_t, double sign, std::size_t c) {
            const std::size_t slot = 2 * e + (sign > 0 ? 1 : 0);
            const double out = spec.exchange.edge_to_node[slot];
            const double in = spec.exchange.node_to_edge[slot];
            if (out < 0.0 || in < 0.0) throw DomainError("exchange rates must be nonnegative");
            ports.push_back({c, v, out / grid.cell_width(c), in});
        });

    std::vector<double> exit_cell(C, 0.0), exit_node(V, 0.0);
    for (const auto& l : links) {
        exit_cell[l.a] += l.ab;
        exit_cell[l.b] += l.ba;
    }
    for (const auto& p : ports) {
        exit_cell[p.cell] += p.out;
        exit_node[p.node] += p.in;
    }
    for (double r : exit_cell)
        if (dt * r > 1.0) throw DomainError("time step too large for positivity of the explicit scheme");
    for (double r : exit_node)
        if (dt * r > 1.0) throw DomainError("time step too large for positivity at a node");

    std::vector<GraphState> out{initial};
    out.reserve(steps + 1);
    std::vector<double> m(C), dm(C), dg(V);
    for (std::size_t s = 0; s < steps; ++s) {
        const GraphState& cur = out.back();
        for (std::size_t c = 0; c < C; ++c) m[c] = cur.rho[c] * grid.cell_width(c);
        std::fill(dm.begin(), dm.end(), 0.0);
        std::fill(dg.begin(), dg.end(), 0.0);
        for (const auto& l : links) {
            const double flow = l.ab * m[l.a] - l.ba * m[l.b];
            dm[l.a] -= flow;
            dm[l.b] += flow;
        }
        for (const auto& p : ports) {
            const double flow = p.out * m[p.cell] - p.in * cur.gamma[p.node];
            dm[p.cell] -= flow;
            dg[p.node] += flow;
        }
        GraphState next = cur;
        for (std::size_t c = 0; c < C; ++c) next.rho[c] = (m[c] + dt * dm[c]) / grid.cell_width(c);
        for (std::size_t v = 0; v < V; ++v) next.gamma[v] = cur.gamma[v] + dt * dg[v];
        out.push_back(std::move(next));
    }
    return out;
}

double relative_entropy(std::span<const double> m, std::span<const double> ref) {
    if (m.size() != ref.size()) throw DomainError("relative entropy needs matching supports");
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] < 0.0 || ref[i] < 0.0) throw DomainError("relative entropy needs nonnegative measures");
        if (ref[i] == 0.0) {
            if (m[i] > 0.0) return kInfinity;
            continue;
        }
        const double r = m[i] / ref[i];
        const double eta = r > 0.0 ? r * std::log(r) - r + 1.0 : 1.0;
        total += ref[i] * eta;
    }
    return total;
}

double relative_entropy(const DynamicGrid& grid, const GraphState& m, const GraphState& ref) {
    std::vector<double> a, b;
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        a.push_back(m.rho[c] * grid.cell_width(c));
        b.push_back(ref.rho[c] * grid.cell_width(c));
    }
    a.insert(a.end(), m.gamma.begin(), m.gamma.end());
    b.insert(b.end(), ref.gamma.begin(), ref.gamma.end());
    return relative_entropy(a, b);
}

}  // namespace got
