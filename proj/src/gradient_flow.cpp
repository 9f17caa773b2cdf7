#include "got/gradient_flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "got/coupling.hpp"

namespace got {

namespace {

constexpr double kLogFloor = 1e-12;

void check_law(const PipeParameters& pipe, const PressureLaw& law) {
    if (!(pipe.diffusion > 0.0) || !(pipe.friction > 0.0)) throw DomainError("diffusion and friction must be positive");
    if (!(law.exponent >= 1.0)) throw DomainError("pressure exponent must be at least 1");
    if (!(law.coefficient > 0.0)) throw DomainError("pressure coefficient must be positive");
}

double xlogx(double r) { return r > 0.0 ? r * std::log(r) : 0.0; }

void check_state(const DynamicGrid& grid, const GraphState& s) {
    if (s.rho.size() != grid.cell_count() || s.gamma.size() != grid.node_count())
        throw DomainError("state does not match the grid");
    for (double r : s.rho)
        if (!(r >= 0.0)) throw DomainError("negative density");
    for (double g : s.gamma)
        if (!(g >= 0.0)) throw DomainError("negative node mass");
}

void check_spec(const DynamicGrid& grid, const EnergySpec& spec) {
    switch (spec.kind) {
    case EnergyKind::relative_entropy:
        check_state(grid, spec.reference);
        break;
    case EnergyKind::iso3:
        if (spec.pipes.size() != grid.edge_count()) throw DomainError("one pipe parameter set per edge is required");
        for (const auto& pipe : spec.pipes) check_law(pipe, spec.pressure);
        break;
    case EnergyKind::log_entropy:
        if (!spec.potential.empty() && spec.potential.size() != grid.cell_count())
            throw DomainError("potential needs one value per cell");
        break;
    }
}

std::vector<double> interaction_matrix(const DynamicGrid& grid, const EnergySpec& spec) {
    const std::size_t n = grid.cell_count();
    std::vector<GraphPoint> pts(n);
    for (std::size_t c = 0; c < n; ++c)
        pts[c] = {EdgeId{static_cast<std::uint32_t>(grid.edge_of_cell(c))}, grid.centre(c)};
    std::vector<double> w = distance_table(grid.graph(), pts, pts);
    for (double& v : w) v = spec.interaction(v);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(w[i * n + j] - w[j * n + i]) > 1e-12 * (1.0 + std::abs(w[i * n + j])))
                throw DomainError("interaction kernel is not symmetric");
    return w;
}

// Per-cell slope term multiplying the density for the linear part of the pipe energy.
double pipe_linear_slope(const DynamicGrid& grid, const EnergySpec& spec, std::size_t c) {
    const PipeParameters& pipe = spec.pipes[grid.edge_of_cell(c)];
    return 2.0 * pipe.diffusion * spec.gravity / pipe.friction * std::sin(pipe.inclination) * grid.centre(c) +
           pipe.offset;
}

double objective(const EnergySpec& spec, const DynamicGrid& grid, const GraphState& s, double transport, double p,
                 double tau, double* energy_out) {
    const double e = energy(grid, spec, s);
    if (energy_out) *energy_out = e;
    return transport / (p * std::pow(tau, p - 1.0)) + e;
}

}  // namespace

double iso3_entropy_density(double rho, const PipeParameters& pipe, const PressureLaw& law) {
    check_law(pipe, law);
    if (rho < 0.0) throw DomainError("negative density");
    const double scale = 2.0 * pipe.diffusion / pipe.friction * law.coefficient;
    if (law.exponent == 1.0) return scale * (xlogx(rho) - rho);
    return scale * std::pow(rho, law.exponent) / (law.exponent - 1.0);
}

double iso3_entropy_slope(double rho, const PipeParameters& pipe, const PressureLaw& law) {
    check_law(pipe, law);
    if (rho < 0.0) throw DomainError("negative density");
    const double scale = 2.0 * pipe.diffusion / pipe.friction * law.coefficient;
    if (law.exponent == 1.0) return scale * std::log(std::max(rho, kLogFloor));
    return scale * law.exponent / (law.exponent - 1.0) * std::pow(rho, law.exponent - 1.0);
}

double energy(const DynamicGrid& grid, const EnergySpec& spec, const GraphState& state) {
    check_state(grid, state);
    check_spec(grid, spec);
    const std::size_t n = grid.cell_count();
    double total = 0.0;
    switch (spec.kind) {
    case EnergyKind::relative_entropy:
        return relative_entropy(grid, state, spec.reference);
    case EnergyKind::iso3:
        for (std::size_t c = 0; c < n; ++c) {
            const PipeParameters& pipe = spec.pipes[grid.edge_of_cell(c)];
            total += grid.cell_width(c) * (iso3_entropy_density(state.rho[c], pipe, spec.pressure) +
                                           pipe_linear_slope(grid, spec, c) * state.rho[c]);
        }
        return total;
    case EnergyKind::log_entropy:
        for (std::size_t c = 0; c < n; ++c) {
            const double v = spec.potential.empty() ? 0.0 : spec.potential[c];
            total += grid.cell_width(c) * (xlogx(state.rho[c]) + v * state.rho[c]);
        }
        if (spec.interaction) {
            const auto w = interaction_matrix(grid, spec);
            double pair = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    pair += w[i * n + j] * state.rho[i] * grid.cell_width(i) * state.rho[j] * grid.cell_width(j);
            total += 0.5 * pair;
        }
        return total;
    }
    return total;
}

std::vector<double> energy_gradient(const DynamicGrid& grid, const EnergySpec& spec, const GraphState& state) {
    check_state(grid, state);
    check_spec(grid, spec);
    const std::size_t n = grid.cell_count();
    std::vector<double> g(n, 0.0);
    switch (spec.kind) {
    case EnergyKind::relative_entropy:
        for (std::size_t c = 0; c < n; ++c) {
            const double ref = spec.reference.rho[c];
            if (!(ref > 0.0)) throw DomainError("reference density must be positive for the gradient");
            g[c] = grid.cell_width(c) * std::log(std::max(state.rho[c], kLogFloor) / ref);
        }
        break;
    case EnergyKind::iso3:
        for (std::size_t c = 0; c < n; ++c) {
            const PipeParameters& pipe = spec.pipes[grid.edge_of_cell(c)];
            g[c] = grid.cell_width(c) *
                   (iso3_entropy_slope(state.rho[c], pipe, spec.pressure) + pipe_linear_slope(grid, spec, c));
        }
        break;
    case EnergyKind::log_entropy:
        for (std::size_t c = 0; c < n; ++c) {
            const double v = spec.potential.empty() ? 0.0 : spec.potential[c];
            g[c] = grid.cell_width(c) * (std::log(std::max(state.rho[c], kLogFloor)) + 1.0 + v);
        }
        if (spec.interaction) {
            const auto w = interaction_matrix(grid, spec);
            for (std::size_t i = 0; i < n; ++i) {
                double conv = 0.0;
                for (std::size_t j = 0; j < n; ++j) conv += w[i * n + j] * state.rho[j] * grid.cell_width(j);
                g[i] += grid.cell_width(i) * conv;
            }
        }
        break;
    }
    return g;
}

std::vector<double> project_to_simplex(const DynamicGrid& grid, std::span<const double> z) {
    const std::size_t n = grid.cell_count();
    if (z.size() != n) throw DomainError("vector does not match the grid");
    // Find theta with sum dx * max(z - theta, 0) = 1; the left side is piecewise linear and decreasing.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
    double weight = 0.0;
    double weighted = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t c = order[k];
        weight += grid.cell_width(c);
        weighted += grid.cell_width(c) * z[c];
        theta = (weighted - 1.0) / weight;
        if (k + 1 == n || z[order[k + 1]] <= theta) break;
    }
    std::vector<double> out(n);
    for (std::size_t c = 0; c < n; ++c) out[c] = std::max(z[c] - theta, 0.0);
    return out;
}

JkoResult jko_step(const DynamicGrid& grid, const GraphState& prev, double tau, double p, const EnergySpec& spec,
                   const JkoOptions& options) {
    if (!(tau > 0.0)) throw DomainError("time step must be positive");
    if (!(p >= 1.0)) throw DomainError("p must be at least 1");
    check_state(grid, prev);
    for (double g : prev.gamma)
        if (g != 0.0) throw DomainError("node masses are not supported by the minimizing movement");
    if (std::abs(prev.mass(grid) - 1.0) > 1e-8) throw DomainError("state must have unit mass");

    const ActionSpec action{p, FlowVariant::kirchhoff};
    SolverOptions inner = options.inner;
    inner.endpoint_gradient = true;
    const double transport_weight = 1.0 / (p * std::pow(tau, p - 1.0));
    const std::size_t n = grid.cell_count();

    JkoResult best;
    best.state = prev;
    best.objective = objective(spec, grid, prev, 0.0, p, tau, &best.energy);
    std::vector<double> transport_grad(n, 0.0);
    std::optional<ActionResult> warm;

    double step = 1.0;
    for (int it = 0; it < options.max_outer; ++it) {
        std::vector<double> grad = energy_gradient(grid, spec, best.state);
        for (std::size_t c = 0; c < n; ++c) grad[c] += transport_weight * transport_grad[c];

        bool accepted = false;
        double moved = 0.0;
        for (int trial = 0; trial < 40 && !accepted; ++trial, step *= 0.5) {
            std::vector<double> z(n);
            for (std::size_t c = 0; c < n; ++c) z[c] = best.state.rho[c] - step * grad[c] / grid.cell_width(c);
            GraphState cand = prev;
            cand.rho = project_to_simplex(grid, z);

            double predicted = 0.0;
            moved = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                predicted += grad[c] * (cand.rho[c] - best.state.rho[c]);
                moved += grid.cell_width(c) * std::abs(cand.rho[c] - best.state.rho[c]);
            }
            if (moved < options.step_tolerance) break;

            ActionResult solved = minimize_action(grid, prev, cand, action, inner, warm ? &*warm : nullptr);
            double e = 0.0;
            const double obj = objective(spec, grid, cand, solved.action, p, tau, &e);
            if (obj < best.objective && obj <= best.objective + 1e-4 * predicted) {
                best.state = std::move(cand);
                best.objective = obj;
                best.energy = e;
                best.transport = solved.action;
                transport_grad = solved.endpoint_gradient;
                warm = std::move(solved);
                accepted = true;
            }
        }
        best.outer_iterations = it + 1;
        if (!accepted || moved < options.step_tolerance) break;
        step *= 4.0;
    }
    return best;
}

FlowResult run_flow(const DynamicGrid& grid, const GraphState& initial, double tau, std::size_t steps, double p,
                    const EnergySpec& spec, const JkoOptions& options) {
    FlowResult out;
    out.states.push_back(initial);
    out.log.push_back({0, energy(grid, spec, initial), 0.0, initial.mass(grid)});
    for (std::size_t k = 1; k <= steps; ++k) {
        JkoResult r = jko_step(grid, out.states.back(), tau, p, spec, options);
        out.log.push_back({k, r.energy, r.transport, r.state.mass(grid)});
        out.states.push_back(std::move(r.state));
    }
    return out;
}

}  // namespace got
