#include <cmath>

#include "doctest.h"
#include "got/gradient_flow.hpp"
#include "got/networks.hpp"
#include "oracles.hpp"

using namespace got;

namespace {

MetricGraph two_edge_path() {
    MetricGraph g;
    const auto a = g.add_node("a");
    const auto b = g.add_node("b");
    const auto c = g.add_node("c");
    g.add_edge("e1", a, b, 1.0);
    g.add_edge("e2", b, c, 1.0);
    return g;
}

// Gaussian bump on edge 0 over a positive floor, unit mass.
GraphState lumpy(const DynamicGrid& grid, double centre, double floor) {
    GraphState s = GraphState::zero(grid);
    double m = 0.0;
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        const double bumpy = grid.edge_of_cell(c) == 0 ? std::exp(-std::pow((grid.centre(c) - centre) / 0.1, 2)) : 0.0;
        s.rho[c] = floor + bumpy;
        m += s.rho[c] * grid.cell_width(c);
    }
    for (double& v : s.rho) v /= m;
    return s;
}

PipeParameters unit_pipe() {
    PipeParameters p;
    p.diffusion = 0.5;
    p.friction = 1.0;
    return p;
}

double second_difference(double x, double h, const PipeParameters& pipe, const PressureLaw& law) {
    return (iso3_entropy_density(x + h, pipe, law) - 2.0 * iso3_entropy_density(x, pipe, law) +
            iso3_entropy_density(x - h, pipe, law)) /
           (h * h);
}

double weighted_l1(const DynamicGrid& grid, const GraphState& a, const GraphState& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < grid.cell_count(); ++c) s += std::abs(a.rho[c] - b.rho[c]) * grid.cell_width(c);
    return s;
}

}  // namespace

TEST_CASE("pipe entropy density") {
    const PipeParameters pipe = unit_pipe();  // 2D / lambda = 1
    SUBCASE("quadratic pressure") {
        const PressureLaw law{1.0, 2.0};
        for (double r : {0.0, 0.3, 1.0, 2.5}) CHECK(iso3_entropy_density(r, pipe, law) == doctest::Approx(r * r));
    }
    SUBCASE("vanishes at zero density") {
        for (double k : {1.0, 1.5, 3.0}) CHECK(iso3_entropy_density(0.0, pipe, PressureLaw{2.0, k}) == 0.0);
    }
    SUBCASE("isothermal curvature") {
        const PressureLaw law{1.0, 1.0};
        CHECK(second_difference(0.5, 1e-4, pipe, law) == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(iso3_entropy_slope(1.0, pipe, law) == 0.0);
        CHECK(iso3_entropy_density(1.0, pipe, law) == doctest::Approx(-1.0));
    }
    SUBCASE("second derivative equals scaled pressure slope over density") {
        Rng rng(5);
        for (double k : {1.0, 1.7, 2.0, 3.0}) {
            PipeParameters p = pipe;
            p.diffusion = 0.8;
            p.friction = 1.3;
            const PressureLaw law{0.7, k};
            for (int i = 0; i < 20; ++i) {
                const double r = rng.uniform(0.1, 2.0);
                const double expected = 2.0 * p.diffusion / p.friction * law.coefficient * k * std::pow(r, k - 1.0) / r;
                CHECK(second_difference(r, 1e-4 * r, p, law) == doctest::Approx(expected).epsilon(1e-4));
            }
        }
    }
    SUBCASE("invalid laws") {
        CHECK_THROWS_AS(iso3_entropy_density(1.0, pipe, PressureLaw{1.0, 0.5}), DomainError);
        PipeParameters bad = pipe;
        bad.friction = 0.0;
        CHECK_THROWS_AS(iso3_entropy_density(1.0, bad, PressureLaw{1.0, 2.0}), DomainError);
        CHECK_THROWS_AS(iso3_entropy_density(-0.1, pipe, PressureLaw{1.0, 2.0}), DomainError);
    }
}

TEST_CASE("energy functionals") {
    const auto g = straight_pipe();
    const DynamicGrid grid(g, {10});
    GraphState s = lumpy(grid, 0.4, 0.3);

    SUBCASE("relative entropy of the reference") {
        EnergySpec e;
        e.kind = EnergyKind::relative_entropy;
        e.reference = s;
        CHECK(energy(grid, e, s) == doctest::Approx(0.0));
    }
    SUBCASE("zero interaction adds nothing") {
        EnergySpec plain;
        EnergySpec with = plain;
        with.interaction = [](double) { return 0.0; };
        CHECK(energy(grid, with, s) == doctest::Approx(energy(grid, plain, s)));
    }
    SUBCASE("constant interaction adds half its value at unit mass") {
        EnergySpec plain;
        EnergySpec with = plain;
        with.interaction = [](double) { return 3.0; };
        CHECK(energy(grid, with, s) == doctest::Approx(energy(grid, plain, s) + 1.5));
    }
    SUBCASE("uniform density on a flat pipe") {
        for (int n : {4, 16, 64}) {
            const DynamicGrid fine(g, {n});
            GraphState u = GraphState::zero(fine);
            for (double& v : u.rho) v = 1.7;
            EnergySpec e;
            e.kind = EnergyKind::iso3;
            e.pressure = {1.0, 2.0};
            e.pipes = {unit_pipe()};
            CHECK(energy(fine, e, u) == doctest::Approx(1.7 * 1.7));
        }
    }
    SUBCASE("inclination and offsets enter linearly") {
        EnergySpec e;
        e.kind = EnergyKind::iso3;
        e.pressure = {1.0, 2.0};
        e.pipes = {unit_pipe()};
        e.pipes[0].inclination = 0.3;
        e.pipes[0].offset = 0.25;
        e.gravity = 2.0;
        double expected = 0.0;
        for (std::size_t c = 0; c < grid.cell_count(); ++c)
            expected += grid.dx(0) * (s.rho[c] * s.rho[c] + 2.0 * std::sin(0.3) * grid.centre(c) * s.rho[c] +
                                      0.25 * s.rho[c]);
        CHECK(energy(grid, e, s) == doctest::Approx(expected));
    }
    SUBCASE("negative density is rejected") {
        GraphState bad = s;
        bad.rho[3] = -1e-3;
        CHECK_THROWS_AS(energy(grid, EnergySpec{}, bad), DomainError);
    }
}

TEST_CASE("energy gradients match finite differences") {
    const auto g = two_edge_path();
    const DynamicGrid grid(g, {6, 5});
    const GraphState s = lumpy(grid, 0.5, 0.4);
    std::vector<EnergySpec> specs(3);
    specs[0].potential.resize(grid.cell_count());
    for (std::size_t c = 0; c < grid.cell_count(); ++c) specs[0].potential[c] = std::sin(3.0 * c);
    specs[0].interaction = [](double d) { return std::exp(-d); };
    specs[1].kind = EnergyKind::iso3;
    specs[1].pressure = {1.2, 1.6};
    specs[1].pipes = {unit_pipe(), unit_pipe()};
    specs[1].pipes[1].inclination = -0.4;
    specs[1].pipes[1].offset = 0.7;
    specs[2].kind = EnergyKind::relative_entropy;
    specs[2].reference = lumpy(grid, 0.2, 1.0);
    for (const auto& e : specs) {
        const auto grad = energy_gradient(grid, e, s);
        for (std::size_t c = 0; c < grid.cell_count(); ++c) {
            const double d = 1e-6;
            GraphState plus = s, minus = s;
            plus.rho[c] += d;
            minus.rho[c] -= d;
            const double fd = (energy(grid, e, plus) - energy(grid, e, minus)) / (2 * d);
            CHECK(grad[c] == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("simplex projection") {
    const auto g = two_edge_path();
    const DynamicGrid grid(g, {3, 5});
    Rng rng(3);
    for (int k = 0; k < 50; ++k) {
        std::vector<double> z(grid.cell_count());
        for (double& v : z) v = rng.uniform(-2.0, 3.0);
        const auto x = project_to_simplex(grid, z);
        double mass = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) {
            CHECK(x[c] >= 0.0);
            mass += x[c] * grid.cell_width(c);
        }
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
        // Optimality: the weighted distance to z does not drop along random feasible directions.
        auto dist = [&](const std::vector<double>& y) {
            double s = 0.0;
            for (std::size_t c = 0; c < y.size(); ++c) s += grid.cell_width(c) * (y[c] - z[c]) * (y[c] - z[c]);
            return s;
        };
        for (int t = 0; t < 10; ++t) {
            std::vector<double> y(grid.cell_count());
            double m = 0.0;
            for (std::size_t c = 0; c < y.size(); ++c) m += (y[c] = rng.uniform()) * grid.cell_width(c);
            for (double& v : y) v /= m;
            std::vector<double> mix(y.size());
            for (std::size_t c = 0; c < y.size(); ++c) mix[c] = 0.9 * x[c] + 0.1 * y[c];
            CHECK(dist(mix) >= dist(x) - 1e-12);
        }
    }
}

TEST_CASE("minimizing movement steps") {
    const auto g = straight_pipe();
    const DynamicGrid grid(g, {12});
    const GraphState prev = lumpy(grid, 0.3, 0.2);

    SUBCASE("constant energy keeps the state") {
        EnergySpec e;
        e.kind = EnergyKind::iso3;
        e.pressure = {1.0, 1.0};
        e.pipes = {unit_pipe()};
        e.pipes[0].diffusion = 1e-300;
        e.pipes[0].offset = 2.0;
        const auto r = jko_step(grid, prev, 0.1, 2.0, e);
        CHECK(weighted_l1(grid, r.state, prev) < 1e-8);
        CHECK(r.transport == 0.0);
    }
    SUBCASE("entropy drives toward uniform") {
        const EnergySpec e;
        const auto r = jko_step(grid, prev, 1.0, 2.0, e);
        const double before = energy(grid, e, prev);
        CHECK(r.energy < before);
        CHECK(r.objective <= before);
        CHECK(r.state.mass(grid) == doctest::Approx(1.0).epsilon(1e-12));
        GraphState uniform = GraphState::zero(grid);
        for (double& v : uniform.rho) v = 1.0;
        CHECK(weighted_l1(grid, r.state, uniform) < weighted_l1(grid, prev, uniform));
    }
    SUBCASE("invalid input") {
        CHECK_THROWS_AS(jko_step(grid, prev, 0.0, 2.0, EnergySpec{}), DomainError);
        GraphState heavy = prev;
        for (double& v : heavy.rho) v *= 2.0;
        CHECK_THROWS_AS(jko_step(grid, heavy, 0.1, 2.0, EnergySpec{}), DomainError);
    }
}

TEST_CASE("flow with no steps returns the initial state") {
    const auto g = straight_pipe();
    const DynamicGrid grid(g, {6});
    const GraphState s = lumpy(grid, 0.3, 0.2);
    const auto r = run_flow(grid, s, 0.1, 0, 2.0, EnergySpec{});
    REQUIRE(r.states.size() == 1);
    CHECK(r.states[0].rho == s.rho);
    CHECK(r.log.size() == 1);
}

TEST_CASE("entropy flow tracks the heat equation") {
    const auto g = straight_pipe();
    const DynamicGrid grid(g, {20});
    const GraphState init = lumpy(grid, 0.3, 0.1);
    const double tau = 0.005;
    const std::size_t n = 10;
    const auto flow = run_flow(grid, init, tau, n, 2.0, EnergySpec{});
    for (std::size_t k = 0; k < flow.log.size(); ++k) {
        CHECK(std::abs(flow.log[k].mass - 1.0) <= 1e-8);
        if (k > 0) CHECK(flow.log[k].energy <= flow.log[k - 1].energy + 1e-6);
        for (double v : flow.states[k].rho) CHECK(v >= 0.0);
    }

    const DriftDiffusionSpec heat{{1.0}, std::vector<double>(grid.cell_count(), 0.0), {}};
    const double final_time = tau * static_cast<double>(n);
    const auto substeps = static_cast<std::size_t>(std::ceil(final_time / (0.25 * grid.dx(0) * grid.dx(0))));
    const auto pde = simulate_drift_diffusion(grid, heat, final_time / static_cast<double>(substeps), substeps, init);
    const double gap = weighted_l1(grid, flow.states.back(), pde.back());
    CHECK(gap <= 0.05);
    // The comparison is meaningful only if the state actually moved.
    CHECK(weighted_l1(grid, init, pde.back()) > 10.0 * gap);
}

TEST_CASE("cubic flow of the pipe energy on two edges") {
    const auto g = two_edge_path();
    const DynamicGrid grid(g, {5, 5});
    EnergySpec e;
    e.kind = EnergyKind::iso3;
    e.pressure = {1.0, 2.0};
    e.pipes = {unit_pipe(), unit_pipe()};
    const auto flow = run_flow(grid, lumpy(grid, 0.3, 0.2), 0.05, 10, 3.0, e);
    REQUIRE(flow.states.size() == 11);
    for (std::size_t k = 1; k < flow.log.size(); ++k) {
        CHECK(flow.log[k].energy <= flow.log[k - 1].energy + 1e-6);
        CHECK(std::abs(flow.log[k].mass - 1.0) <= 1e-8);
    }
    CHECK(flow.log.back().energy < flow.log.front().energy);
}

TEST_CASE("cubic flow on a flat pipe approaches the constant state") {
    const auto g = straight_pipe();
    const DynamicGrid grid(g, {10});
    EnergySpec e;
    e.kind = EnergyKind::iso3;
    e.pressure = {1.0, 2.0};
    e.pipes = {unit_pipe()};
    const auto flow = run_flow(grid, lumpy(grid, 0.3, 0.2), 0.05, 8, 3.0, e);
    double lo = oracle::inf, hi = 0.0;
    for (double v : flow.states.back().rho) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(hi - lo < 1e-3);
    CHECK(flow.log.back().energy == doctest::Approx(1.0).epsilon(1e-5));
}
