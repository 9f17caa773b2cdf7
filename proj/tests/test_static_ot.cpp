#include <cmath>

#include "doctest.h"
#include "got/networks.hpp"
#include "got/static_ot.hpp"
#include "oracles.hpp"

using namespace got;

namespace {

CostMatrix line_cost(std::vector<double> xs, std::vector<double> ys) {
    CostMatrix c(xs.size(), ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j) c(i, j) = (xs[i] - ys[j]) * (xs[i] - ys[j]);
    return c;
}

CostMatrix random_cost(Rng& rng, std::size_t m, std::size_t n) {
    CostMatrix c(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) c(i, j) = rng.uniform();
    return c;
}

std::vector<double> random_weights(Rng& rng, std::size_t n) {
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& v : w) s += (v = 0.05 + rng.uniform());
    for (auto& v : w) v /= s;
    return w;
}

void check_marginals(const OtSolution& s, std::span<const double> a, std::span<const double> b) {
    std::vector<double> ra(a.size(), 0.0), rb(b.size(), 0.0);
    for (const auto& e : s.plan.entries) {
        CHECK(e.mass >= 0.0);
        ra[e.source] += e.mass;
        rb[e.target] += e.mass;
    }
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(ra[i] - a[i]) <= 1e-8);
    for (std::size_t j = 0; j < b.size(); ++j) CHECK(std::abs(rb[j] - b[j]) <= 1e-8);
}

void check_certificate(const CostMatrix& c, const OtSolution& s) {
    const double v = s.plan.value;
    CHECK(std::abs(s.certificate.gap) <= 1e-6 * (1.0 + std::abs(v)));
    CHECK(s.certificate.gap >= -1e-8);
    const auto slack = complementary_slackness(c, s, 1e-10, 1e-6);
    CHECK(slack.violations == 0);
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j)
            if (std::isfinite(c(i, j))) CHECK(s.certificate.phi[i] + s.certificate.psi[j] <= c(i, j) + 1e-8);
}

// Smallest vertex value of the transport polytope for 2 x n problems, by sweeping the free row.
double two_row_oracle(const CostMatrix& c, std::span<const double> a, std::span<const double> b) {
    // Row 0 takes x_j from column j, row 1 takes b_j - x_j; a greedy fill by cost difference is exact.
    std::vector<std::size_t> order(b.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t p, std::size_t q) { return c(0, p) - c(1, p) < c(0, q) - c(1, q); });
    double left = a[0];
    double total = 0.0;
    for (auto j : order) {
        const double x = std::min(left, b[j]);
        left -= x;
        total += x * c(0, j) + (b[j] - x) * c(1, j);
    }
    return total;
}

}  // namespace

TEST_CASE("cost matrix construction") {
    const auto pipe = straight_pipe();
    const auto mu = DiscreteMeasure::uniform_on_graph({{EdgeId{0}, 0.2}});
    const auto nu = DiscreteMeasure::uniform_on_graph({{EdgeId{0}, 0.9}});
    const auto c = build_cost_matrix(mu, nu, GraphGroundCost{&pipe}, 2.0);
    CHECK(c(0, 0) == doctest::Approx(0.49));

    const auto three = DiscreteMeasure::uniform_on_graph({{EdgeId{0}, 0.1}, {EdgeId{0}, 0.5}, {EdgeId{0}, 1.0}});
    const auto self = build_cost_matrix(three, three, GraphGroundCost{&pipe}, 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(self(i, i) == 0.0);

    const auto tg = rasterize(pipe, 0.1, 0.025);
    const auto a = DiscreteMeasure::uniform_ambient({make_point(0.1, 0), make_point(0.3, 0.05)});
    const auto b = DiscreteMeasure::uniform_ambient({make_point(0.9, 0), make_point(0.6, -0.05)});
    const auto tube = build_cost_matrix(a, b, TubeGroundCost{&tg}, 2.0);
    const auto euclid = build_cost_matrix(a, b, EuclideanGroundCost{}, 2.0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(tube(i, j) - euclid(i, j)) <= 2 * 0.025 + 0.025 * 0.025);

    CHECK_THROWS_AS(build_cost_matrix(mu, a, EuclideanGroundCost{}, 2.0), DomainError);
}

TEST_CASE("solver examples") {
    const auto pipe = straight_pipe();
    const auto three = DiscreteMeasure::uniform_on_graph({{EdgeId{0}, 0.1}, {EdgeId{0}, 0.5}, {EdgeId{0}, 1.0}});
    const auto self = build_cost_matrix(three, three, GraphGroundCost{&pipe}, 1.0);
    const auto id = solve_ot(self, three, three);
    CHECK(id.plan.value == 0.0);
    for (const auto& e : id.plan.entries) CHECK(e.source == e.target);

    const auto c = line_cost({0.0, 1.0}, {0.25, 0.75});
    const std::vector<double> half{0.5, 0.5};
    const auto s = solve_ot(c, half, half);
    CHECK(s.plan.value == doctest::Approx(0.0625));
    CHECK(oracle::permutation_ot(c) == doctest::Approx(0.0625));
    check_certificate(c, s);

    Rng rng(1);
    const auto r = random_cost(rng, 3, 3);
    const std::vector<double> third(3, 1.0 / 3);
    CHECK(solve_ot(r, third, third).plan.value == doctest::Approx(oracle::permutation_ot(r)).epsilon(1e-12));
}

TEST_CASE("permutation oracle on uniform instances up to 7 atoms") {
    Rng rng(2);
    for (std::size_t n = 1; n <= 7; ++n)
        for (int t = 0; t < 10; ++t) {
            const auto c = random_cost(rng, n, n);
            const std::vector<double> w(n, 1.0 / static_cast<double>(n));
            const auto s = solve_ot(c, w, w);
            CHECK(s.used_assignment);
            CHECK(s.plan.value == doctest::Approx(oracle::permutation_ot(c)).epsilon(1e-12));
            check_marginals(s, w, w);
            check_certificate(c, s);
        }
}

TEST_CASE("general weights: transport solver") {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        const std::size_t m = 1 + rng.below(6);
        const std::size_t n = 1 + rng.below(6);
        const auto c = random_cost(rng, m, n);
        const auto a = random_weights(rng, m);
        const auto b = random_weights(rng, n);
        const auto s = solve_ot(c, a, b);
        if (m != n) CHECK_FALSE(s.used_assignment);
        check_marginals(s, a, b);
        check_certificate(c, s);
        double value = 0.0;
        for (const auto& e : s.plan.entries) value += e.mass * c(e.source, e.target);
        CHECK(std::abs(value - s.plan.value) <= 1e-8);
        if (m == 2) CHECK(s.plan.value == doctest::Approx(two_row_oracle(c, a, b)).epsilon(1e-10));
    }
}

TEST_CASE("uniform non-square instances use the transport solver") {
    Rng rng(4);
    const auto c = random_cost(rng, 3, 6);
    // Splitting each source into two half-atoms turns this into a 6 x 6 assignment.
    CostMatrix doubled(6, 6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) doubled(i, j) = c(i / 2, j);
    const std::vector<double> a(3, 1.0 / 3), b(6, 1.0 / 6);
    CHECK(solve_ot(c, a, b).plan.value == doctest::Approx(oracle::permutation_ot(doubled)).epsilon(1e-12));
}

TEST_CASE("infinite costs") {
    CostMatrix c(2, 2, 1.0);
    c(0, 1) = kInfinity;
    const std::vector<double> half{0.5, 0.5};
    const auto s = solve_ot(c, half, half);
    CHECK(s.plan.value == doctest::Approx(1.0));
    CHECK(s.certificate.gap <= 1e-6 * 2);

    CostMatrix row(2, 2, 1.0);
    row(1, 0) = row(1, 1) = kInfinity;
    try {
        solve_ot(row, half, half);
        FAIL("expected infeasibility");
    } catch (const InfeasibleError& e) {
        CHECK(std::string(e.what()).find("source atom 1") != std::string::npos);
    }

    // Finite entries exist but every feasible plan needs a forbidden one.
    CostMatrix forced(2, 2, 1.0);
    forced(0, 0) = kInfinity;
    const std::vector<double> heavy{0.8, 0.2};
    CHECK_THROWS_AS(solve_ot(forced, heavy, heavy), InfeasibleError);
}

TEST_CASE("cyclical monotonicity") {
    const auto c = line_cost({0.0, 1.0}, {0.25, 0.75});
    Coupling single;
    single.entries = {{0, 0, 1.0}};
    const auto one = check_cyclical_monotonicity(single, c, 1, 0, 1e-8);
    CHECK(one.violations == 0);
    CHECK(one.worst_margin == 0.0);

    Coupling crossing;
    crossing.entries = {{0, 1, 0.5}, {1, 0, 0.5}};
    const auto bad = check_cyclical_monotonicity(crossing, c, 2, 0, 1e-8);
    CHECK(bad.exhaustive);
    CHECK(bad.violations == 1);
    CHECK(bad.worst_margin == doctest::Approx(0.5));

    const std::vector<double> half{0.5, 0.5};
    const auto solved = solve_ot(c, half, half);
    CHECK(check_cyclical_monotonicity(solved.plan, c, 2, 0, 1e-8).violations == 0);

    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + rng.below(4);
        const auto r = random_cost(rng, n, n + 1);
        const auto s = solve_ot(r, random_weights(rng, n), random_weights(rng, n + 1));
        const auto rep = check_cyclical_monotonicity(s.plan, r, 8, 0, 1e-8);
        CHECK(rep.violations == 0);
        CHECK(rep.exhaustive == (s.plan.entries.size() <= 8));
    }
    // Sampled mode on a larger support.
    const auto big = random_cost(rng, 12, 12);
    const std::vector<double> w(12, 1.0 / 12);
    const auto sb = solve_ot(big, w, w);
    const auto rep = check_cyclical_monotonicity(sb.plan, big, 5, 2000, 1e-8, 3);
    CHECK_FALSE(rep.exhaustive);
    CHECK(rep.cycles_checked == 2000);
    CHECK(rep.violations == 0);
}

TEST_CASE("Wasserstein on graphs") {
    const auto pipe = straight_pipe();
    const auto x = DiscreteMeasure::uniform_on_graph({{EdgeId{0}, 0.2}});
    const auto y = DiscreteMeasure::uniform_on_graph({{EdgeId{0}, 0.9}});
    for (double p : {1.0, 2.0, 3.0}) {
        CHECK(wasserstein_p(pipe, x, y, p) == doctest::Approx(0.7));
        CHECK(wasserstein_p(pipe, x, x, p) == 0.0);
    }

    const auto g = y_network();
    const auto mu = DiscreteMeasure::uniform_on_graph({{EdgeId{0}, 0.1}, {EdgeId{0}, 0.6}, {EdgeId{1}, 0.3}, {EdgeId{2}, 0.9}});
    const auto nu = DiscreteMeasure::uniform_on_graph({{EdgeId{1}, 0.8}, {EdgeId{2}, 0.2}, {EdgeId{0}, 0.9}, {EdgeId{2}, 0.5}});
    CostMatrix c(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            c(i, j) = std::pow(oracle::point_distance(g, mu.graph_points()[i], nu.graph_points()[j]), 2.0);
    CHECK(wasserstein_p(g, mu, nu, 2.0) == doctest::Approx(std::sqrt(oracle::permutation_ot(c))).epsilon(1e-12));

    Rng rng(8);
    for (int t = 0; t < 30; ++t) {
        auto make = [&] {
            std::vector<GraphPoint> pts;
            for (int k = 0; k < 4; ++k) pts.push_back(oracle::random_point(rng, g));
            return DiscreteMeasure::on_graph(pts, random_weights(rng, 4));
        };
        const auto a = make();
        const auto b = make();
        const auto s = make();
        CHECK(wasserstein_p(g, a, b, 2.0) <= wasserstein_p(g, a, s, 2.0) + wasserstein_p(g, s, b, 2.0) + 1e-9);
    }
}

TEST_CASE("stability under edge deletion") {
    // Square with a diagonal; removing the diagonal lengthens some routes.
    MetricGraph g;
    const auto a = g.add_node("a");
    const auto b = g.add_node("b");
    const auto c = g.add_node("c");
    const auto d = g.add_node("d");
    g.add_edge("ab", a, b, 1.0);
    g.add_edge("bc", b, c, 1.0);
    g.add_edge("cd", c, d, 1.0);
    g.add_edge("da", d, a, 1.0);
    g.add_edge("ac", a, c, 1.2);

    const auto mu = DiscreteMeasure::uniform_on_graph({{EdgeId{0}, 0.2}, {EdgeId{0}, 0.7}, {EdgeId{3}, 0.5}, {EdgeId{1}, 0.1}});
    const auto nu = DiscreteMeasure::uniform_on_graph({{EdgeId{1}, 0.9}, {EdgeId{2}, 0.4}, {EdgeId{2}, 0.8}, {EdgeId{3}, 0.1}});

    const auto none = stability_experiment(g, mu, nu, {}, 2.0);
    CHECK(none.ot_after == none.ot_before);
    CHECK(none.bound_pi == 0.0);
    CHECK(none.bound_inf == 0.0);

    const auto r = stability_experiment(g, mu, nu, GraphEdit{{"ac"}, {}}, 2.0);
    CHECK(r.bounds_hold);
    CHECK(r.ot_after >= r.ot_before - 1e-12);
    CHECK(std::abs(r.ot_after - r.ot_before) <= r.bound_pi + 1e-8);
    CHECK(r.bound_pi <= r.bound_inf + 1e-8);
    CHECK(r.ot_before == doctest::Approx(oracle::permutation_ot(r.cost_before)).epsilon(1e-12));
    CHECK(r.ot_after == doctest::Approx(oracle::permutation_ot(r.cost_after)).epsilon(1e-12));

    CHECK_THROWS_AS(stability_experiment(g, mu, nu, GraphEdit{{"ab"}, {}}, 2.0), DomainError);
    MetricGraph path;
    const auto p = path.add_node("p");
    const auto q = path.add_node("q");
    const auto s = path.add_node("s");
    path.add_edge("pq", p, q, 1.0);
    path.add_edge("qs", q, s, 1.0);
    const auto m1 = DiscreteMeasure::uniform_on_graph({{EdgeId{0}, 0.0}});
    CHECK_THROWS_AS(stability_experiment(path, m1, m1, GraphEdit{{"qs"}, {}}, 2.0), DomainError);
}

TEST_CASE("assignment potentials") {
    Rng rng(9);
    const auto c = random_cost(rng, 5, 5);
    const auto asg = solve_assignment(c);
    double dual = 0.0;
    for (std::size_t i = 0; i < 5; ++i) dual += asg.row_potential[i] + asg.col_potential[i];
    CHECK(dual == doctest::Approx(asg.cost).epsilon(1e-12));
    CHECK(asg.cost / 5 == doctest::Approx(oracle::permutation_ot(c)).epsilon(1e-12));
}
