#include <cmath>
#include <set>

#include "doctest.h"
#include "got/geometry.hpp"
#include "got/networks.hpp"
#include "got/random.hpp"
#include "got/tube.hpp"
#include "oracles.hpp"

using namespace got;

namespace {

// Exact shortest in-tube length between the two arm ends of the L-bend: taut string around the inner corner.
double l_bend_exact(double arm, double eps) {
    const double leg = std::hypot(arm - eps, eps);
    return 2.0 * leg;
}


}  // namespace

TEST_CASE("rasterize single segment") {
    const auto pipe = straight_pipe();
    const double eps = 0.1;
    const double h = 0.025;
    const auto tg = rasterize(pipe, eps, h);
    CHECK(tg.dim() == 2);

    std::size_t count = 0;
    for (int i = -10; i <= 50; ++i)
        for (int j = -10; j <= 10; ++j) {
            const double x = (i + 0.5) * h;
            const double y = (j + 0.5) * h;
            const double dx = x < 0 ? -x : (x > 1 ? x - 1 : 0.0);
            if (std::hypot(dx, y) <= eps) ++count;
        }
    CHECK(tg.cell_count() == count);
    const double area = 1.0 * 2 * eps + M_PI * eps * eps;
    CHECK(std::abs(static_cast<double>(tg.cell_count()) - area / (h * h)) <= 0.05 * area / (h * h));

    for (TubeGrid::CellIndex c = 0; c < tg.cell_count(); ++c)
        CHECK(tg.distance_to_network(tg.centre(c)) <= eps + h * std::sqrt(2.0) / 2);
}

TEST_CASE("rasterize resolution errors") {
    CHECK_THROWS_AS(rasterize(straight_pipe(), 0.1, 0.06), ResolutionError);
    CHECK_THROWS_AS(rasterize(straight_pipe(), 0.0, 0.01), DomainError);
}

TEST_CASE("Y-junction mask is a single component") {
    const auto tg = rasterize(y_network(), 0.1, 0.0125);
    std::vector<char> seen(tg.cell_count(), 0);
    std::vector<TubeGrid::CellIndex> stack{0};
    seen[0] = 1;
    std::size_t reached = 0;
    while (!stack.empty()) {
        const auto c = stack.back();
        stack.pop_back();
        ++reached;
        const auto ijk = tg.cell_coords(c);
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) {
                const std::array<int, 3> n{ijk[0] + di, ijk[1] + dj, ijk[2]};
                if (!tg.mask_at(n)) continue;
                const auto k = tg.cell_at(n);
                if (!seen[k]) {
                    seen[k] = 1;
                    stack.push_back(k);
                }
            }
    }
    CHECK(reached == tg.cell_count());
}

TEST_CASE("tube cost basics") {
    const auto tg = rasterize(straight_pipe(), 0.1, 0.025);
    const Point x = make_point(0.1, 0);
    const Point y = make_point(0.9, 0);
    const double h = tg.spacing();
    CHECK(std::abs(tube_cost(tg, x, y) - 0.64) <= 2 * h * 0.8 + h * h);
    CHECK(tube_cost(tg, x, x) == 0.0);
    CHECK(std::isinf(tube_cost(tg, make_point(0.5, 0.5), y)));
}

TEST_CASE("tube cost on the L-bend converges to the taut-string length") {
    const auto bend = l_bend(0.5);
    const Point x = make_point(-0.5, 0);
    const Point y = make_point(0, -0.5);
    const double exact = l_bend_exact(0.5, 0.1);

    double previous = 0.0;
    for (double h : {0.02, 0.01, 0.005}) {
        const auto tg = rasterize(bend, 0.1, h);
        const double err = std::abs(tube_length(tg, x, y) - exact);
        CHECK(err <= 0.03 * exact);
        if (previous > 0.0) CHECK(err <= 0.6 * previous);
        previous = err;
    }
    // Refining by four is an independent estimate of the coarse value.
    const double coarse = tube_cost(rasterize(bend, 0.1, 0.02), x, y);
    const double fine = tube_cost(rasterize(bend, 0.1, 0.005), x, y);
    CHECK(std::abs(std::sqrt(coarse) - std::sqrt(fine)) <= 0.03 * std::sqrt(fine));
}

TEST_CASE("symmetry and triangle inequality") {
    const auto tg = rasterize(y_network(), 0.1, 0.0125);
    const auto m = sample_tube_measure(tg, 12, 9, SamplingProfile::uniform);
    const auto pts = m.ambient_points();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j) CHECK(tube_cost(tg, pts[i], pts[j]) == tube_cost(tg, pts[j], pts[i]));
    for (std::size_t i = 0; i + 2 < pts.size(); ++i) {
        const double a = tube_length(tg, pts[i], pts[i + 2]);
        const double b = tube_length(tg, pts[i], pts[i + 1]) + tube_length(tg, pts[i + 1], pts[i + 2]);
        CHECK(a <= b + 2 * tg.spacing());
    }
    const auto table = tube_cost_table(tg, pts.subspan(0, 3), pts.subspan(3, 4), 2.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(table[i * 4 + j] == tube_cost(tg, pts[i], pts[3 + j]));
}

TEST_CASE("pixel cost stencil") {
    const auto tg = rasterize(straight_pipe(), 0.1, 0.025);
    const double h = tg.spacing();
    const Point c = tg.centre(tg.snap(make_point(0.51, 0.01)).value());
    CHECK(pixel_cost(tg, c, c + make_point(h, 0)) == doctest::Approx(h * h));
    CHECK(pixel_cost(tg, c, c + make_point(h, h)) == doctest::Approx(2 * h * h));
    CHECK(pixel_cost(tg, c, c + make_point(-h, h)) == doctest::Approx(2 * h * h));
    CHECK(pixel_cost(tg, c, c) == 0.0);
}

TEST_CASE("trajectories") {
    const auto tg = rasterize(straight_pipe(), 0.1, 0.025);
    const auto src = DiscreteMeasure::ambient({make_point(0.1, 0), make_point(0.2, 0.05)}, {1.0, 0.0});
    const auto dst = DiscreteMeasure::ambient({make_point(0.9, 0), make_point(0.3, 0)}, {1.0, 0.0});
    Coupling plan;
    plan.entries = {{0, 0, 1.0}, {1, 1, 0.0}};
    const auto trajs = extract_trajectories(tg, src, dst, plan);
    REQUIRE(trajs.size() == 1);
    const auto& cells = trajs[0].cells;
    CHECK(cells.front() == tg.snap(make_point(0.1, 0)).value());
    CHECK(cells.back() == tg.snap(make_point(0.9, 0)).value());
    for (auto c : cells) CHECK(tg.cell_coords(c)[1] == tg.cell_coords(cells.front())[1]);
    for (std::size_t k = 1; k < cells.size(); ++k) {
        const auto a = tg.cell_coords(cells[k - 1]);
        const auto b = tg.cell_coords(cells[k]);
        CHECK(std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1])) == 1);
    }

    // Two sources on the stem routed to different arms share the stem corridor.
    const auto y = rasterize(y_network(), 0.1, 0.0125);
    const auto s2 = DiscreteMeasure::uniform_ambient({make_point(-0.9, 0.0), make_point(-0.8, 0.0)});
    const auto d2 = DiscreteMeasure::uniform_ambient({make_point(0.6, 0.6), make_point(0.6, -0.6)});
    Coupling cross;
    cross.entries = {{0, 0, 0.5}, {1, 1, 0.5}};
    for (auto w : {StepWeighting::squared_increment, StepWeighting::euclidean}) {
        const auto t2 = extract_trajectories(y, s2, d2, cross, w);
        REQUIRE(t2.size() == 2);
        const std::set<TubeGrid::CellIndex> first(t2[0].cells.begin(), t2[0].cells.end());
        std::size_t common = 0;
        for (auto c : t2[1].cells) common += first.count(c);
        CHECK(common > 0);
        CHECK(extract_trajectories(y, s2, d2, cross, w)[1].cells == t2[1].cells);
    }
}

TEST_CASE("cost gradient: straight pipe") {
    const auto tg = rasterize(straight_pipe(), 0.1, 0.025);
    const auto gc = cost_gradient_check(tg, make_point(0.2, 0), make_point(0.8, 0), 2 * tg.spacing());
    CHECK(gc.conclusive);
    CHECK(gc.numeric_gradient[0] == doctest::Approx(-1.2).epsilon(1e-6));
    CHECK(std::abs(gc.numeric_gradient[1]) <= 1e-9);
    CHECK(gc.discrepancy <= 10 * tg.spacing());
}

TEST_CASE("cost gradient: small transverse offset in a wide pipe") {
    const auto tg = rasterize(straight_pipe(), 0.3, 0.025);
    const Point x = make_point(0.5, -0.05);
    const Point y = make_point(0.5, 0.05);
    const auto gc = cost_gradient_check(tg, x, y, 0.01);
    CHECK(gc.conclusive);
    CHECK(gc.numeric_gradient[0] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(gc.numeric_gradient[1] == doctest::Approx(-0.2).epsilon(1e-6));
}

TEST_CASE("cost gradient: L-bend") {
    for (double h : {0.02, 0.01, 0.005}) {
        const auto tg = rasterize(l_bend(0.5), 0.1, h);
        const auto gc = cost_gradient_check(tg, make_point(-0.45, 0), make_point(0, -0.45), 4 * h);
        CHECK(gc.conclusive);
        CHECK(gc.discrepancy <= 10 * h);
    }
}

TEST_CASE("cost gradient: branching instances are inconclusive") {
    const auto tg = rasterize(oracle::square_loop(), 0.1, 0.025);
    const auto gc = cost_gradient_check(tg, make_point(0.0, 0.5), make_point(1.0, 0.5), 0.05);
    CHECK_FALSE(gc.conclusive);
}
