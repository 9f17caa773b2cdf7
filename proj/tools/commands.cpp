#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <thread>

#include "got/dynamic_ot.hpp"
#include "got/gradient_flow.hpp"
#include "got/networks.hpp"
#include "got/random.hpp"
#include "got/static_ot.hpp"
#include "got/tube.hpp"
#include "output.hpp"

namespace got::cli {

unsigned thread_budget() {
    if (const char* env = std::getenv("GOT_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// ---------------------------------------------------------------- config helpers

void check_keys(const JsonView& v, std::initializer_list<std::string_view> allowed) {
    if (!v.raw().is_object()) v.fail("expected an object");
    for (const auto& [key, _] : v.raw().items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) v.at(key).fail("unknown key");
}

double number_or(const JsonView& v, std::string_view key, double fallback) {
    return v.has(key) ? v.at(key).number() : fallback;
}

double positive_or(const JsonView& v, std::string_view key, double fallback) {
    return v.has(key) ? v.at(key).positive() : fallback;
}

std::size_t count_or(const JsonView& v, std::string_view key, std::size_t fallback) {
    if (!v.has(key)) return fallback;
    const long long n = v.at(key).integer();
    if (n < 0) v.at(key).fail("expected a nonnegative integer");
    return static_cast<std::size_t>(n);
}

std::string string_or(const JsonView& v, std::string_view key, std::string fallback) {
    return v.has(key) ? v.at(key).string() : fallback;
}

std::uint64_t resolve_seed(const JsonView& cfg, const RunContext& ctx, bool required) {
    if (ctx.seed) return *ctx.seed;
    if (cfg.has("seed")) {
        const long long s = cfg.at("seed").integer();
        if (s < 0) cfg.at("seed").fail("seed must be nonnegative");
        return static_cast<std::uint64_t>(s);
    }
    if (required) throw ConfigError("a seed is required for sampling (config key 'seed' or --seed)");
    return 0;
}

std::filesystem::path resolve(const RunContext& ctx, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : ctx.config_dir / path;
}

MetricGraph load_network(const JsonView& v, const RunContext& ctx) {
    check_keys(v, {"builtin", "file", "graph", "length", "arm", "stem"});
    if (v.has("graph")) return graph_from_json(v.at("graph"));
    if (v.has("file")) {
        const Json doc = read_json_file(resolve(ctx, v.at("file").string()));
        return graph_from_json(JsonView(doc));
    }
    const std::string kind = v.at("builtin").string();
    if (kind == "straight") return straight_pipe(positive_or(v, "length", 1.0));
    if (kind == "l_bend") return l_bend(positive_or(v, "arm", 0.5));
    if (kind == "y") return y_network(positive_or(v, "stem", 1.0), positive_or(v, "arm", 1.0));
    if (kind == "figure1") return figure1_network();
    v.at("builtin").fail("expected one of straight, l_bend, y, figure1");
}

EdgeId edge_named(const MetricGraph& g, const JsonView& v) {
    const auto e = g.find_edge(v.string());
    if (!e) v.fail("unknown edge '" + v.string() + "'");
    return *e;
}

GraphPoint uniform_graph_point(const MetricGraph& g, Rng& rng) {
    double s = rng.uniform() * g.total_length();
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const double len = g.edges()[e].length;
        if (s <= len || e + 1 == g.edge_count()) return {EdgeId{static_cast<std::uint32_t>(e)}, std::min(s, len)};
        s -= len;
    }
    return {EdgeId{0}, 0.0};
}

// {"file": path} or {"sample": {"count", "edges"?, "from"?, "to"?}}; sampled atoms carry equal weights.
DiscreteMeasure graph_measure(const JsonView& v, const MetricGraph& g, Rng& rng, const RunContext& ctx) {
    check_keys(v, {"file", "sample"});
    if (v.has("file")) {
        const Json doc = read_json_file(resolve(ctx, v.at("file").string()));
        const DiscreteMeasure m = measure_from_json(JsonView(doc), &g);
        if (m.kind() != MeasureKind::graph) v.at("file").fail("expected a graph measure");
        return m;
    }
    const JsonView s = v.at("sample");
    check_keys(s, {"count", "edges", "from", "to"});
    const std::size_t n = count_or(s, "count", 0);
    if (n == 0) s.at("count").fail("count must be positive");
    std::vector<GraphPoint> pts;
    if (s.has("edges")) {
        std::vector<EdgeId> edges;
        for (std::size_t i = 0; i < s.at("edges").size(); ++i) edges.push_back(edge_named(g, s.at("edges").at(i)));
        if (edges.empty()) s.at("edges").fail("at least one edge is required");
        for (std::size_t i = 0; i < n; ++i) {
            const EdgeId e = edges[i % edges.size()];
            const double len = g.edge(e).length;
            const double a = number_or(s, "from", 0.0), b = number_or(s, "to", len);
            if (!(0.0 <= a && a <= b && b <= len)) s.fail("sampling window outside the edge");
            pts.push_back({e, rng.uniform(a, b)});
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) pts.push_back(uniform_graph_point(g, rng));
    }
    return DiscreteMeasure::uniform_on_graph(std::move(pts));
}

bool needs_sampling(const JsonView& v) { return v.has("sample"); }

// Unit-mass cell densities: floor plus cos^2 bumps, optional node masses.
GraphState density_profile(const JsonView& v, const DynamicGrid& grid) {
    check_keys(v, {"floor", "bumps", "nodes"});
    const MetricGraph& g = grid.graph();
    GraphState s = GraphState::zero(grid);
    const double floor = number_or(v, "floor", 0.0);
    if (floor < 0.0) v.at("floor").fail("floor must be nonnegative");
    for (double& r : s.rho) r = floor;
    if (v.has("bumps")) {
        const JsonView bumps = v.at("bumps");
        for (std::size_t k = 0; k < bumps.size(); ++k) {
            const JsonView b = bumps.at(k);
            check_keys(b, {"edge", "centre", "width", "height"});
            const EdgeId e = edge_named(g, b.at("edge"));
            const double centre = b.at("centre").number();
            const double width = b.at("width").positive();
            const double height = positive_or(b, "height", 1.0);
            for (int i = 0; i < grid.cells(e.value); ++i) {
                const std::size_t c = grid.cell(e.value, i);
                const double r = (grid.centre(c) - centre) / width;
                if (std::abs(r) < 1.0) s.rho[c] += height * std::pow(std::cos(0.5 * std::acos(-1.0) * r), 2);
            }
        }
    }
    if (v.has("nodes")) {
        for (const auto& [name, mass] : v.at("nodes").raw().items()) {
            const auto node = g.find_node(name);
            if (!node) v.at("nodes").at(name).fail("unknown node");
            const double m = v.at("nodes").at(name).number();
            if (m < 0.0) v.at("nodes").at(name).fail("node mass must be nonnegative");
            s.gamma[node->value] = m;
        }
    }
    const double total = s.mass(grid);
    if (!(total > 0.0)) v.fail("profile has zero mass");
    for (double& r : s.rho) r /= total;
    for (double& m : s.gamma) m /= total;
    return s;
}

DynamicGrid make_grid(const JsonView& cfg, const MetricGraph& g, double default_dx) {
    if (cfg.has("cells")) {
        const JsonView c = cfg.at("cells");
        if (c.size() != g.edge_count()) c.fail("one cell count per edge is required");
        std::vector<int> cells;
        for (std::size_t i = 0; i < c.size(); ++i) {
            const long long n = c.at(i).integer();
            if (n < 1) c.at(i).fail("cell counts must be positive");
            cells.push_back(static_cast<int>(n));
        }
        return DynamicGrid(g, std::move(cells));
    }
    return DynamicGrid::uniform(g, positive_or(cfg, "dx", default_dx));
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void emit(const RunContext& ctx, const std::string& name, std::string_view content) {
    if (ctx.write_files) write_file_atomic(ctx.out_dir / name, content);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- geometry helpers

Point lateral_direction(const MetricGraph& g, const GraphPoint& p) {
    const double len = g.edge(p.edge).length;
    const double d = 1e-6 * len;
    const double a = std::max(0.0, p.coord - d), b = std::min(len, p.coord + d);
    Point t = embed_point(g, {p.edge, b}) - embed_point(g, {p.edge, a});
    t = (1.0 / norm(t)) * t;
    Point n = make_point(-t[1], t[0], 0.0);
    if (norm(n) < 1e-9) n = make_point(0.0, -t[2], t[1]);
    return (1.0 / norm(n)) * n;
}

// Embedded point shifted sideways by `offset`.
Point lifted(const MetricGraph& g, const GraphPoint& p, double offset) {
    return embed_point(g, p) + offset * lateral_direction(g, p);
}

double graph_diameter(const MetricGraph& g) {
    std::vector<GraphPoint> pts;
    for (std::size_t v = 0; v < g.node_count(); ++v) pts.push_back(point_at_node(g, NodeId{static_cast<std::uint32_t>(v)}));
    for (std::size_t e = 0; e < g.edge_count(); ++e)
        pts.push_back({EdgeId{static_cast<std::uint32_t>(e)}, 0.5 * g.edges()[e].length});
    const auto d = distance_table(g, pts, pts);
    return *std::max_element(d.begin(), d.end());
}

double loglog_slope(const std::vector<ConvergeRow>& rows) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        const double x = std::log(r.epsilon), y = std::log(r.gap);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    return den > 0 ? (n * sxy - sx * sy) / den : 0.0;
}

std::string pgm(const TubeGrid& tg) {
    const auto shape = tg.shape();
    const int w = shape[0], h = shape[1] * shape[2];
    std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    // z slices stacked vertically, each with y decreasing downwards.
    for (int k = 0; k < shape[2]; ++k)
        for (int j = shape[1] - 1; j >= 0; --j)
            for (int i = 0; i < w; ++i) out.push_back(tg.mask_at({i, j, k}) ? static_cast<char>(255) : '\0');
    return out;
}

}  // namespace

// ---------------------------------------------------------------- converge

ConvergeReport cmd_converge(const Json& config, const RunContext& ctx) {
    const auto start = std::chrono::steady_clock::now();
    const JsonView cfg(config);
    check_keys(cfg, {"network", "epsilons", "h_ratio", "atoms", "p", "seed", "source", "target", "spread",
                     "sandwich_pairs"});
    const MetricGraph g = load_network(cfg.at("network"), ctx);
    if (!g.has_embedding()) cfg.at("network").fail("the network needs an embedding");
    std::vector<double> eps;
    const JsonView el = cfg.at("epsilons");
    for (std::size_t i = 0; i < el.size(); ++i) {
        eps.push_back(el.at(i).positive());
        if (i && !(eps[i] < eps[i - 1])) el.at(i).fail("epsilons must be strictly decreasing");
    }
    if (eps.empty()) el.fail("at least one epsilon is required");
    const double ratio = positive_or(cfg, "h_ratio", 8.0);
    const std::size_t atoms = count_or(cfg, "atoms", 40);
    if (atoms == 0) cfg.at("atoms").fail("atoms must be positive");
    const double p = positive_or(cfg, "p", 2.0);
    const double spread = number_or(cfg, "spread", 0.8);
    if (spread < 0.0 || spread >= 1.0) cfg.at("spread").fail("spread must lie in [0, 1)");
    const std::size_t pairs = count_or(cfg, "sandwich_pairs", 200);

    ConvergeReport report;
    report.seed = resolve_seed(cfg, ctx, true);
    Rng rng(report.seed);

    auto window = [&](std::string_view key) {
        const JsonView w = cfg.at(key);
        check_keys(w, {"edge", "from", "to"});
        const EdgeId e = edge_named(g, w.at("edge"));
        const double len = g.edge(e).length;
        const double a = number_or(w, "from", 0.0), b = number_or(w, "to", len);
        if (!(0.0 <= a && a <= b && b <= len)) w.fail("sampling window outside the edge");
        std::vector<GraphPoint> pts;
        std::vector<double> offsets;
        for (std::size_t i = 0; i < atoms; ++i) {
            pts.push_back({e, rng.uniform(a, b)});
            offsets.push_back(rng.uniform(-1.0, 1.0));
        }
        return std::pair{pts, offsets};
    };
    const auto [src, src_off] = window("source");
    const auto [dst, dst_off] = window("target");
    const double diameter = graph_diameter(g);

    struct PairSample {
        double c0, ce;
    };
    std::vector<ConvergeRow> rows(eps.size());
    std::vector<std::vector<PairSample>> calibration(eps.size()), test(eps.size());
    std::vector<double> spacings(eps.size());
    std::vector<std::optional<TubeGrid>> tubes(eps.size());

    parallel_for(eps.size(), ctx.threads, [&](std::size_t k) {
        const double e = eps[k];
        const double h = e / ratio;
        tubes[k] = rasterize(g, e, h);
        const TubeGrid& tg = *tubes[k];
        std::vector<Point> a, b;
        for (std::size_t i = 0; i < atoms; ++i) {
            a.push_back(lifted(g, src[i], spread * e * src_off[i]));
            b.push_back(lifted(g, dst[i], spread * e * dst_off[i]));
        }
        const auto ma = DiscreteMeasure::uniform_ambient(a), mb = DiscreteMeasure::uniform_ambient(b);
        const OtSolution tube = solve_ot(build_cost_matrix(ma, mb, TubeGroundCost{&tg}, p), ma, mb);
        const auto pa = project_measure(g, ma), pb = project_measure(g, mb);
        const OtSolution graph = solve_ot(build_cost_matrix(pa, pb, GraphGroundCost{&g}, p), pa, pb);
        rows[k] = {e, h, tg.cell_count(), tube.plan.value, graph.plan.value,
                   std::abs(tube.plan.value - graph.plan.value)};
        spacings[k] = h;
    });
    const auto ot_done = std::chrono::steady_clock::now();
    report.seconds = std::chrono::duration<double>(ot_done - start).count();

    // Cost sandwich on independent point pairs; set 0 calibrates the constant, set 1 is tested.
    if (pairs > 0)
        parallel_for(2 * eps.size(), ctx.threads, [&](std::size_t task) {
            const std::size_t k = task / 2, set = task % 2;
            const double e = eps[k];
            const TubeGrid& tg = *tubes[k];
            Rng prng(report.seed * 7919 + 104729 * (k + 1) + set);
            auto& out = set == 0 ? calibration[k] : test[k];
            while (out.size() < pairs) {
                const GraphPoint gx = uniform_graph_point(g, prng), gy = uniform_graph_point(g, prng);
                const Point x = lifted(g, gx, spread * e * prng.uniform(-1.0, 1.0));
                const Point y = lifted(g, gy, spread * e * prng.uniform(-1.0, 1.0));
                if (!tg.contains(x) || !tg.contains(y)) continue;
                const double c0 = std::pow(graph_distance(g, project_to_graph(g, x), project_to_graph(g, y)), p);
                out.push_back({c0, std::pow(tube_length(tg, x, y), p)});
            }
        });

    report.rows = rows;
    report.monotone = true;
    for (std::size_t k = 1; k < rows.size(); ++k) report.monotone = report.monotone && rows[k].gap < rows[k - 1].gap;
    report.slope = rows.size() > 1 ? loglog_slope(rows) : 0.0;

    if (pairs > 0) {
        SandwichReport s;
        s.diameter = diameter;
        for (std::size_t k = 0; k < eps.size(); ++k)
            for (const auto& c : calibration[k]) {
                const double slack = 4.0 * spacings[k] * diameter;
                s.fitted_k = std::max(s.fitted_k, (c.c0 - c.ce - slack) / (eps[k] * eps[k]));
            }
        for (std::size_t k = 0; k < eps.size(); ++k) {
            SandwichRow row{eps[k], test[k].size(), 0};
            const double e2 = eps[k] * eps[k], slack = 4.0 * spacings[k] * diameter;
            for (const auto& c : test[k])
                if (c.c0 - s.fitted_k * e2 - slack <= c.ce && c.ce <= c.c0 + 2.0 * e2 + slack) ++row.within;
            s.rows.push_back(row);
        }
        report.sandwich = s;
    }
    report.sandwich_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - ot_done).count();

    CsvWriter csv(report.seed, {"epsilon", "h", "cells", "ot_eps", "ot_0", "abs_diff"});
    for (const auto& r : rows) {
        csv.cell(r.epsilon).cell(r.spacing).cell(static_cast<long long>(r.cells)).cell(r.ot_tube).cell(r.ot_graph).cell(r.gap);
        csv.end_row();
    }
    Json summary{{"seed", report.seed},     {"slope", report.slope}, {"monotone", report.monotone},
                 {"atoms", atoms},          {"h_ratio", ratio},      {"p", p},
                 {"seconds", report.seconds},
                 {"sandwich_seconds", report.sandwich_seconds}};
    if (report.sandwich) {
        CsvWriter sw(report.seed, {"epsilon", "pairs", "within", "fraction"});
        Json rows_json = Json::array();
        for (const auto& r : report.sandwich->rows) {
            sw.cell(r.epsilon).cell(static_cast<long long>(r.pairs)).cell(static_cast<long long>(r.within)).cell(r.fraction());
            sw.end_row();
            rows_json.push_back(Json{{"epsilon", r.epsilon}, {"pairs", r.pairs}, {"fraction", r.fraction()}});
        }
        summary["sandwich"] = Json{{"fitted_k", report.sandwich->fitted_k},
                                   {"diameter", report.sandwich->diameter},
                                   {"rows", rows_json}};
        emit(ctx, "sandwich.csv", sw.str());
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) pts.emplace_back(r.epsilon, r.gap);
    emit(ctx, "converge.csv", csv.str());
    emit(ctx, "converge.svg", line_chart({pts}, {"|OT_eps - OT_0|"}, true, true, report.seed,
                                         "Tube-to-graph convergence", "epsilon", "absolute gap"));
    emit(ctx, "converge.json", dump(summary));
    return report;
}

// ---------------------------------------------------------------- figure 1

Figure1Report cmd_figure1(const Json& config, const RunContext& ctx) {
    const JsonView cfg(config);
    check_keys(cfg, {"network", "epsilon", "h", "seed", "sources", "targets", "weighting"});
    const MetricGraph g = cfg.has("network") ? load_network(cfg.at("network"), ctx) : figure1_network();
    if (!g.has_embedding()) cfg.at("network").fail("the network needs an embedding");
    const double eps = positive_or(cfg, "epsilon", 0.1);
    const double h = positive_or(cfg, "h", 0.02);
    const std::string weighting_name = string_or(cfg, "weighting", "squared_increment");
    StepWeighting weighting = StepWeighting::squared_increment;
    if (weighting_name == "euclidean") {
        weighting = StepWeighting::euclidean;
    } else if (weighting_name != "squared_increment") {
        cfg.at("weighting").fail("expected squared_increment or euclidean");
    }

    Figure1Report report;
    report.seed = resolve_seed(cfg, ctx, true);
    Rng rng(report.seed);
    const TubeGrid tg = rasterize(g, eps, h, 2);

    auto clusters = [&](std::string_view key) {
        std::vector<Point> pts;
        const JsonView list = cfg.at(key);
        for (std::size_t k = 0; k < list.size(); ++k) {
            const JsonView c = list.at(k);
            check_keys(c, {"count", "centre", "radius"});
            const std::size_t n = count_or(c, "count", 0);
            const double cx = c.at("centre").at(0).number(), cy = c.at("centre").at(1).number();
            const double r = c.at("radius").positive();
            for (std::size_t i = 0; i < n; ++i) {
                bool placed = false;
                for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
                    const double rad = r * std::sqrt(rng.uniform());
                    const double ang = 2.0 * std::acos(-1.0) * rng.uniform();
                    const Point q = make_point(cx + rad * std::cos(ang), cy + rad * std::sin(ang));
                    if (tg.contains(q)) {
                        pts.push_back(q);
                        placed = true;
                    }
                }
                if (!placed) c.fail("cluster does not overlap the tube");
            }
        }
        if (pts.empty()) list.fail("at least one point is required");
        return pts;
    };
    const auto xs = clusters("sources");
    const auto ys = clusters("targets");
    const auto src = DiscreteMeasure::uniform_ambient(xs);
    const auto dst = DiscreteMeasure::uniform_ambient(ys);

    const CostMatrix cost(xs.size(), ys.size(), pixel_cost_table(tg, xs, ys, weighting));
    const OtSolution sol = solve_ot(cost, src, dst);
    report.assignment_cost = sol.plan.value;
    const auto trajectories = extract_trajectories(tg, src, dst, sol.plan, weighting);
    report.trajectories = trajectories.size();

    std::map<TubeGrid::CellIndex, std::size_t> visits;
    for (const auto& t : trajectories) {
        bool inside = true;
        for (auto c : t.cells) inside = inside && c < tg.cell_count() && tg.contains(tg.centre(c));
        if (inside) ++report.contained;
        std::set<TubeGrid::CellIndex> interior;
        for (std::size_t s = 1; s + 1 < t.cells.size(); ++s) interior.insert(t.cells[s]);
        for (auto c : interior) ++visits[c];
    }
    for (const auto& [cell, n] : visits) {
        if (n >= 2) ++report.shared_cells;
        report.max_sharing = std::max(report.max_sharing, n);
    }

    CsvWriter csv(report.seed, {"trajectory", "source", "target", "step", "cell", "x", "y"});
    for (std::size_t k = 0; k < trajectories.size(); ++k)
        for (std::size_t s = 0; s < trajectories[k].cells.size(); ++s) {
            const Point c = tg.centre(trajectories[k].cells[s]);
            csv.cell(static_cast<long long>(k))
                .cell(static_cast<long long>(trajectories[k].source))
                .cell(static_cast<long long>(trajectories[k].target))
                .cell(static_cast<long long>(s))
                .cell(static_cast<long long>(trajectories[k].cells[s]))
                .cell(c[0])
                .cell(c[1]);
            csv.end_row();
        }
    report.csv = csv.str();

    double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
    for (std::size_t c = 0; c < tg.cell_count(); ++c) {
        const Point q = tg.centre(static_cast<TubeGrid::CellIndex>(c));
        x0 = std::min(x0, q[0]);
        x1 = std::max(x1, q[0]);
        y0 = std::min(y0, q[1]);
        y1 = std::max(y1, q[1]);
    }
    SvgCanvas svg(x0 - 2 * h, y0 - 2 * h, x1 + 2 * h, y1 + 2 * h, 400.0, report.seed,
                  "Matched trajectories in the rasterized network (reconstructed geometry)");
    for (std::size_t c = 0; c < tg.cell_count(); ++c) {
        const Point q = tg.centre(static_cast<TubeGrid::CellIndex>(c));
        svg.rect(q[0] - h / 2, q[1] - h / 2, h, h, "#e4e4e4");
    }
    for (const auto& t : trajectories) {
        std::vector<std::pair<double, double>> line;
        for (auto c : t.cells) line.emplace_back(tg.centre(c)[0], tg.centre(c)[1]);
        svg.polyline(line, "#1f4e9c", 1.2, 0.6);
    }
    for (const auto& q : xs) svg.circle(q[0], q[1], 2.5, "#2ca02c");
    for (const auto& q : ys) svg.circle(q[0], q[1], 2.5, "#d62728");

    emit(ctx, "figure1_trajectories.csv", report.csv);
    emit(ctx, "figure1.svg", svg.str());
    emit(ctx, "figure1_mask.pgm", pgm(tg));
    emit(ctx, "figure1_mask.json",
         dump(Json{{"seed", report.seed},
                   {"h", h},
                   {"epsilon", eps},
                   {"origin", {tg.origin()[0], tg.origin()[1]}},
                   {"shape", {tg.shape()[0], tg.shape()[1]}},
                   {"note", "origin is the centre of raster cell (0, 0); rows run top to bottom"}}));
    emit(ctx, "figure1_summary.json",
         dump(Json{{"seed", report.seed},
                   {"trajectories", report.trajectories},
                   {"contained", report.contained},
                   {"shared_interior_cells", report.shared_cells},
                   {"max_sharing", report.max_sharing},
                   {"assignment_cost", report.assignment_cost},
                   {"network", "reconstructed junction geometry"}}));
    if (report.contained != report.trajectories) throw CheckFailure("a trajectory leaves the mask");
    return report;
}

// ---------------------------------------------------------------- stability

StabilityReport cmd_stability(const Json& config, const RunContext& ctx) {
    const JsonView cfg(config);
    check_keys(cfg, {"network", "source", "target", "p", "seed", "edits"});
    const MetricGraph g = load_network(cfg.at("network"), ctx);
    const bool sampled = needs_sampling(cfg.at("source")) || needs_sampling(cfg.at("target"));
    const std::uint64_t seed = resolve_seed(cfg, ctx, sampled);
    Rng rng(seed);
    const auto mu = graph_measure(cfg.at("source"), g, rng, ctx);
    const auto nu = graph_measure(cfg.at("target"), g, rng, ctx);
    const double p = positive_or(cfg, "p", 2.0);

    StabilityReport report;
    Json rows = Json::array();
    CsvWriter csv(seed, {"edit", "ot_before", "ot_after", "abs_change", "witness_bound", "sup_bound", "holds"});
    const JsonView edits = cfg.at("edits");
    for (std::size_t k = 0; k < edits.size(); ++k) {
        const JsonView ev = edits.at(k);
        check_keys(ev, {"label", "remove", "add"});
        GraphEdit edit;
        if (ev.has("remove"))
            for (std::size_t i = 0; i < ev.at("remove").size(); ++i) edit.remove.push_back(ev.at("remove").at(i).string());
        if (ev.has("add"))
            for (std::size_t i = 0; i < ev.at("add").size(); ++i) {
                const JsonView a = ev.at("add").at(i);
                check_keys(a, {"id", "tail", "head", "length"});
                edit.add.push_back({a.at("id").string(), a.at("tail").string(), a.at("head").string(),
                                    a.at("length").positive()});
            }
        std::string label = ev.has("label") ? ev.at("label").string() : "edit " + std::to_string(k);
        StabilityResult r;
        try {
            r = stability_experiment(g, mu, nu, edit, p);
        } catch (const InfeasibleError&) {
            throw;
        } catch (const DomainError& e) {
            throw ConfigError("at " + ev.where() + ": " + e.what());
        }
        const StabilityRow row{label, r.ot_before, r.ot_after, r.bound_pi, r.bound_inf, r.bounds_hold};
        report.rows.push_back(row);
        csv.cell(label).cell(r.ot_before).cell(r.ot_after).cell(std::abs(r.ot_after - r.ot_before))
            .cell(r.bound_pi).cell(r.bound_inf).cell(r.bounds_hold ? "yes" : "no");
        csv.end_row();
        rows.push_back(Json{{"edit", label},
                            {"ot_before", r.ot_before},
                            {"ot_after", r.ot_after},
                            {"witness_bound", r.bound_pi},
                            {"sup_bound", r.bound_inf},
                            {"holds", r.bounds_hold}});
    }
    emit(ctx, "stability.csv", csv.str());
    emit(ctx, "stability.json", dump(Json{{"seed", seed}, {"p", p}, {"edits", rows}}));
    for (const auto& r : report.rows)
        if (!r.holds) throw CheckFailure("stability bounds fail for " + r.label);
    return report;
}

// ---------------------------------------------------------------- monotonicity

MonotonicityCommandReport cmd_monotonicity(const Json& config, const RunContext& ctx) {
    const JsonView cfg(config);
    check_keys(cfg, {"network", "source", "target", "p", "seed", "delta", "max_cycle", "trials"});
    const MetricGraph g = load_network(cfg.at("network"), ctx);
    const bool sampled = needs_sampling(cfg.at("source")) || needs_sampling(cfg.at("target"));
    const std::uint64_t seed = resolve_seed(cfg, ctx, sampled);
    Rng rng(seed);
    const auto mu = graph_measure(cfg.at("source"), g, rng, ctx);
    const auto nu = graph_measure(cfg.at("target"), g, rng, ctx);
    const double p = positive_or(cfg, "p", 2.0);
    const double delta = number_or(cfg, "delta", 1e-8);
    const std::size_t max_cycle = count_or(cfg, "max_cycle", 8);
    if (max_cycle < 2) cfg.at("max_cycle").fail("cycles need at least two entries");
    const std::size_t trials = count_or(cfg, "trials", 20000);

    const CostMatrix c = build_cost_matrix(mu, nu, GraphGroundCost{&g}, p);
    const OtSolution sol = solve_ot(c, mu, nu);
    const MonotonicityReport m = check_cyclical_monotonicity(sol.plan, c, max_cycle, trials, delta, seed);
    const auto slack = complementary_slackness(c, sol);

    Json doc = otresult_to_json(sol, &m);
    doc["seed"] = seed;
    doc["slackness_violations"] = slack.violations;
    emit(ctx, "otresult.json", dump(doc));
    MonotonicityCommandReport out{sol.plan.value, sol.certificate.gap, m.violations, m.cycles_checked, m.exhaustive};
    if (m.violations > 0) throw CheckFailure("the solved coupling has " + std::to_string(m.violations) + " violating cycles");
    return out;
}

// ---------------------------------------------------------------- dynamic

DynamicReport cmd_dynamic(const Json& config, const RunContext& ctx) {
    const JsonView cfg(config);
    check_keys(cfg, {"network", "dx", "cells", "time_steps", "p", "variant", "from", "to", "tolerance",
                     "max_iterations", "seed"});
    const MetricGraph g = load_network(cfg.at("network"), ctx);
    const DynamicGrid grid = make_grid(cfg, g, 1.0 / 64.0);
    const std::uint64_t seed = resolve_seed(cfg, ctx, false);
    ActionSpec spec;
    spec.p = positive_or(cfg, "p", 2.0);
    const std::string variant = string_or(cfg, "variant", "kirchhoff");
    if (variant == "kirchhoff") {
        spec.variant = FlowVariant::kirchhoff;
    } else if (variant == "reservoir_net") {
        spec.variant = FlowVariant::reservoir_net;
    } else if (variant == "reservoir_per_edge") {
        spec.variant = FlowVariant::reservoir_per_edge;
    } else {
        cfg.at("variant").fail("expected kirchhoff, reservoir_net or reservoir_per_edge");
    }
    SolverOptions opts;
    opts.time_steps = static_cast<int>(count_or(cfg, "time_steps", 32));
    if (opts.time_steps < 1) cfg.at("time_steps").fail("time_steps must be positive");
    opts.tolerance = positive_or(cfg, "tolerance", 1e-5);
    opts.max_iterations = count_or(cfg, "max_iterations", 100000);
    const GraphState from = density_profile(cfg.at("from"), grid);
    const GraphState to = density_profile(cfg.at("to"), grid);

    const ActionResult r = minimize_action(grid, from, to, spec, opts);

    // Static oracle on the atomized densities.
    std::vector<GraphPoint> pts;
    std::vector<double> wa, wb;
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        pts.push_back({EdgeId{static_cast<std::uint32_t>(grid.edge_of_cell(c))}, grid.centre(c)});
        wa.push_back(from.rho[c] * grid.cell_width(c));
        wb.push_back(to.rho[c] * grid.cell_width(c));
    }
    for (std::size_t v = 0; v < grid.node_count(); ++v) {
        pts.push_back(point_at_node(g, NodeId{static_cast<std::uint32_t>(v)}));
        wa.push_back(from.gamma[v]);
        wb.push_back(to.gamma[v]);
    }
    const double static_value = wasserstein_p(g, DiscreteMeasure::on_graph(pts, wa), DiscreteMeasure::on_graph(pts, wb), spec.p);

    const std::size_t T = r.field.steps();
    CsvWriter field(seed, {"edge", "cell", "t", "rho", "j"});
    for (std::size_t k = 0; k <= T; ++k) {
        for (std::size_t e = 0; e < grid.edge_count(); ++e)
            for (int i = 0; i < grid.cells(e); ++i) {
                // Flux at the cell centre, averaged over the neighbouring time intervals.
                double j = 0.0;
                int n = 0;
                for (std::size_t m : {k == 0 ? 0 : k - 1, std::min(k, T - 1)}) {
                    j += 0.5 * (r.field.flux[m][grid.face(e, i)] + r.field.flux[m][grid.face(e, i + 1)]);
                    ++n;
                }
                field.cell(g.edges()[e].name).cell(static_cast<long long>(i)).cell(static_cast<double>(k) / T)
                    .cell(r.field.levels[k].rho[grid.cell(e, i)]).cell(j / n);
                field.end_row();
            }
    }
    CsvWriter nodes(seed, {"v", "t", "gamma"});
    for (std::size_t k = 0; k <= T; ++k)
        for (std::size_t v = 0; v < grid.node_count(); ++v) {
            nodes.cell(g.node_name(NodeId{static_cast<std::uint32_t>(v)})).cell(static_cast<double>(k) / T)
                .cell(r.field.levels[k].gamma[v]);
            nodes.end_row();
        }
    std::string log = "iteration primal_residual dual_residual action\n";
    for (const auto& rec : r.log)
        log += std::to_string(rec.iteration) + " " + num(rec.primal_residual) + " " + num(rec.dual_residual) + " " +
               num(rec.action) + "\n";

    emit(ctx, "field.csv", field.str());
    emit(ctx, "nodes.csv", nodes.str());
    emit(ctx, "solver_log.txt", log);
    emit(ctx, "dynamic.json", dump(Json{{"seed", seed},
                                        {"variant", variant},
                                        {"p", spec.p},
                                        {"value", r.value},
                                        {"action", r.action},
                                        {"static_value", static_value},
                                        {"relative_difference", std::abs(r.value - static_value) / static_value},
                                        {"iterations", r.iterations},
                                        {"kkt_residual", r.kkt_residual},
                                        {"cells", grid.cell_count()},
                                        {"time_steps", T}}));
    return {r.value, static_value, r.iterations, r.kkt_residual};
}

// ---------------------------------------------------------------- JKO

JkoReport cmd_jko(const Json& config, const RunContext& ctx) {
    const JsonView cfg(config);
    check_keys(cfg, {"network", "dx", "cells", "tau", "steps", "p", "energy", "initial", "inner_time_steps", "seed"});
    const MetricGraph g = load_network(cfg.at("network"), ctx);
    const DynamicGrid grid = make_grid(cfg, g, 0.05);
    const std::uint64_t seed = resolve_seed(cfg, ctx, false);
    const double tau = cfg.at("tau").positive();
    const std::size_t steps = count_or(cfg, "steps", 10);
    const double p = positive_or(cfg, "p", 2.0);
    JkoOptions opts;
    opts.inner.time_steps = static_cast<int>(count_or(cfg, "inner_time_steps", 4));
    if (opts.inner.time_steps < 1) cfg.at("inner_time_steps").fail("inner_time_steps must be positive");

    const JsonView ev = cfg.at("energy");
    check_keys(ev, {"kind", "reference", "potential_slope", "interaction", "pressure", "gravity", "pipes"});
    EnergySpec energy_spec;
    const std::string kind = ev.at("kind").string();
    if (kind == "log_entropy") {
        energy_spec.kind = EnergyKind::log_entropy;
        if (ev.has("potential_slope")) {
            const double slope = ev.at("potential_slope").number();
            energy_spec.potential.resize(grid.cell_count());
            for (std::size_t c = 0; c < grid.cell_count(); ++c) energy_spec.potential[c] = slope * grid.centre(c);
        }
        if (ev.has("interaction")) {
            const JsonView iv = ev.at("interaction");
            check_keys(iv, {"strength", "range"});
            const double strength = iv.at("strength").number();
            const double range = iv.at("range").positive();
            energy_spec.interaction = [strength, range](double d) { return strength * std::exp(-d * d / (range * range)); };
        }
    } else if (kind == "relative_entropy") {
        energy_spec.kind = EnergyKind::relative_entropy;
        energy_spec.reference = density_profile(ev.at("reference"), grid);
    } else if (kind == "iso3") {
        energy_spec.kind = EnergyKind::iso3;
        if (ev.has("pressure")) {
            const JsonView pv = ev.at("pressure");
            check_keys(pv, {"coefficient", "exponent"});
            energy_spec.pressure = {positive_or(pv, "coefficient", 1.0), positive_or(pv, "exponent", 1.0)};
        }
        energy_spec.gravity = number_or(ev, "gravity", 9.81);
        energy_spec.pipes.assign(grid.edge_count(), PipeParameters{});
        if (ev.has("pipes")) {
            const JsonView list = ev.at("pipes");
            for (std::size_t i = 0; i < list.size(); ++i) {
                const JsonView pv = list.at(i);
                check_keys(pv, {"edge", "diffusion", "friction", "inclination", "offset"});
                PipeParameters& pp = energy_spec.pipes[edge_named(g, pv.at("edge")).value];
                pp.diffusion = positive_or(pv, "diffusion", pp.diffusion);
                pp.friction = positive_or(pv, "friction", pp.friction);
                pp.inclination = number_or(pv, "inclination", pp.inclination);
                pp.offset = number_or(pv, "offset", pp.offset);
            }
        }
    } else {
        ev.at("kind").fail("expected log_entropy, relative_entropy or iso3");
    }
    const GraphState initial = density_profile(cfg.at("initial"), grid);
    for (double gm : initial.gamma)
        if (gm != 0.0) cfg.at("initial").fail("node masses are not supported here");

    const FlowResult flow = run_flow(grid, initial, tau, steps, p, energy_spec, opts);

    JkoReport report;
    report.monotone = true;
    CsvWriter traj(seed, {"step", "edge", "cell", "rho"});
    CsvWriter log(seed, {"step", "E", "W_inner", "mass"});
    std::vector<std::pair<double, double>> curve;
    for (std::size_t k = 0; k < flow.states.size(); ++k) {
        for (std::size_t e = 0; e < grid.edge_count(); ++e)
            for (int i = 0; i < grid.cells(e); ++i) {
                traj.cell(static_cast<long long>(k)).cell(g.edges()[e].name).cell(static_cast<long long>(i))
                    .cell(flow.states[k].rho[grid.cell(e, i)]);
                traj.end_row();
            }
        const FlowRecord& rec = flow.log[k];
        log.cell(static_cast<long long>(rec.step)).cell(rec.energy).cell(rec.transport).cell(rec.mass);
        log.end_row();
        report.energy.push_back(rec.energy);
        report.mass.push_back(rec.mass);
        curve.emplace_back(static_cast<double>(k), rec.energy);
        if (k > 0 && rec.energy > flow.log[k - 1].energy + 1e-6) report.monotone = false;
    }
    emit(ctx, "trajectory.csv", traj.str());
    emit(ctx, "energy.csv", log.str());
    emit(ctx, "energy.svg", line_chart({curve}, {"energy"}, false, false, seed, "Minimizing-movement energy log",
                                       "step", "energy"));
    emit(ctx, "jko.json", dump(Json{{"seed", seed},
                                    {"energy_kind", kind},
                                    {"tau", tau},
                                    {"p", p},
                                    {"steps", steps},
                                    {"monotone", report.monotone},
                                    {"final_energy", report.energy.back()}}));
    if (!report.monotone) throw CheckFailure("energy increased along the flow");
    return report;
}

// ---------------------------------------------------------------- defaults

Json default_config(const std::string& command) {
    if (command == "converge")
        return Json::parse(R"({
  "network": {"builtin": "y", "stem": 2.0, "arm": 2.0},
  "epsilons": [0.2, 0.1, 0.05],
  "h_ratio": 8,
  "atoms": 40,
  "p": 2,
  "seed": 1,
  "source": {"edge": "upper", "from": 1.3, "to": 2.0},
  "target": {"edge": "lower", "from": 1.3, "to": 2.0},
  "spread": 0.8,
  "sandwich_pairs": 200
})");
    if (command == "figure1")
        return Json::parse(R"({
  "network": {"builtin": "figure1"},
  "epsilon": 0.1,
  "h": 0.02,
  "seed": 7,
  "sources": [{"count": 50, "centre": [0.15, 0.0], "radius": 0.12}],
  "targets": [{"count": 25, "centre": [1.85, 0.4], "radius": 0.12},
              {"count": 25, "centre": [1.85, -0.4], "radius": 0.12}],
  "weighting": "squared_increment"
})");
    if (command == "stability")
        return Json::parse(R"({
  "network": {"graph": {
    "format": "mgraph/1",
    "nodes": ["a", "b", "c", "d"],
    "edges": [{"id": "ab", "tail": "a", "head": "b", "length": 1},
              {"id": "bc", "tail": "b", "head": "c", "length": 1},
              {"id": "cd", "tail": "c", "head": "d", "length": 1},
              {"id": "da", "tail": "d", "head": "a", "length": 1},
              {"id": "ac", "tail": "a", "head": "c", "length": 1.3}]}},
  "source": {"sample": {"count": 5, "edges": ["ab"], "from": 0.0, "to": 0.3}},
  "target": {"sample": {"count": 5, "edges": ["cd"], "from": 0.0, "to": 0.3}},
  "p": 2,
  "seed": 3,
  "edits": [{"label": "drop diagonal", "remove": ["ac"]},
            {"label": "add shortcut", "add": [{"id": "bd", "tail": "b", "head": "d", "length": 1.2}]}]
})");
    if (command == "monotonicity")
        return Json::parse(R"({
  "network": {"builtin": "y"},
  "source": {"sample": {"count": 6, "edges": ["stem"]}},
  "target": {"sample": {"count": 6, "edges": ["upper", "lower"]}},
  "p": 2,
  "seed": 5,
  "delta": 1e-8,
  "max_cycle": 8
})");
    if (command == "dynamic")
        return Json::parse(R"({
  "network": {"builtin": "straight"},
  "cells": [64],
  "time_steps": 32,
  "p": 2,
  "variant": "kirchhoff",
  "from": {"bumps": [{"edge": "e", "centre": 0.3, "width": 0.15}]},
  "to": {"bumps": [{"edge": "e", "centre": 0.6, "width": 0.15}]}
})");
    if (command == "jko")
        return Json::parse(R"({
  "network": {"builtin": "straight"},
  "cells": [20],
  "tau": 0.005,
  "steps": 10,
  "p": 2,
  "energy": {"kind": "log_entropy"},
  "initial": {"floor": 0.1, "bumps": [{"edge": "e", "centre": 0.3, "width": 0.2}]}
})");
    throw ConfigError("unknown command '" + command + "'");
}

}  // namespace got::cli
