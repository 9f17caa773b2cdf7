#include "got/measures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <type_traits>

#include "got/random.hpp"
#include "got/tube.hpp"

namespace got {

DiscreteMeasure DiscreteMeasure::on_graph(std::vector<GraphPoint> points, std::vector<double> weights) {
    if (points.size() != weights.size()) throw DomainError("measure: points and weights differ in length");
    DiscreteMeasure m;
    m.kind_ = MeasureKind::graph;
    m.graph_ = std::move(points);
    m.weights_ = std::move(weights);
    m.check();
    return m;
}

DiscreteMeasure DiscreteMeasure::ambient(std::vector<Point> points, std::vector<double> weights) {
    if (points.size() != weights.size()) throw DomainError("measure: points and weights differ in length");
    DiscreteMeasure m;
    m.kind_ = MeasureKind::ambient;
    m.ambient_ = std::move(points);
    m.weights_ = std::move(weights);
    m.check();
    return m;
}

DiscreteMeasure DiscreteMeasure::uniform_on_graph(std::vector<GraphPoint> points) {
    const auto n = points.size();
    return on_graph(std::move(points), std::vector<double>(n, n ? 1.0 / static_cast<double>(n) : 0.0));
}

DiscreteMeasure DiscreteMeasure::uniform_ambient(std::vector<Point> points) {
    const auto n = points.size();
    return ambient(std::move(points), std::vector<double>(n, n ? 1.0 / static_cast<double>(n) : 0.0));
}

void DiscreteMeasure::check() const {
    if (weights_.empty()) throw DomainError("measure has no atoms");
    for (std::size_t i = 0; i < weights_.size(); ++i)
        if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i]))
            throw DomainError("measure atom " + std::to_string(i) + " has a negative or non-finite weight");
    if (std::abs(total_mass() - 1.0) > 1e-9) throw DomainError("measure weights do not sum to one");
}

std::span<const GraphPoint> DiscreteMeasure::graph_points() const {
    if (kind_ != MeasureKind::graph) throw DomainError("measure is not graph-supported");
    return graph_;
}

std::span<const Point> DiscreteMeasure::ambient_points() const {
    if (kind_ != MeasureKind::ambient) throw DomainError("measure is not ambient");
    return ambient_;
}

double DiscreteMeasure::total_mass() const {
    double s = 0.0;
    for (double w : weights_) s += w;
    return s;
}

bool DiscreteMeasure::is_uniform() const {
    return std::all_of(weights_.begin(), weights_.end(), [&](double w) { return w == weights_.front(); });
}

GraphPoint project_to_graph(const MetricGraph& g, const Point& x) {
    if (!g.has_embedding()) throw DomainError("projection needs embedded edges");
    GraphPoint best{EdgeId{0}, 0.0};
    double best_dist = kInfinity;
    for (std::uint32_t i = 0; i < g.edge_count(); ++i) {
        const Edge& e = g.edge(EdgeId{i});
        const auto c = e.embed->closest(x);
        if (c.distance < best_dist) {
            best_dist = c.distance;
            const double coord = std::clamp(c.arclength / e.embed->length() * e.length, 0.0, e.length);
            best = {EdgeId{i}, coord};
        }
    }
    return best;
}

namespace {

template <class Loc, class Key, class Map, class Make>
DiscreteMeasure merge_images(std::span<const Loc> src, std::span<const double> weights, Map image_of,
                             Key key_of, Make make) {
    std::map<std::invoke_result_t<Key, const std::invoke_result_t<Map, const Loc&>&>, std::size_t> slot;
    std::vector<std::invoke_result_t<Map, const Loc&>> pts;
    std::vector<double> w;
    for (std::size_t i = 0; i < src.size(); ++i) {
        auto image = image_of(src[i]);
        const auto [it, fresh] = slot.try_emplace(key_of(image), pts.size());
        if (fresh) {
            pts.push_back(image);
            w.push_back(weights[i]);
        } else {
            w[it->second] += weights[i];
        }
    }
    return make(std::move(pts), std::move(w));
}

}  // namespace

DiscreteMeasure pushforward(const MetricGraph& g, const DiscreteMeasure& m,
                            const std::function<GraphPoint(const GraphPoint&)>& f) {
    return merge_images(m.graph_points(), m.weights(), f,
                        [&](const GraphPoint& p) { return canonical_key(g, p); }, &DiscreteMeasure::on_graph);
}

DiscreteMeasure pushforward(const DiscreteMeasure& m, const std::function<Point(const Point&)>& f) {
    return merge_images(m.ambient_points(), m.weights(), f, [](const Point& p) { return p; },
                        &DiscreteMeasure::ambient);
}

DiscreteMeasure project_measure(const MetricGraph& g, const DiscreteMeasure& m) {
    return merge_images(
        m.ambient_points(), m.weights(), [&](const Point& x) { return project_to_graph(g, x); },
        [&](const GraphPoint& p) { return canonical_key(g, p); }, &DiscreteMeasure::on_graph);
}

DiscreteMeasure lift_to_ambient(const MetricGraph& g, const DiscreteMeasure& m) {
    std::vector<Point> pts;
    pts.reserve(m.size());
    for (const auto& p : m.graph_points()) pts.push_back(embed_point(g, p));
    return DiscreteMeasure::ambient(std::move(pts), std::vector<double>(m.weights().begin(), m.weights().end()));
}

DiscreteMeasure sample_tube_measure(const TubeGrid& tube, std::size_t n, std::uint64_t seed,
                                    SamplingProfile profile) {
    if (n == 0) throw DomainError("sample size must be positive");
    if (tube.cell_count() == 0) throw DomainError("tube mask is empty");
    Rng rng(seed);
    const double h = tube.spacing();
    std::vector<Point> pts;
    pts.reserve(n);

    if (profile == SamplingProfile::uniform) {
        while (pts.size() < n) {
            const auto c = static_cast<TubeGrid::CellIndex>(rng.below(tube.cell_count()));
            Point x = tube.centre(c);
            for (int d = 0; d < tube.dim(); ++d) x[static_cast<std::size_t>(d)] += 0.98 * h * (rng.uniform() - 0.5);
            pts.push_back(x);
        }
    } else {
        // Radius skewed towards the centreline.
        const MetricGraph& g = tube.network();
        const double total = g.total_length();
        std::size_t attempts = 0;
        while (pts.size() < n) {
            if (++attempts > 1000 * n) throw DomainError("graph-biased sampling rejected too many points");
            double s = rng.uniform() * total;
            std::uint32_t e = 0;
            while (e + 1 < g.edge_count() && s > g.edge(EdgeId{e}).length) s -= g.edge(EdgeId{e++}).length;
            const Point base = embed_point(g, {EdgeId{e}, std::min(s, g.edge(EdgeId{e}).length)});
            const double r = tube.epsilon() * rng.uniform() * rng.uniform();
            Point dir;
            if (tube.dim() == 2) {
                const double a = 2.0 * std::numbers::pi * rng.uniform();
                dir = make_point(std::cos(a), std::sin(a));
            } else {
                const double z = 2.0 * rng.uniform() - 1.0;
                const double a = 2.0 * std::numbers::pi * rng.uniform();
                const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
                dir = make_point(rho * std::cos(a), rho * std::sin(a), z);
            }
            const Point x = base + r * dir;
            if (tube.contains(x)) pts.push_back(x);
        }
    }
    return DiscreteMeasure::uniform_ambient(std::move(pts));
}

}  // namespace got
