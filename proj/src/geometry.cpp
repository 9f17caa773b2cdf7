#include "got/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace got {

SegmentProjection project_onto_segment(const Point& p, const Point& a, const Point& b) {
    const Point ab = b - a;
    const double len2 = dot(ab, ab);
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return {t, distance(p, a + t * ab)};
}

Polyline::Polyline(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() == 1) throw std::invalid_argument("polyline needs at least two vertices");
    cumulative_.reserve(vertices_.size());
    double s = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
        if (i > 0) s += distance(vertices_[i - 1], vertices_[i]);
        cumulative_.push_back(s);
    }
}

Point Polyline::at(double s) const {
    if (vertices_.empty()) throw std::logic_error("empty polyline");
    if (s <= 0.0) return vertices_.front();
    if (s >= length()) return vertices_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    const auto i = static_cast<std::size_t>(it - cumulative_.begin());
    const double seg = cumulative_[i] - cumulative_[i - 1];
    const double t = seg > 0.0 ? (s - cumulative_[i - 1]) / seg : 0.0;
    return vertices_[i - 1] + t * (vertices_[i] - vertices_[i - 1]);
}

Polyline::Closest Polyline::closest(const Point& p) const {
    Closest best{0.0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 1; i < vertices_.size(); ++i) {
        const auto proj = project_onto_segment(p, vertices_[i - 1], vertices_[i]);
        if (proj.distance < best.distance) {
            const double seg = cumulative_[i] - cumulative_[i - 1];
            best = {cumulative_[i - 1] + proj.t * seg, proj.distance};
        }
    }
    return best;
}

}  // namespace got
