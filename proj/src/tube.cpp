#include "got/tube.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <utility>

namespace got {

namespace {

using CellIndex = TubeGrid::CellIndex;

struct QueueItem {
    double dist;
    CellIndex cell;
    friend bool operator>(const QueueItem& a, const QueueItem& b) {
        return a.dist > b.dist || (a.dist == b.dist && a.cell > b.cell);
    }
};
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

}  // namespace

bool TubeGrid::mask_at(const std::array<int, 3>& ijk) const { return cell_at(ijk) != npos; }

TubeGrid::CellIndex TubeGrid::cell_at(const std::array<int, 3>& ijk) const {
    for (std::size_t d = 0; d < 3; ++d)
        if (ijk[d] < 0 || ijk[d] >= shape_[d]) return npos;
    const auto full = static_cast<std::size_t>(ijk[0]) +
                      static_cast<std::size_t>(shape_[0]) *
                          (static_cast<std::size_t>(ijk[1]) +
                           static_cast<std::size_t>(shape_[1]) * static_cast<std::size_t>(ijk[2]));
    return full_to_cell_[full];
}

std::array<int, 3> TubeGrid::cell_coords(CellIndex c) const {
    auto full = cells_.at(c);
    const auto nx = static_cast<std::uint32_t>(shape_[0]);
    const auto ny = static_cast<std::uint32_t>(shape_[1]);
    return {static_cast<int>(full % nx), static_cast<int>((full / nx) % ny), static_cast<int>(full / (nx * ny))};
}

Point TubeGrid::centre(CellIndex c) const {
    const auto ijk = cell_coords(c);
    Point p = origin_;
    for (std::size_t d = 0; d < 3; ++d) p[d] += h_ * ijk[d];
    return p;
}

std::optional<TubeGrid::CellIndex> TubeGrid::snap(const Point& x) const {
    std::array<int, 3> ijk{0, 0, 0};
    for (std::size_t d = 0; d < static_cast<std::size_t>(dim_); ++d) {
        const double u = std::round((x[d] - origin_[d]) / h_);
        if (!(u >= 0.0 && u < shape_[d])) return std::nullopt;
        ijk[d] = static_cast<int>(u);
    }
    const CellIndex c = cell_at(ijk);
    if (c == npos) return std::nullopt;
    return c;
}

double TubeGrid::distance_to_network(const Point& x) const {
    double best = kInfinity;
    for (const auto& e : network_.edges()) best = std::min(best, e.embed->closest(x).distance);
    return best;
}

bool TubeGrid::visible(const Point& a, const Point& b) const {
    const double len = distance(a, b);
    const auto steps = static_cast<int>(std::ceil(len / (0.25 * h_)));
    for (int s = 0; s <= steps; ++s) {
        const double t = steps == 0 ? 0.0 : static_cast<double>(s) / steps;
        if (!snap(a + t * (b - a))) return false;
    }
    return true;
}

TubeGrid rasterize(const MetricGraph& g, double epsilon, double h, int dim) {
    if (!(epsilon > 0.0) || !(h > 0.0)) throw DomainError("epsilon and h must be positive");
    if (h > 0.5 * epsilon)
        throw ResolutionError("grid spacing " + std::to_string(h) + " exceeds epsilon/2 = " +
                              std::to_string(0.5 * epsilon));
    if (!g.has_embedding()) throw DomainError("rasterize needs every edge embedded");
    if (dim == 0) {
        dim = 2;
        for (const auto& e : g.edges())
            for (const auto& v : e.embed->vertices())
                if (v[2] != 0.0) dim = 3;
    }
    if (dim != 2 && dim != 3) throw DomainError("ambient dimension must be 2 or 3");

    TubeGrid tg;
    tg.h_ = h;
    tg.epsilon_ = epsilon;
    tg.dim_ = dim;
    tg.network_ = g;

    Point lo = make_point(kInfinity, kInfinity, kInfinity);
    Point hi = make_point(-kInfinity, -kInfinity, -kInfinity);
    for (const auto& e : g.edges())
        for (const auto& v : e.embed->vertices())
            for (std::size_t d = 0; d < 3; ++d) {
                lo[d] = std::min(lo[d], v[d]);
                hi[d] = std::max(hi[d], v[d]);
            }
    std::array<long, 3> first{0, 0, 0};
    for (std::size_t d = 0; d < 3; ++d) {
        if (d >= static_cast<std::size_t>(dim)) {
            tg.origin_[d] = 0.0;
            tg.shape_[d] = 1;
            continue;
        }
        first[d] = static_cast<long>(std::floor((lo[d] - epsilon) / h)) - 1;
        const long last = static_cast<long>(std::ceil((hi[d] + epsilon) / h)) + 1;
        tg.origin_[d] = (static_cast<double>(first[d]) + 0.5) * h;
        tg.shape_[d] = static_cast<int>(last - first[d] + 1);
    }
    const std::size_t total = static_cast<std::size_t>(tg.shape_[0]) * tg.shape_[1] * tg.shape_[2];
    if (total > (std::size_t{1} << 31)) throw ResolutionError("raster too large");
    std::vector<char> inside(total, 0);

    auto full_index = [&](const std::array<int, 3>& ijk) {
        return static_cast<std::size_t>(ijk[0]) +
               static_cast<std::size_t>(tg.shape_[0]) *
                   (static_cast<std::size_t>(ijk[1]) + static_cast<std::size_t>(tg.shape_[1]) * ijk[2]);
    };
    for (const auto& e : g.edges()) {
        const auto verts = e.embed->vertices();
        for (std::size_t s = 1; s < verts.size(); ++s) {
            const Point& a = verts[s - 1];
            const Point& b = verts[s];
            std::array<int, 3> from{0, 0, 0};
            std::array<int, 3> to{0, 0, 0};
            for (std::size_t d = 0; d < static_cast<std::size_t>(dim); ++d) {
                const double mn = std::min(a[d], b[d]) - epsilon;
                const double mx = std::max(a[d], b[d]) + epsilon;
                from[d] = std::max(0, static_cast<int>(std::floor((mn - tg.origin_[d]) / h)));
                to[d] = std::min(tg.shape_[d] - 1, static_cast<int>(std::ceil((mx - tg.origin_[d]) / h)));
            }
            std::array<int, 3> ijk{};
            for (ijk[2] = from[2]; ijk[2] <= to[2]; ++ijk[2])
                for (ijk[1] = from[1]; ijk[1] <= to[1]; ++ijk[1])
                    for (ijk[0] = from[0]; ijk[0] <= to[0]; ++ijk[0]) {
                        const auto idx = full_index(ijk);
                        if (inside[idx]) continue;
                        Point c = tg.origin_;
                        for (std::size_t d = 0; d < 3; ++d) c[d] += h * ijk[d];
                        if (project_onto_segment(c, a, b).distance <= epsilon) inside[idx] = 1;
                    }
        }
    }

    tg.full_to_cell_.assign(total, TubeGrid::npos);
    for (std::size_t i = 0; i < total; ++i)
        if (inside[i]) {
            tg.full_to_cell_[i] = static_cast<CellIndex>(tg.cells_.size());
            tg.cells_.push_back(static_cast<std::uint32_t>(i));
        }
    if (tg.cells_.empty()) throw ResolutionError("tube mask is empty");

    std::vector<std::array<int, 3>> offsets;
    for (int dz = (dim == 3 ? -1 : 0); dz <= (dim == 3 ? 1 : 0); ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (dx != 0 || dy != 0 || dz != 0) offsets.push_back({dx, dy, dz});
    tg.offsets_.reserve(tg.cells_.size() + 1);
    tg.offsets_.push_back(0);
    for (CellIndex c = 0; c < tg.cells_.size(); ++c) {
        const auto ijk = tg.cell_coords(c);
        for (const auto& o : offsets) {
            const CellIndex n = tg.cell_at({ijk[0] + o[0], ijk[1] + o[1], ijk[2] + o[2]});
            if (n != TubeGrid::npos) tg.neighbours_.push_back(n);
        }
        tg.offsets_.push_back(static_cast<std::uint32_t>(tg.neighbours_.size()));
    }

    std::vector<char> seen(tg.cells_.size(), 0);
    std::vector<CellIndex> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const CellIndex c = stack.back();
        stack.pop_back();
        for (CellIndex n : tg.neighbours(c))
            if (!seen[n]) {
                seen[n] = 1;
                ++reached;
                stack.push_back(n);
            }
    }
    if (reached != tg.cells_.size())
        throw ResolutionError("tube mask is disconnected at h = " + std::to_string(h));
    return tg;
}

namespace {

// Lazy any-angle shortest-path tree rooted at an arbitrary in-mask point.
struct AnyAngleTree {
    Point root_point;
    CellIndex root = 0;
    std::vector<double> g;
    std::vector<CellIndex> parent;

    Point position(const TubeGrid& tg, CellIndex c) const { return c == root ? root_point : tg.centre(c); }
};

AnyAngleTree grow_tree(const TubeGrid& tg, const Point& x, CellIndex root) {
    AnyAngleTree t;
    t.root_point = x;
    t.root = root;
    const std::size_t n = tg.cell_count();
    t.g.assign(n, kInfinity);
    t.parent.assign(n, TubeGrid::npos);
    std::vector<char> closed(n, 0);
    std::vector<Point> centres(n);
    for (CellIndex c = 0; c < n; ++c) centres[c] = tg.centre(c);
    centres[root] = x;

    MinQueue pq;
    t.g[root] = 0.0;
    t.parent[root] = root;
    pq.push({0.0, root});
    while (!pq.empty()) {
        const auto [d, s] = pq.top();
        pq.pop();
        if (closed[s] || d > t.g[s]) continue;
        if (s != root && !tg.visible(centres[t.parent[s]], centres[s])) {
            // Lazy check failed: fall back to the best closed neighbour.
            double best = kInfinity;
            CellIndex arg = TubeGrid::npos;
            for (CellIndex nb : tg.neighbours(s))
                if (closed[nb]) {
                    const double cand = t.g[nb] + distance(centres[nb], centres[s]);
                    if (cand < best || (cand == best && nb < arg)) {
                        best = cand;
                        arg = nb;
                    }
                }
            t.g[s] = best;
            t.parent[s] = arg;
        }
        closed[s] = 1;
        const CellIndex p = t.parent[s];
        for (CellIndex nb : tg.neighbours(s)) {
            if (closed[nb]) continue;
            const CellIndex via = s == root ? root : p;
            const double cand = t.g[via] + distance(centres[via], centres[nb]);
            if (cand < t.g[nb]) {
                t.g[nb] = cand;
                t.parent[nb] = via;
                pq.push({cand, nb});
            }
        }
    }
    return t;
}

// Length from the tree root to the actual point y inside cell `target`.
double length_to(const TubeGrid& tg, const AnyAngleTree& t, CellIndex target, const Point& y) {
    if (!std::isfinite(t.g[target])) return kInfinity;
    if (target == t.root) return tg.visible(t.root_point, y) ? distance(t.root_point, y) : kInfinity;
    const CellIndex p = t.parent[target];
    const Point pp = t.position(tg, p);
    if (tg.visible(pp, y)) return t.g[p] + distance(pp, y);
    return t.g[target] + distance(tg.centre(target), y);
}

TautPath path_to(const TubeGrid& tg, const AnyAngleTree& t, CellIndex target, const Point& y) {
    TautPath path;
    path.length = length_to(tg, t, target, y);
    path.vertices.push_back(y);
    if (target != t.root) {
        CellIndex c = target;
        const CellIndex p = t.parent[target];
        if (tg.visible(t.position(tg, p), y)) c = p;
        while (c != t.root) {
            path.vertices.push_back(tg.centre(c));
            c = t.parent[c];
        }
    }
    path.vertices.push_back(t.root_point);
    std::reverse(path.vertices.begin(), path.vertices.end());
    return path;
}

// Order pairs so that tube_length(x, y) and tube_length(y, x) run the same computation.
bool root_first(CellIndex cx, const Point& x, CellIndex cy, const Point& y) {
    return cx < cy || (cx == cy && x <= y);
}

struct GridTree {
    std::vector<double> dist;
    std::vector<CellIndex> pred;
};

GridTree grid_dijkstra(const TubeGrid& tg, CellIndex root, StepWeighting weighting) {
    const std::size_t n = tg.cell_count();
    GridTree t{std::vector<double>(n, kInfinity), std::vector<CellIndex>(n, TubeGrid::npos)};
    const double h = tg.spacing();
    MinQueue pq;
    t.dist[root] = 0.0;
    t.pred[root] = root;
    pq.push({0.0, root});
    while (!pq.empty()) {
        const auto [d, s] = pq.top();
        pq.pop();
        if (d > t.dist[s]) continue;
        const auto a = tg.cell_coords(s);
        for (CellIndex nb : tg.neighbours(s)) {
            const auto b = tg.cell_coords(nb);
            const int steps = std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
            const double w = weighting == StepWeighting::squared_increment ? h * h * steps
                                                                            : h * std::sqrt(static_cast<double>(steps));
            const double cand = d + w;
            if (cand < t.dist[nb] || (cand == t.dist[nb] && s < t.pred[nb])) {
                const bool improved = cand < t.dist[nb];
                t.dist[nb] = cand;
                t.pred[nb] = s;
                if (improved) pq.push({cand, nb});
            }
        }
    }
    return t;
}

}  // namespace

double tube_length(const TubeGrid& tg, const Point& x, const Point& y) {
    const auto cx = tg.snap(x);
    const auto cy = tg.snap(y);
    if (!cx || !cy) return kInfinity;
    if (root_first(*cx, x, *cy, y)) return length_to(tg, grow_tree(tg, x, *cx), *cy, y);
    return length_to(tg, grow_tree(tg, y, *cy), *cx, x);
}

double tube_cost(const TubeGrid& tg, const Point& x, const Point& y) {
    const double l = tube_length(tg, x, y);
    return l * l;
}

std::optional<TautPath> tube_geodesic(const TubeGrid& tg, const Point& x, const Point& y) {
    const auto cx = tg.snap(x);
    const auto cy = tg.snap(y);
    if (!cx || !cy) return std::nullopt;
    const AnyAngleTree t = grow_tree(tg, x, *cx);
    if (!std::isfinite(t.g[*cy])) return std::nullopt;
    return path_to(tg, t, *cy, y);
}

double grid_length(const TubeGrid& tg, const Point& x, const Point& y) {
    const auto cx = tg.snap(x);
    const auto cy = tg.snap(y);
    if (!cx || !cy) return kInfinity;
    return grid_dijkstra(tg, *cx, StepWeighting::euclidean).dist[*cy];
}

double pixel_cost(const TubeGrid& tg, const Point& x, const Point& y) {
    const auto cx = tg.snap(x);
    const auto cy = tg.snap(y);
    if (!cx || !cy) return kInfinity;
    return grid_dijkstra(tg, *cx, StepWeighting::squared_increment).dist[*cy];
}

std::vector<double> pixel_cost_table(const TubeGrid& tg, std::span<const Point> from, std::span<const Point> to,
                                     StepWeighting weighting) {
    std::vector<double> out(from.size() * to.size(), kInfinity);
    std::vector<std::optional<CellIndex>> ct(to.size());
    for (std::size_t j = 0; j < to.size(); ++j) ct[j] = tg.snap(to[j]);
    for (std::size_t i = 0; i < from.size(); ++i) {
        const auto cf = tg.snap(from[i]);
        if (!cf) continue;
        const GridTree t = grid_dijkstra(tg, *cf, weighting);
        for (std::size_t j = 0; j < to.size(); ++j)
            if (ct[j]) out[i * to.size() + j] = t.dist[*ct[j]];
    }
    return out;
}

std::vector<double> tube_cost_table(const TubeGrid& tg, std::span<const Point> from, std::span<const Point> to,
                                    double p) {
    std::vector<double> out(from.size() * to.size(), kInfinity);
    std::vector<std::optional<CellIndex>> cf(from.size());
    std::vector<std::optional<CellIndex>> ct(to.size());
    for (std::size_t i = 0; i < from.size(); ++i) cf[i] = tg.snap(from[i]);
    for (std::size_t j = 0; j < to.size(); ++j) ct[j] = tg.snap(to[j]);

    auto finish = [p](double len) { return std::isfinite(len) ? std::pow(len, p) : kInfinity; };
    for (std::size_t i = 0; i < from.size(); ++i) {
        if (!cf[i]) continue;
        std::optional<AnyAngleTree> tree;
        for (std::size_t j = 0; j < to.size(); ++j) {
            if (!ct[j] || !root_first(*cf[i], from[i], *ct[j], to[j])) continue;
            if (!tree) tree = grow_tree(tg, from[i], *cf[i]);
            out[i * to.size() + j] = finish(length_to(tg, *tree, *ct[j], to[j]));
        }
    }
    for (std::size_t j = 0; j < to.size(); ++j) {
        if (!ct[j]) continue;
        std::optional<AnyAngleTree> tree;
        for (std::size_t i = 0; i < from.size(); ++i) {
            if (!cf[i] || root_first(*cf[i], from[i], *ct[j], to[j])) continue;
            if (!tree) tree = grow_tree(tg, to[j], *ct[j]);
            out[i * to.size() + j] = finish(length_to(tg, *tree, *cf[i], from[i]));
        }
    }
    return out;
}

std::vector<Trajectory> extract_trajectories(const TubeGrid& tg, const DiscreteMeasure& src,
                                             const DiscreteMeasure& dst, const Coupling& plan,
                                             StepWeighting weighting) {
    const auto xs = src.ambient_points();
    const auto ys = dst.ambient_points();
    std::map<CellIndex, GridTree> trees;
    std::vector<Trajectory> out;
    for (const auto& entry : plan.entries) {
        if (!(entry.mass > 0.0)) continue;
        const auto cx = tg.snap(xs[entry.source]);
        const auto cy = tg.snap(ys[entry.target]);
        if (!cx) throw DomainError("source atom " + std::to_string(entry.source) + " lies outside the tube");
        if (!cy) throw DomainError("target atom " + std::to_string(entry.target) + " lies outside the tube");
        auto it = trees.find(*cx);
        if (it == trees.end()) it = trees.emplace(*cx, grid_dijkstra(tg, *cx, weighting)).first;
        const GridTree& t = it->second;
        if (!std::isfinite(t.dist[*cy])) throw DomainError("target unreachable inside the tube");
        Trajectory traj{entry.source, entry.target, entry.mass, {}};
        for (CellIndex c = *cy; c != *cx; c = t.pred[c]) traj.cells.push_back(c);
        traj.cells.push_back(*cx);
        std::reverse(traj.cells.begin(), traj.cells.end());
        out.push_back(std::move(traj));
    }
    return out;
}

GradientCheck cost_gradient_check(const TubeGrid& tg, const Point& x, const Point& y, double fd_step) {
    if (!(fd_step > 0.0)) throw DomainError("finite-difference step must be positive");
    GradientCheck out;
    const auto path = tube_geodesic(tg, x, y);
    if (!path) throw DomainError("points outside the tube or unreachable");
    out.cost = tube_cost(tg, x, y);
    const double len = std::sqrt(out.cost);
    if (len == 0.0) throw DomainError("gradient undefined at x = y");

    const Point first = path->vertices[1];
    const Point dir = (1.0 / distance(first, x)) * (first - x);
    out.velocity_gradient = (-2.0 * len) * dir;

    bool kink = false;
    for (std::size_t d = 0; d < static_cast<std::size_t>(tg.dim()); ++d) {
        Point xp = x;
        Point xm = x;
        xp[d] += fd_step;
        xm[d] -= fd_step;
        const double cp = tube_cost(tg, xp, y);
        const double cm = tube_cost(tg, xm, y);
        if (!std::isfinite(cp) || !std::isfinite(cm)) throw DomainError("finite-difference stencil leaves the tube");
        out.numeric_gradient[d] = (cp - cm) / (2.0 * fd_step);
        const double forward = (cp - out.cost) / fd_step;
        const double backward = (out.cost - cm) / fd_step;
        if (std::abs(forward - backward) > 0.4 * len + 4.0 * fd_step) kink = true;
    }

    const MetricGraph& g = tg.network();
    const std::size_t routes =
        geodesic_multiplicity(g, project_to_graph(g, x), project_to_graph(g, y), 1e-9 * (1.0 + len));
    out.conclusive = !kink && routes == 1;
    out.discrepancy = distance(out.numeric_gradient, out.velocity_gradient);
    return out;
}

}  // namespace got
