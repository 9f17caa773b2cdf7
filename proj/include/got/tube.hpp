#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "got/coupling.hpp"
#include "got/geometry.hpp"
#include "got/graph.hpp"
#include "got/measures.hpp"

namespace got {

class ResolutionError : public DomainError {
public:
    using DomainError::DomainError;
};

// Raster of the epsilon-thickened embedded network. Cell centres sit at origin + index * h, offset half a cell
// from the lattice of multiples of h.
class TubeGrid {
public:
    using CellIndex = std::uint32_t;  // compact index over mask cells, ordered like the full raster
    static constexpr CellIndex npos = static_cast<CellIndex>(-1);

    double spacing() const { return h_; }
    double epsilon() const { return epsilon_; }
    int dim() const { return dim_; }
    const Point& origin() const { return origin_; }
    const std::array<int, 3>& shape() const { return shape_; }
    const MetricGraph& network() const { return network_; }

    std::size_t cell_count() const { return cells_.size(); }
    bool mask_at(const std::array<int, 3>& ijk) const;
    std::array<int, 3> cell_coords(CellIndex c) const;
    Point centre(CellIndex c) const;
    CellIndex cell_at(const std::array<int, 3>& ijk) const;
    std::span<const CellIndex> neighbours(CellIndex c) const {
        return {neighbours_.data() + offsets_[c], neighbours_.data() + offsets_[c + 1]};
    }

    // Nearest cell centre when it belongs to the mask.
    std::optional<CellIndex> snap(const Point& x) const;
    bool contains(const Point& x) const { return snap(x).has_value(); }
    double distance_to_network(const Point& x) const;

    // Straight segment stays inside the mask (sampled at h/4).
    bool visible(const Point& a, const Point& b) const;

private:
    friend TubeGrid rasterize(const MetricGraph& g, double epsilon, double h, int dim);

    double h_ = 0.0;
    double epsilon_ = 0.0;
    int dim_ = 2;
    Point origin_;
    std::array<int, 3> shape_{1, 1, 1};
    MetricGraph network_;
    std::vector<CellIndex> full_to_cell_;
    std::vector<std::uint32_t> cells_;  // full raster index of each mask cell
    std::vector<std::uint32_t> offsets_;
    std::vector<CellIndex> neighbours_;
};

enum class StepWeighting { squared_increment, euclidean };

// dim = 0 picks 3 when any embedding leaves the z = 0 plane, else 2.
TubeGrid rasterize(const MetricGraph& g, double epsilon, double h, int dim = 0);

// Squared length of the shortest in-mask curve (any-angle relaxation over the neighbour graph).
double tube_cost(const TubeGrid& tg, const Point& x, const Point& y);
double tube_length(const TubeGrid& tg, const Point& x, const Point& y);

// Shortest length restricted to straight moves between neighbouring cells, weights h, sqrt(2)h, sqrt(3)h.
double grid_length(const TubeGrid& tg, const Point& x, const Point& y);

// Dijkstra value with the squared-increment stencil (h^2 per axis step, 2h^2 per planar diagonal).
double pixel_cost(const TubeGrid& tg, const Point& x, const Point& y);

// Row-major matrix of neighbour-graph Dijkstra values between atoms, one search per source.
std::vector<double> pixel_cost_table(const TubeGrid& tg, std::span<const Point> from, std::span<const Point> to,
                                     StepWeighting weighting);

// Row-major matrix of tube length^p between atoms.
std::vector<double> tube_cost_table(const TubeGrid& tg, std::span<const Point> from,
                                    std::span<const Point> to, double p = 2.0);

struct TautPath {
    std::vector<Point> vertices;  // x, bend points, y
    double length = 0.0;
};
std::optional<TautPath> tube_geodesic(const TubeGrid& tg, const Point& x, const Point& y);

struct Trajectory {
    std::size_t source = 0;
    std::size_t target = 0;
    double mass = 0.0;
    std::vector<TubeGrid::CellIndex> cells;
};

std::vector<Trajectory> extract_trajectories(const TubeGrid& tg, const DiscreteMeasure& src,
                                             const DiscreteMeasure& dst, const Coupling& plan,
                                             StepWeighting weighting = StepWeighting::squared_increment);

struct GradientCheck {
    bool conclusive = false;
    Point numeric_gradient;
    Point velocity_gradient;  // -2 L * unit initial direction
    double discrepancy = 0.0;
    double cost = 0.0;
};

GradientCheck cost_gradient_check(const TubeGrid& tg, const Point& x, const Point& y, double fd_step);

}  // namespace got
