#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "got/geometry.hpp"
#include "got/graph.hpp"

namespace got {

class TubeGrid;

enum class MeasureKind { graph, ambient };

// Weighted atoms of a single location kind. Weights are nonnegative and sum to one.
class DiscreteMeasure {
public:
    DiscreteMeasure() = default;
    static DiscreteMeasure on_graph(std::vector<GraphPoint> points, std::vector<double> weights);
    static DiscreteMeasure ambient(std::vector<Point> points, std::vector<double> weights);
    static DiscreteMeasure uniform_on_graph(std::vector<GraphPoint> points);
    static DiscreteMeasure uniform_ambient(std::vector<Point> points);

    MeasureKind kind() const { return kind_; }
    std::size_t size() const { return weights_.size(); }
    std::span<const double> weights() const { return weights_; }
    double weight(std::size_t i) const { return weights_[i]; }
    std::span<const GraphPoint> graph_points() const;
    std::span<const Point> ambient_points() const;
    double total_mass() const;
    bool is_uniform() const;

private:
    void check() const;

    MeasureKind kind_ = MeasureKind::graph;
    std::vector<GraphPoint> graph_;
    std::vector<Point> ambient_;
    std::vector<double> weights_;
};

// Nearest point on the embedded graph; ties go to the lowest edge, then the lowest coordinate.
GraphPoint project_to_graph(const MetricGraph& g, const Point& x);

// Image measure; atoms whose images coincide exactly are merged.
DiscreteMeasure pushforward(const MetricGraph& g, const DiscreteMeasure& m,
                            const std::function<GraphPoint(const GraphPoint&)>& f);
DiscreteMeasure pushforward(const DiscreteMeasure& m, const std::function<Point(const Point&)>& f);
DiscreteMeasure project_measure(const MetricGraph& g, const DiscreteMeasure& m);

DiscreteMeasure lift_to_ambient(const MetricGraph& g, const DiscreteMeasure& m);

enum class SamplingProfile { uniform, graph_biased };

// n equal-weight atoms inside the tube mask, reproducible from the seed.
DiscreteMeasure sample_tube_measure(const TubeGrid& tube, std::size_t n, std::uint64_t seed,
                                    SamplingProfile profile = SamplingProfile::uniform);

}  // namespace got
