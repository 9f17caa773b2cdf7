#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "got/coupling.hpp"
#include "got/graph.hpp"
#include "got/measures.hpp"
#include "got/tube.hpp"

namespace got {

class InfeasibleError : public DomainError {
public:
    using DomainError::DomainError;
};

struct GraphGroundCost {
    const MetricGraph* graph = nullptr;
};
struct TubeGroundCost {
    const TubeGrid* tube = nullptr;
};
struct EuclideanGroundCost {};
using GroundCost = std::variant<GraphGroundCost, TubeGroundCost, EuclideanGroundCost>;

// values(i, j) = distance(x_i, y_j)^p under the chosen ground metric.
CostMatrix build_cost_matrix(const DiscreteMeasure& src, const DiscreteMeasure& dst, const GroundCost& cost,
                             double p);

struct DualCertificate {
    std::vector<double> phi;
    std::vector<double> psi;
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
};

struct OtSolution {
    Coupling plan;
    DualCertificate certificate;
    bool used_assignment = false;
};

// Exact solve. Uniform equal-count marginals go through the assignment solver, the rest through
// successive shortest paths on the transportation network.
OtSolution solve_ot(const CostMatrix& c, std::span<const double> src_weights, std::span<const double> dst_weights);
OtSolution solve_ot(const CostMatrix& c, const DiscreteMeasure& src, const DiscreteMeasure& dst);

// Square assignment with dual potentials; row i goes to column result[i].
struct Assignment {
    std::vector<std::size_t> column_of_row;
    std::vector<double> row_potential;
    std::vector<double> col_potential;
    double cost = 0.0;
};
Assignment solve_assignment(const CostMatrix& c);

double wasserstein_p(const MetricGraph& g, const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

struct SlacknessReport {
    std::size_t violations = 0;
    double worst = 0.0;
};
// Checks phi + psi <= c + tol everywhere finite and equality on entries heavier than mass_threshold.
SlacknessReport complementary_slackness(const CostMatrix& c, const OtSolution& s, double mass_threshold = 1e-10,
                                        double tol = 1e-6);

struct MonotonicityReport {
    std::size_t violations = 0;
    double worst_margin = 0.0;  // max over cycles of (LHS - RHS) / cycle length
    std::size_t cycles_checked = 0;
    bool exhaustive = false;
    std::vector<std::size_t> worst_cycle;  // plan entry indices
};

// Cycles of plan support entries of length 2..max_cycle. Exhaustive when the support has at most
// 8 entries, otherwise `trials` random cycles.
MonotonicityReport check_cyclical_monotonicity(const Coupling& plan, const CostMatrix& c, std::size_t max_cycle,
                                               std::size_t trials, double delta, std::uint64_t seed = 0,
                                               double mass_threshold = 1e-10);

struct NewEdge {
    std::string name;
    std::string tail;
    std::string head;
    double length = 0.0;
};

struct GraphEdit {
    std::vector<std::string> remove;
    std::vector<NewEdge> add;
};

struct StabilityResult {
    double ot_before = 0.0;
    double ot_after = 0.0;
    double bound_pi = 0.0;   // witness bound from the two optimizers found
    double bound_inf = 0.0;  // sup-norm over the atom-pair grid
    OtSolution before;
    OtSolution after;
    CostMatrix cost_before;
    CostMatrix cost_after;
    bool bounds_hold = false;
};

struct EditedGraph {
    MetricGraph graph;
    std::vector<std::optional<EdgeId>> edge_map;
};
EditedGraph apply_edit(const MetricGraph& g, const GraphEdit& edit);

StabilityResult stability_experiment(const MetricGraph& g, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     const GraphEdit& edit, double p);

}  // namespace got
