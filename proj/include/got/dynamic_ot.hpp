#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "got/graph.hpp"

namespace got {

// |a|^p / b^(p-1) for b > 0, 0 at the origin, +inf otherwise.
double perspective_h(double a, double b, double p);

// Finite-volume layout: edge e has cells(e) cells of width length/cells and cells(e) + 1 faces.
// Face 0 touches the tail node, the last face the head node.
class DynamicGrid {
public:
    DynamicGrid(const MetricGraph& g, std::vector<int> cells_per_edge);
    static DynamicGrid uniform(const MetricGraph& g, double target_dx);

    const MetricGraph& graph() const { return graph_; }
    std::size_t edge_count() const { return cells_.size(); }
    std::size_t node_count() const { return graph_.node_count(); }
    std::size_t cell_count() const { return total_cells_; }
    std::size_t face_count() const { return total_faces_; }

    int cells(std::size_t edge) const { return cells_[edge]; }
    double dx(std::size_t edge) const { return dx_[edge]; }
    std::size_t cell(std::size_t edge, int i) const { return cell_offset_[edge] + static_cast<std::size_t>(i); }
    std::size_t face(std::size_t edge, int i) const { return face_offset_[edge] + static_cast<std::size_t>(i); }
    std::size_t edge_of_cell(std::size_t c) const { return cell_edge_[c]; }
    double cell_width(std::size_t c) const { return dx_[cell_edge_[c]]; }
    // Coordinate of a cell centre along its edge.
    double centre(std::size_t c) const;

private:
    MetricGraph graph_;
    std::vector<int> cells_;
    std::vector<double> dx_;
    std::vector<std::size_t> cell_offset_;
    std::vector<std::size_t> face_offset_;
    std::vector<std::size_t> cell_edge_;
    std::size_t total_cells_ = 0;
    std::size_t total_faces_ = 0;
};

// Densities per cell (mass = density * width) and point masses per node.
struct GraphState {
    std::vector<double> rho;
    std::vector<double> gamma;

    static GraphState zero(const DynamicGrid& grid);
    double edge_mass(const DynamicGrid& grid) const;
    double mass(const DynamicGrid& grid) const;
};

// Densities at time levels 0..steps, fluxes on faces for each of the `steps` intervals of [0, 1].
struct DynamicField {
    std::vector<GraphState> levels;
    std::vector<std::vector<double>> flux;

    std::size_t steps() const { return flux.size(); }
};

enum class FlowVariant { kirchhoff, reservoir_net, reservoir_per_edge };

struct ContinuityResidual {
    std::vector<double> cells;  // [interval][cell]
    std::vector<double> nodes;  // [interval][node]
    double max_abs() const;
};

// Edge rows: (rho_{k+1} - rho_k)/dt + (j_{i+1} - j_i)/dx.
// Node rows: sum of outward normal fluxes (Kirchhoff) or (gamma_{k+1} - gamma_k)/dt - inflow (reservoir).
ContinuityResidual discrete_continuity_residual(const DynamicGrid& grid, const DynamicField& f, FlowVariant variant);

// Action of a field: sum of dx dt h(face flux, face density) plus the node terms of the variant.
double field_action(const DynamicGrid& grid, const DynamicField& f, FlowVariant variant, double p);

struct ActionSpec {
    double p = 2.0;
    FlowVariant variant = FlowVariant::kirchhoff;
};

struct ConvergenceRecord {
    std::size_t iteration = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double action = 0.0;
};

struct SolverOptions {
    int time_steps = 32;
    std::size_t max_iterations = 100000;
    double tolerance = 1e-5;
    std::size_t check_every = 25;
    bool endpoint_gradient = false;
    std::function<void(const ConvergenceRecord&)> monitor;
};

struct ActionResult {
    double value = 0.0;   // p-th root of the action
    double action = 0.0;  // minimized sum of h terms
    DynamicField field;
    std::vector<ConvergenceRecord> log;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
    // Derivative of the action with respect to the final-level cell densities, up to a multiple of the widths.
    std::vector<double> endpoint_gradient;
    // Solver iterates, usable as a warm start for a solve of the same shape.
    std::vector<double> primal;
    std::vector<double> dual;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ActionResult minimize_action(const DynamicGrid& grid, const GraphState& from, const GraphState& to,
                             const ActionSpec& spec, const SolverOptions& options = {},
                             const ActionResult* warm_start = nullptr);

// Reversible rates between boundary cells and nodes for a reference pair (cell density pi, node mass omega).
struct NodeExchange {
    std::vector<double> edge_to_node;  // index 2 * edge + (0 tail, 1 head), per unit density
    std::vector<double> node_to_edge;  // per unit node mass
};

struct DriftDiffusionSpec {
    std::vector<double> diffusion;  // per edge
    std::vector<double> potential;  // per cell
    NodeExchange exchange;
};

NodeExchange detailed_balance_exchange(const DynamicGrid& grid, std::span<const double> potential,
                                       std::span<const double> node_reference, double rate);

// Explicit finite-volume scheme; returns steps + 1 states including the initial one.
std::vector<GraphState> simulate_drift_diffusion(const DynamicGrid& grid, const DriftDiffusionSpec& spec, double dt,
                                                 std::size_t steps, const GraphState& initial);

// Sum of ref * eta(m / ref) with eta(r) = r log r - r + 1; +inf without absolute continuity.
double relative_entropy(std::span<const double> m, std::span<const double> ref);
// Cells weighted by their widths, nodes as point masses.
double relative_entropy(const DynamicGrid& grid, const GraphState& m, const GraphState& ref);

// Reference state e^{-potential} on cells and node_reference on nodes.
GraphState equilibrium_state(const DynamicGrid& grid, std::span<const double> potential,
                             std::span<const double> node_reference);

}  // namespace got
