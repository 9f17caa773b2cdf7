#pragma once

#include <functional>
#include <vector>

#include "got/dynamic_ot.hpp"

namespace got {

// Pressure p(rho) = coefficient * rho^exponent.
struct PressureLaw {
    double coefficient = 1.0;
    double exponent = 1.0;
};

struct PipeParameters {
    double diffusion = 0.5;    // D
    double friction = 1.0;     // lambda
    double inclination = 0.0;  // angle in radians
    double offset = 0.0;       // d, per-edge integration constant
};

// F with F(0) = 0 and F'' = (2D / lambda) p'(rho) / rho. The isothermal law uses F'(1) = 0.
double iso3_entropy_density(double rho, const PipeParameters& pipe, const PressureLaw& law);
double iso3_entropy_slope(double rho, const PipeParameters& pipe, const PressureLaw& law);

enum class EnergyKind { relative_entropy, iso3, log_entropy };

struct EnergySpec {
    EnergyKind kind = EnergyKind::log_entropy;
    GraphState reference;                // relative_entropy
    std::vector<PipeParameters> pipes;   // iso3, one per edge
    PressureLaw pressure;                // iso3
    double gravity = 9.81;               // iso3
    std::vector<double> potential;       // log_entropy, per cell (empty means zero)
    std::function<double(double)> interaction;  // log_entropy, kernel of the graph distance (empty means zero)
};

double energy(const DynamicGrid& grid, const EnergySpec& spec, const GraphState& state);
// Partial derivatives with respect to the cell densities.
std::vector<double> energy_gradient(const DynamicGrid& grid, const EnergySpec& spec, const GraphState& state);

struct JkoOptions {
    SolverOptions inner = [] {
        SolverOptions o;
        o.time_steps = 4;
        return o;
    }();
    int max_outer = 60;
    double step_tolerance = 1e-7;  // stop when a step moves the state less than this in weighted L1
};

struct JkoResult {
    GraphState state;
    double energy = 0.0;
    double transport = 0.0;  // W_p^p between the previous and the new state
    double objective = 0.0;
    int outer_iterations = 0;
};

// Nonnegative unit-mass projection in the width-weighted metric.
std::vector<double> project_to_simplex(const DynamicGrid& grid, std::span<const double> z);

JkoResult jko_step(const DynamicGrid& grid, const GraphState& prev, double tau, double p, const EnergySpec& spec,
                   const JkoOptions& options = {});

struct FlowRecord {
    std::size_t step = 0;
    double energy = 0.0;
    double transport = 0.0;
    double mass = 0.0;
};

struct FlowResult {
    std::vector<GraphState> states;
    std::vector<FlowRecord> log;
};

FlowResult run_flow(const DynamicGrid& grid, const GraphState& initial, double tau, std::size_t steps, double p,
                    const EnergySpec& spec, const JkoOptions& options = {});

}  // namespace got
