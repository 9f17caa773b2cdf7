#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "got/io.hpp"

namespace got::cli {

// Bad configuration: exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A command ran but a checked property failed: exit code 3.
class CheckFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunContext {
    std::filesystem::path out_dir = ".";
    std::filesystem::path config_dir = ".";  // relative file references resolve against this
    std::optional<std::uint64_t> seed;       // overrides the config seed
    unsigned threads = 1;
    bool write_files = true;
};

// GOT_THREADS when set to a positive integer, else the hardware concurrency.
unsigned thread_budget();

struct ConvergeRow {
    double epsilon = 0.0;
    double spacing = 0.0;
    std::size_t cells = 0;
    double ot_tube = 0.0;
    double ot_graph = 0.0;
    double gap = 0.0;
};

struct SandwichRow {
    double epsilon = 0.0;
    std::size_t pairs = 0;
    std::size_t within = 0;
    double fraction() const { return pairs ? static_cast<double>(within) / static_cast<double>(pairs) : 1.0; }
};

struct SandwichReport {
    double fitted_k = 0.0;
    double diameter = 0.0;
    std::vector<SandwichRow> rows;
};

struct ConvergeReport {
    std::uint64_t seed = 0;
    std::vector<ConvergeRow> rows;
    double slope = 0.0;
    bool monotone = false;
    std::optional<SandwichReport> sandwich;
    double seconds = 0.0;           // transport solves only
    double sandwich_seconds = 0.0;
};

struct Figure1Report {
    std::uint64_t seed = 0;
    std::size_t trajectories = 0;
    std::size_t contained = 0;          // trajectories whose every cell lies in the mask
    std::size_t shared_cells = 0;       // interior cells visited by at least two trajectories
    std::size_t max_sharing = 0;        // most trajectories through one interior cell
    double assignment_cost = 0.0;
    std::string csv;                    // trajectory table as written
};

struct StabilityRow {
    std::string label;
    double ot_before = 0.0;
    double ot_after = 0.0;
    double bound_pi = 0.0;
    double bound_inf = 0.0;
    bool holds = false;
};

struct StabilityReport {
    std::vector<StabilityRow> rows;
};

struct MonotonicityCommandReport {
    double value = 0.0;
    double gap = 0.0;
    std::size_t violations = 0;
    std::size_t cycles = 0;
    bool exhaustive = false;
};

struct DynamicReport {
    double value = 0.0;
    double static_value = 0.0;
    std::size_t iterations = 0;
    double kkt_residual = 0.0;
};

struct JkoReport {
    std::vector<double> energy;
    std::vector<double> mass;
    bool monotone = false;
};

ConvergeReport cmd_converge(const Json& config, const RunContext& ctx);
Figure1Report cmd_figure1(const Json& config, const RunContext& ctx);
StabilityReport cmd_stability(const Json& config, const RunContext& ctx);
MonotonicityCommandReport cmd_monotonicity(const Json& config, const RunContext& ctx);
DynamicReport cmd_dynamic(const Json& config, const RunContext& ctx);
JkoReport cmd_jko(const Json& config, const RunContext& ctx);

// Default configurations shipped with the tool.
Json default_config(const std::string& command);

}  // namespace got::cli
