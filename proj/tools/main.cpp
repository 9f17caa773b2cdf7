#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "got/dynamic_ot.hpp"
#include "got/static_ot.hpp"
#include "output.hpp"

namespace {

using got::cli::num;

void summarize(const got::cli::ConvergeReport& r) {
    std::printf("%-8s %-10s %-8s %-14s %-14s %-12s\n", "epsilon", "h", "cells", "OT_eps", "OT_0", "|diff|");
    for (const auto& row : r.rows)
        std::printf("%-8s %-10s %-8zu %-14s %-14s %-12s\n", num(row.epsilon, 4).c_str(), num(row.spacing, 4).c_str(),
                    row.cells, num(row.ot_tube, 8).c_str(), num(row.ot_graph, 8).c_str(), num(row.gap, 5).c_str());
    std::printf("fitted order %s, monotone %s, %.1f s\n", num(r.slope, 4).c_str(), r.monotone ? "yes" : "no",
                r.seconds);
    if (r.sandwich) {
        std::printf("cost sandwich: fitted K = %s (empirical), diameter %s, %.1f s\n",
                    num(r.sandwich->fitted_k, 4).c_str(), num(r.sandwich->diameter, 4).c_str(), r.sandwich_seconds);
        for (const auto& row : r.sandwich->rows)
            std::printf("  epsilon %s: %zu/%zu pairs within bounds\n", num(row.epsilon, 4).c_str(), row.within,
                        row.pairs);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal transport on metric graphs and their tubular thickenings"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = ".";
    long long seed = -1;
    bool print_default = false;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"converge", "tube-to-graph convergence of transport costs"},
        {"figure1", "matched trajectories through a rasterized junction"},
        {"stability", "transport cost change under network edits"},
        {"monotonicity", "solve a graph transport problem and check cyclical monotonicity"},
        {"dynamic", "dynamic transport by action minimization"},
        {"jko", "minimizing-movement gradient flow"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        auto* cfg = sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "seed overriding the configuration")->check(CLI::NonNegativeNumber);
        auto* def = sub->add_flag("--print-default-config", print_default, "print the default configuration and exit");
        cfg->excludes(def);
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::string command;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) command = name;

    try {
        if (print_default) {
            std::cout << got::cli::default_config(command).dump(2) << "\n";
            return 0;
        }
        if (config_path.empty()) throw got::cli::ConfigError("--config is required");
        got::cli::RunContext ctx;
        ctx.out_dir = out_dir;
        ctx.config_dir = std::filesystem::absolute(config_path).parent_path();
        if (seed >= 0) ctx.seed = static_cast<std::uint64_t>(seed);
        ctx.threads = got::cli::thread_budget();
        const got::Json config = got::read_json_file(config_path);
        std::filesystem::create_directories(ctx.out_dir);

        if (command == "converge") {
            summarize(got::cli::cmd_converge(config, ctx));
        } else if (command == "figure1") {
            const auto r = got::cli::cmd_figure1(config, ctx);
            std::printf("%zu trajectories, %zu inside the mask, %zu shared interior cells (max %zu), cost %s\n",
                        r.trajectories, r.contained, r.shared_cells, r.max_sharing, num(r.assignment_cost).c_str());
        } else if (command == "stability") {
            const auto r = got::cli::cmd_stability(config, ctx);
            for (const auto& row : r.rows)
                std::printf("%-20s OT %s -> %s  |change| %s  bounds %s, %s  %s\n", row.label.c_str(),
                            num(row.ot_before, 6).c_str(), num(row.ot_after, 6).c_str(),
                            num(std::abs(row.ot_after - row.ot_before), 4).c_str(), num(row.bound_pi, 4).c_str(),
                            num(row.bound_inf, 4).c_str(), row.holds ? "ok" : "VIOLATED");
        } else if (command == "monotonicity") {
            const auto r = got::cli::cmd_monotonicity(config, ctx);
            std::printf("OT value %s, duality gap %s, %zu cycles checked (%s), %zu violations\n",
                        num(r.value).c_str(), num(r.gap, 3).c_str(), r.cycles, r.exhaustive ? "exhaustive" : "sampled",
                        r.violations);
        } else if (command == "dynamic") {
            const auto r = got::cli::cmd_dynamic(config, ctx);
            std::printf("dynamic value %s, static value %s, %zu iterations, KKT residual %s\n", num(r.value, 6).c_str(),
                        num(r.static_value, 6).c_str(), r.iterations, num(r.kkt_residual, 3).c_str());
        } else if (command == "jko") {
            const auto r = got::cli::cmd_jko(config, ctx);
            std::printf("%zu states, energy %s -> %s, monotone %s\n", r.energy.size(), num(r.energy.front(), 6).c_str(),
                        num(r.energy.back(), 6).c_str(), r.monotone ? "yes" : "no");
        }
        return 0;
    } catch (const got::cli::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const got::InfeasibleError& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return 3;
    } catch (const got::FormatError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const got::DomainError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const got::cli::CheckFailure& e) {
        std::fprintf(stderr, "check failed: %s\n", e.what());
        return 3;
    } catch (const got::SolverError& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
