/*
 Copyright 2026 The sgpmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// sgpmpc command-line tool.
//
//   sgpmpc propagate   --config FILE [--seed U64] [--out DIR]
//   sgpmpc closed-loop --config FILE [--seed U64] [--out DIR] [--steps T]
//   sgpmpc bench       --config FILE --samples 5,10,20 --iters 1..3 --repeats K [--out DIR]
//
// Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sgpmpc/experiments.hpp"

namespace {

using namespace sgpmpc;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// "5,10,20", "1..5" or a mix such as "1..3,8".
std::vector<long> parse_list(const std::string& text, const std::string& what) {
    std::vector<long> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = text.substr(pos, comma - pos);
        try {
            const std::size_t dots = item.find("..");
            std::size_t used = 0;
            if (dots == std::string::npos) {
                out.push_back(std::stol(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } else {
                const long lo = std::stol(item.substr(0, dots));
                const long hi = std::stol(item.substr(dots + 2), &used);
                if (used != item.size() - dots - 2 || hi < lo) throw std::invalid_argument(item);
                for (long v = lo; v <= hi; ++v) out.push_back(v);
            }
        } catch (const std::logic_error&) {
            throw ConfigError("bad " + what + " list '" + text + "'");
        }
        pos = comma + 1;
    }
    for (long v : out)
        if (v < 1) throw ConfigError(what + " values must be positive");
    return out;
}

ExperimentConfig load(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out) {
    ExperimentConfig cfg = load_config(path);
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.output_dir = out;
    return cfg;
}

int run_propagate(const ExperimentConfig& cfg) {
    const ExperimentSetup setup = build_experiment(cfg, cfg.seed);
    const PropagationResult r = run_propagation(setup, cfg, cfg.seed);
    write_propagation(r, cfg.output_dir);
    const bool contained =
        std::all_of(r.true_contained.begin(), r.true_contained.end(), [](char c) { return c != 0; });
    std::printf("stages %ld, min hull coverage %.3f, true trajectory inside MC hull: %s\n",
                static_cast<long>(r.coverage.size()), r.coverage.minCoeff(), contained ? "yes" : "no");
    std::printf("final-stage area: linearized %.4g, Monte-Carlo hull %.4g\n", r.final_ellipse_area,
                r.final_monte_carlo_area);
    std::printf("max forward-consistency deviation %.3g\n", r.forward_deviation.maxCoeff());
    Index outside = 0;
    for (const auto& s : r.sqp.steps) outside = std::max(outside, s.out_of_domain_points);
    if (outside > 0)
        std::fprintf(stderr, "warning: up to %ld predicted stage points left the constraint box; "
                             "confidence bounds there are extrapolated\n", static_cast<long>(outside));
    if (r.forward_deviation.maxCoeff() > 1e-4)
        std::fprintf(stderr,
                     "warning: SQP iterate not converged after %d iterations (last step %.3g); "
                     "sample hulls do not describe a consistent trajectory\n",
                     cfg.propagate_iterations, r.sqp.steps.back().step_u);
    std::printf("wrote %s\n", cfg.output_dir.c_str());
    return 0;
}

int run_closed(const ExperimentConfig& cfg) {
    const ExperimentSetup setup = build_experiment(cfg, cfg.seed);
    const ClosedLoopTrace trace = run_closed_loop(setup.ocp, setup.mpc, setup.x0, setup.u_guess, cfg.seed);
    write_closed_loop(trace, setup, cfg.output_dir);
    if (!trace.error.empty()) {
        std::cerr << "closed loop aborted after " << trace.steps.size() << " steps: " << trace.error << "\n";
        return kExitNumerical;
    }
    Index outside = 0;
    for (const auto& s : trace.steps) outside = std::max(outside, s.out_of_domain_points);
    if (outside > 0)
        std::fprintf(stderr, "warning: up to %ld predicted stage points per step left the constraint box; "
                             "confidence bounds there are extrapolated\n", static_cast<long>(outside));
    std::printf("steps %zu, max violation %.3g, memory bound %s\n", trace.steps.size(),
                trace.steps.empty() ? 0.0 : trace.max_violation(), trace.memory_bound_held ? "held" : "VIOLATED");
    std::printf("final state:");
    for (Index i = 0; i < trace.final_state.size(); ++i) std::printf(" %.4f", trace.final_state(i));
    std::printf("\nwrote %s\n", cfg.output_dir.c_str());
    return 0;
}

int run_benchmark(const ExperimentConfig& cfg, const std::string& samples, const std::string& iters,
                  int repeats) {
    std::vector<Index> ns;
    for (long v : parse_list(samples, "samples")) ns.push_back(v);
    std::vector<int> ls;
    for (long v : parse_list(iters, "iters")) ls.push_back(static_cast<int>(v));
    if (repeats < 1) throw ConfigError("--repeats must be at least 1");
    const auto cells = run_bench(cfg, ns, ls, repeats, cfg.seed);
    const std::string table = format_bench_table(cells, cfg.horizon);
    std::cout << table;
    std::filesystem::create_directories(cfg.output_dir);
    write_text((std::filesystem::path(cfg.output_dir) / "bench.txt").string(), table);
    write_text((std::filesystem::path(cfg.output_dir) / "bench.csv").string(), to_csv(bench_csv(cells)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sampling-based GP model predictive control experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, samples = "5,10,20", iters = "1..3";
    std::optional<std::uint64_t> seed;
    std::optional<long> steps;
    int repeats = 3;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "master seed (overrides the config)");
        cmd->add_option("--out", out_dir, "output directory (overrides the config)");
    };
    CLI::App* propagate = app.add_subcommand("propagate", "open-loop uncertainty propagation comparison");
    add_common(propagate);
    CLI::App* closed = app.add_subcommand("closed-loop", "closed-loop MPC run");
    add_common(closed);
    closed->add_option("--steps", steps, "closed-loop steps (overrides the config)");
    CLI::App* bench = app.add_subcommand("bench", "timing sweep over sample and iteration counts");
    add_common(bench);
    bench->add_option("--samples", samples, "sample counts, e.g. 5,10,20");
    bench->add_option("--iters", iters, "SQP iteration counts, e.g. 1..5");
    bench->add_option("--repeats", repeats, "repeats per cell");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        ExperimentConfig cfg = load(config_path, seed, out_dir);
        if (*propagate) return run_propagate(cfg);
        if (*closed) {
            if (steps) {
                cfg.steps = *steps;
                cfg.validate();
            }
            return run_closed(cfg);
        }
        return run_benchmark(cfg, samples, iters, repeats);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}
