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

#include "sgpmpc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "json.hpp"

namespace sgpmpc {

namespace {

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

Matrix diagonal(const std::vector<double>& v) { return to_vector(v).asDiagonal(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

struct Extent {
    double x_min = std::numeric_limits<double>::infinity();
    double x_max = -std::numeric_limits<double>::infinity();
    double y_min = std::numeric_limits<double>::infinity();
    double y_max = -std::numeric_limits<double>::infinity();

    void add(const Point2& p) {
        x_min = std::min(x_min, p.x());
        x_max = std::max(x_max, p.x());
        y_min = std::min(y_min, p.y());
        y_max = std::max(y_max, p.y());
    }
    void pad() {
        const double dx = std::max(1e-6, 0.05 * (x_max - x_min));
        const double dy = std::max(1e-6, 0.05 * (y_max - y_min));
        x_min -= dx;
        x_max += dx;
        y_min -= dy;
        y_max += dy;
    }
};

}  // namespace

ExperimentSetup build_experiment(const ExperimentConfig& config, std::uint64_t seed) {
    config.validate();
    ExperimentSetup setup;
    if (config.system == "pendulum") {
        PendulumParams p;
        if (config.dt > 0.0) p.dt = config.dt;
        p.wide_angle_box = config.wide_angle_box;
        setup.system = pendulum_spec(p);
    } else {
        BicycleParams p;
        if (config.dt > 0.0) p.dt = config.dt;
        setup.system = bicycle_spec(p);
    }
    if (config.system == "pendulum" && !config.obstacles.empty())
        throw ConfigError("obstacles are only supported for the bicycle model");
    setup.system->state_constraints = obstacle_constraints(config.obstacles);
    setup.obstacles = config.obstacles;

    TrainingGridSpec grid;
    grid.counts = config.grid_counts;
    grid.lower = to_vector(config.grid_lower);
    grid.upper = to_vector(config.grid_upper);
    grid.noise_std = config.data_noise_std.value_or(config.noise_std);
    grid.with_gradients = config.grid_gradients;
    const auto data = generate_training_data(*setup.system, grid, seed);

    ConfidenceParams confidence;
    confidence.sqrt_beta = config.sqrt_beta;
    const double noise_var = config.noise_std * config.noise_std;
    std::optional<std::vector<KernelParams>> fixed;
    if (!config.fit_hyperparameters) {
        KernelParams kp;
        kp.lengthscales = to_vector(config.lengthscales);
        kp.output_scale = config.output_scale;
        fixed = std::vector<KernelParams>(static_cast<std::size_t>(setup.system->n_g), kp);
    }
    setup.model = make_gp_model(data, noise_var, confidence, fixed);

    OcpDefinition& ocp = setup.ocp;
    ocp.system = setup.system;
    ocp.model = setup.model;
    ocp.horizon = config.horizon;
    ocp.samples = config.samples;
    ocp.cost.Q = diagonal(config.Q);
    ocp.cost.R = diagonal(config.R);
    ocp.cost.x_ref = to_vector(config.x_ref);
    ocp.cost.u_ref = to_vector(config.u_ref);
    if (config.Q_terminal) ocp.cost.Q_terminal = diagonal(*config.Q_terminal);
    ocp.soft_state_constraints = config.soft_constraints;
    ocp.soft_weight = config.soft_weight;
    ocp.sparse_qp = config.sparse_qp;
    ocp.qp.tol = config.qp_tol;
    ocp.qp.max_iter = config.qp_max_iter;
    ocp.sampler.truncate = config.truncate;
    ocp.sampler.max_draws = config.max_draws;
    ocp.sampler.pivot_tolerance = config.pivot_tolerance;
    ocp.sampler.row_jitter = config.row_jitter;
    ocp.seed = seed;
    ocp.validate();

    setup.mpc.sqp_iterations = config.sqp_iterations;
    setup.mpc.memory_groups = config.memory_groups;
    setup.mpc.steps = config.steps;
    setup.mpc.apply_after_last_feedback = config.apply_after_last_feedback;
    setup.mpc.validate();

    setup.x0 = to_vector(config.x0);
    setup.u_guess = to_vector(config.u_guess).replicate(1, config.horizon);
    return setup;
}

PropagationResult run_propagation(const ExperimentSetup& setup, const ExperimentConfig& config,
                                  std::uint64_t seed) {
    PropagationResult r;
    OcpDefinition ocp = setup.ocp;
    ocp.seed = seed;
    r.dim_a = config.plot_dims[0];
    r.dim_b = config.plot_dims[1];

    SqpIterate it = make_initial_iterate(ocp, setup.x0, setup.u_guess);
    r.sqp = run_sqp(ocp, it, setup.x0, config.propagate_iterations);
    r.u = it.u;
    r.sample_trajectories = it.x;
    r.forward_deviation = verify_forward_consistency(it, ocp, setup.x0);

    const Plant plant(setup.system);
    const Index H = ocp.horizon;
    r.true_trajectory.resize(setup.system->n_x, H + 1);
    r.true_trajectory.col(0) = setup.x0;
    for (Index i = 0; i < H; ++i) r.true_trajectory.col(i + 1) = plant.step(r.true_trajectory.col(i), r.u.col(i));

    r.monte_carlo =
        monte_carlo_envelope(*setup.system, setup.model, setup.x0, r.u, config.mc_samples, seed, ocp.sampler);
    r.linearized = linearized_propagation(*setup.system, *setup.model, setup.x0, r.u, config.sqrt_beta);
    r.monte_carlo_hulls = convex_hulls(r.monte_carlo, r.dim_a, r.dim_b);

    StageClouds sample_clouds(static_cast<std::size_t>(H + 1), Matrix(setup.system->n_x, ocp.samples));
    for (Index n = 0; n < ocp.samples; ++n)
        for (Index i = 0; i <= H; ++i)
            sample_clouds[static_cast<std::size_t>(i)].col(n) = r.sample_trajectories[static_cast<std::size_t>(n)].col(i);
    r.sample_hulls = convex_hulls(sample_clouds, r.dim_a, r.dim_b);

    r.coverage.resize(H + 1);
    r.true_contained.resize(static_cast<std::size_t>(H + 1));
    for (Index i = 0; i <= H; ++i) {
        const auto si = static_cast<std::size_t>(i);
        r.coverage(i) = coverage(r.sample_hulls[si], project(r.monte_carlo[si], r.dim_a, r.dim_b));
        const Point2 truth(r.true_trajectory(r.dim_a, i), r.true_trajectory(r.dim_b, i));
        r.true_contained[si] = contains(r.monte_carlo_hulls[si], truth) ? 1 : 0;
    }
    r.final_ellipse_area = ellipse_area(r.linearized.back(), r.dim_a, r.dim_b);
    r.final_monte_carlo_area = polygon_area(r.monte_carlo_hulls.back());
    return r;
}

CsvTable propagation_table(const PropagationResult& r) {
    CsvTable t;
    t.header = {"method", "stage", "vertex", "x", "y"};
    auto emit = [&](const std::string& method, std::size_t stage, const Polygon& poly) {
        for (std::size_t v = 0; v < poly.size(); ++v)
            t.add_row({method, std::to_string(stage), std::to_string(v), format_number(poly[v].x()),
                       format_number(poly[v].y())});
    };
    const std::size_t stages = r.monte_carlo_hulls.size();
    for (std::size_t i = 0; i < stages; ++i) {
        emit("mc", i, r.monte_carlo_hulls[i]);
        emit("linearized", i, ellipse_boundary(r.linearized[i], r.dim_a, r.dim_b, 48));
        emit("hulls", i, r.sample_hulls[i]);
        emit("true", i, {Point2(r.true_trajectory(r.dim_a, static_cast<Index>(i)),
                                r.true_trajectory(r.dim_b, static_cast<Index>(i)))});
    }
    return t;
}

void write_propagation(const PropagationResult& r, const std::string& dir) {
    ensure_dir(dir);
    write_text(join(dir, "propagation.csv"), to_csv(propagation_table(r)));

    Extent ext;
    for (const auto& poly : r.monte_carlo_hulls)
        for (const auto& p : poly) ext.add(p);
    for (const auto& e : r.linearized)
        for (const auto& p : ellipse_boundary(e, r.dim_a, r.dim_b, 32)) ext.add(p);
    ext.pad();
    SvgPlot svg(ext.x_min, ext.x_max, ext.y_min, ext.y_max);
    svg.axes("x" + std::to_string(r.dim_a), "x" + std::to_string(r.dim_b));
    for (const auto& poly : r.monte_carlo_hulls) svg.polygon(poly, "#4a7fd0", "#4a7fd0", 0.25);
    for (const auto& e : r.linearized) svg.polygon(ellipse_boundary(e, r.dim_a, r.dim_b, 48), "none", "#e07b00", 0.0);
    for (const auto& poly : r.sample_hulls) svg.polygon(poly, "#2a9d4b", "#1d6e35", 0.2);
    std::vector<Point2> truth;
    for (Index i = 0; i < r.true_trajectory.cols(); ++i)
        truth.emplace_back(r.true_trajectory(r.dim_a, i), r.true_trajectory(r.dim_b, i));
    svg.polyline(truth, "black", 1.5, true);
    svg.text({ext.x_min + 0.02 * (ext.x_max - ext.x_min), ext.y_max - 0.04 * (ext.y_max - ext.y_min)},
             "blue: Monte-Carlo hull, orange: linearized, green: sample hulls, dashed: true system", 12);
    write_text(join(dir, "propagation.svg"), svg.str());

    nlohmann::json j;
    j["stages"] = r.coverage.size();
    j["coverage"] = std::vector<double>(r.coverage.data(), r.coverage.data() + r.coverage.size());
    j["min_coverage"] = r.coverage.size() ? r.coverage.minCoeff() : 0.0;
    j["true_contained_all"] = std::all_of(r.true_contained.begin(), r.true_contained.end(), [](char c) { return c; });
    j["final_ellipse_area"] = r.final_ellipse_area;
    j["final_monte_carlo_hull_area"] = r.final_monte_carlo_area;
    j["forward_deviation_max"] = r.forward_deviation.size() ? r.forward_deviation.maxCoeff() : 0.0;
    std::vector<double> steps;
    for (const auto& s : r.sqp.steps) steps.push_back(std::max(s.step_u, s.step_x));
    j["sqp_step_norms"] = steps;
    write_text(join(dir, "propagation_summary.json"), j.dump(2) + "\n");
}

void write_closed_loop(const ClosedLoopTrace& trace, const ExperimentSetup& setup, const std::string& dir) {
    ensure_dir(dir);
    write_text(join(dir, "trace.csv"), to_csv(trace_to_csv(trace)));

    const SystemSpec& sys = *setup.system;
    const Index a = 0, b = 1;
    SvgPlot svg(sys.state_box.lower(a) - 1.0, sys.state_box.upper(a) + 1.0, sys.state_box.lower(b) - 0.5,
                sys.state_box.upper(b) + 0.5, 1400, 360);
    svg.axes("x" + std::to_string(a), "x" + std::to_string(b));
    svg.polygon({{sys.state_box.lower(a), sys.state_box.lower(b)},
                 {sys.state_box.upper(a), sys.state_box.lower(b)},
                 {sys.state_box.upper(a), sys.state_box.upper(b)},
                 {sys.state_box.lower(a), sys.state_box.upper(b)}},
                "#dddddd", "#333333", 0.3);
    nlohmann::json obstacles = nlohmann::json::array();
    for (const auto& [xe, ye] : setup.obstacles) {
        Ellipsoid e{Vector{{xe, ye}}, Matrix(Vector{{9.0 * 5.67, 5.67}}.asDiagonal()), 1.0};
        svg.polygon(ellipse_boundary(e, 0, 1, 64), "#555555", "#000000", 0.5);
        obstacles.push_back({xe, ye});
    }
    for (const auto& s : trace.steps) {
        if (s.k % 5 != 0) continue;
        for (const auto& pred : s.predictions) {
            std::vector<Point2> line;
            for (Index i = 0; i < pred.cols(); ++i) line.emplace_back(pred(a, i), pred(b, i));
            svg.polyline(line, "#39b0c4", 0.5, false, 0.5);
        }
    }
    std::vector<Point2> path;
    for (const auto& s : trace.steps) path.emplace_back(s.x(a), s.x(b));
    if (trace.final_state.size() > 0) path.emplace_back(trace.final_state(a), trace.final_state(b));
    svg.polyline(path, "#1f3fbf", 2.0);
    write_text(join(dir, "closed_loop.svg"), svg.str());

    nlohmann::json j;
    j["steps"] = trace.steps.size();
    j["max_violation"] = trace.steps.empty() ? 0.0 : trace.max_violation();
    j["violations_above_1e-6"] = std::count_if(trace.steps.begin(), trace.steps.end(),
                                               [](const StepRecord& s) { return s.max_violation > 1e-6; });
    j["memory_bound"] = trace.memory_bound;
    j["memory_bound_held"] = trace.memory_bound_held;
    std::vector<double> final_state(trace.final_state.data(), trace.final_state.data() + trace.final_state.size());
    j["final_state"] = final_state;
    j["obstacles"] = obstacles;
    j["error"] = trace.error;
    write_text(join(dir, "violations.json"), j.dump(2) + "\n");
}

std::vector<BenchCell> run_bench(const ExperimentConfig& config, const std::vector<Index>& samples,
                                 const std::vector<int>& iterations, int repeats, std::uint64_t seed) {
    if (repeats < 1) throw ConfigError("bench needs at least one repeat");
    if (samples.empty() || iterations.empty()) throw ConfigError("bench needs sample and iteration lists");
    const ExperimentSetup base = build_experiment(config, seed);
    std::vector<BenchCell> cells;
    for (Index n : samples) {
        for (int l : iterations) {
            if (n < 1 || l < 1) throw ConfigError("bench sample and iteration counts must be positive");
            OcpDefinition ocp = base.ocp;
            ocp.samples = n;
            MpcConfig mpc = base.mpc;
            mpc.sqp_iterations = l;
            mpc.memory_groups = std::min<Index>(mpc.memory_groups, l);
            mpc.steps = config.bench_steps;
            std::vector<ClosedLoopTrace> traces;
            for (int r = 0; r < repeats; ++r) {
                Rng rng = make_rng(seed, streams::kBenchmark, static_cast<std::uint64_t>(r));
                traces.push_back(run_closed_loop(ocp, mpc, base.x0, base.u_guess, rng()));
                if (!traces.back().error.empty()) throw Error("bench run failed: " + traces.back().error);
            }
            cells.push_back({n, l, timing_report(traces)});
        }
    }
    return cells;
}

std::string format_bench_table(const std::vector<BenchCell>& cells, Index horizon) {
    std::vector<Index> ns;
    std::vector<int> ls;
    for (const auto& c : cells) {
        if (std::find(ns.begin(), ns.end(), c.samples) == ns.end()) ns.push_back(c.samples);
        if (std::find(ls.begin(), ls.end(), c.iterations) == ls.end()) ls.push_back(c.iterations);
    }
    std::ostringstream out;
    out << "Run time per MPC step in ms (mean +- std), H = " << horizon << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%8s", "N \\ L");
    out << buf;
    for (int l : ls) {
        std::snprintf(buf, sizeof(buf), " | %20d", l);
        out << buf;
    }
    out << "\n";
    for (Index n : ns) {
        std::snprintf(buf, sizeof(buf), "%8ld", static_cast<long>(n));
        out << buf;
        for (int l : ls) {
            const auto it = std::find_if(cells.begin(), cells.end(),
                                         [&](const BenchCell& c) { return c.samples == n && c.iterations == l; });
            if (it == cells.end()) {
                std::snprintf(buf, sizeof(buf), " | %20s", "-");
            } else {
                char cell[48];
                std::snprintf(cell, sizeof(cell), "%.2f +- %.2f", it->stats.mean_ms, it->stats.std_ms);
                std::snprintf(buf, sizeof(buf), " | %20s", cell);
            }
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

CsvTable bench_csv(const std::vector<BenchCell>& cells) {
    CsvTable t;
    t.header = {"samples", "iterations", "mean_ms", "std_ms", "count"};
    for (const auto& c : cells)
        t.add_row({std::to_string(c.samples), std::to_string(c.iterations), format_number(c.stats.mean_ms),
                   format_number(c.stats.std_ms), std::to_string(c.stats.count)});
    return t;
}

}  // namespace sgpmpc
