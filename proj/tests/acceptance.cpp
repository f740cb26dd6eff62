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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Reference values are recomputed here
// with the independent implementations in oracles.hpp.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sgpmpc/experiments.hpp"

namespace {

using namespace sgpmpc;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

ExperimentConfig shipped(const char* name) { return load_config(std::string(SGPMPC_CONFIG_DIR) + "/" + name); }

// 1. Block-sequential draws reproduce the joint posterior.
Outcome sequential_sampling() {
    const auto t0 = std::chrono::steady_clock::now();
    auto model = std::make_shared<GpModel>();
    KernelParams p;
    p.lengthscales = Vector{{0.6}};
    p.output_scale = 1.0;
    ObservationSet obs(1);
    Matrix X(1, 5);
    X << -1.0, -0.4, 0.1, 0.5, 1.2;
    Vector y(5);
    for (Index i = 0; i < 5; ++i) {
        y(i) = std::sin(3.0 * X(0, i));
        obs.append(X.col(i), 0, y(i), 1e-6);
    }
    model->outputs.emplace_back(p, obs);
    Matrix Z(1, 6);
    Z << -1.3, -0.7, -0.1, 0.3, 0.8, 1.6;
    const Index M = 20000;
    const auto r = sequential_equivalence_check(model, Z, {{0, 1, 2}, {3, 4, 5}}, M, 2026);
    const auto ref = oracle::gp_posterior(X, y, Vector::Constant(5, 1e-6), Z, Vector{{0.6}}, 1.0);
    const double frob = (r.sequential_covariance - ref.cov).norm() / ref.cov.norm();
    double zmax = 0.0;
    for (Index i = 0; i < 6; ++i)
        zmax = std::max(zmax, std::abs(r.sequential_mean(i) - ref.mean(i)) /
                                  std::sqrt(ref.cov(i, i) / static_cast<double>(M)));
    const double t = seconds_since(t0);
    return {frob < 0.05 && zmax < 4.0 && t < 30.0,
            fmt("covariance rel. Frobenius error %.4f (< 0.05), max mean z-score %.2f (< 4), %.1f s (< 30)", frob,
                zmax, t)};
}

// 2. After L iterations each sample's states equal a forward simulation of
// the same sampled function. Also returns the CSV used by criterion 9.
Outcome forward_consistency(std::string* csv) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg = shipped("pendulum.cfg");
    cfg.samples = 5;
    const ExperimentSetup setup = build_experiment(cfg, cfg.seed);
    SqpIterate it = make_initial_iterate(setup.ocp, setup.x0, setup.u_guess);
    run_sqp(setup.ocp, it, setup.x0, 20);
    const Vector dev = verify_forward_consistency(it, setup.ocp, setup.x0);
    const double t = seconds_since(t0);
    if (csv) {
        CsvTable table;
        table.header = {"sample", "stage", "x0", "x1", "u0", "deviation"};
        for (Index n = 0; n < 5; ++n)
            for (Index i = 0; i <= setup.ocp.horizon; ++i) {
                const Matrix& x = it.x[static_cast<std::size_t>(n)];
                table.add_row({std::to_string(n), std::to_string(i), format_number(x(0, i)), format_number(x(1, i)),
                               i < setup.ocp.horizon ? format_number(it.u(0, i)) : "", format_number(dev(n))});
            }
        *csv = to_csv(table);
    }
    return {dev.size() == 5 && dev.maxCoeff() < 1e-4 && t < 60.0,
            fmt("max deviation over 5 samples %.3g (< 1e-4) after 20 iterations, %.1f s (< 60)", dev.maxCoeff(), t)};
}

// Richardson-extrapolated central difference of a scalar function.
double derivative(const std::function<double(double)>& f, double h) {
    const auto cd = [&](double s) { return (f(s) - f(-s)) / (2.0 * s); };
    return (4.0 * cd(h / 2.0) - cd(h)) / 3.0;
}

// 3. Derivative kernel blocks and posterior gradients.
Outcome derivative_kernel() {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.5, 2.0);
    const Index d = 3;
    const double h = 1e-3;
    double worst_block = 0.0;
    for (int pair = 0; pair < 100; ++pair) {
        KernelParams p;
        p.lengthscales = Vector(d);
        for (Index i = 0; i < d; ++i) p.lengthscales(i) = unif(rng);
        p.output_scale = unif(rng);
        Vector a(d), b(d);
        for (Index i = 0; i < d; ++i) {
            a(i) = normal(rng);
            b(i) = a(i) + 0.7 * p.lengthscales(i) * normal(rng);
        }
        const Matrix block = se_kernel_derivative_block(a, b, p);
        const auto k = [&](const Vector& x, const Vector& z) {
            return oracle::se(x, z, p.lengthscales, p.output_scale);
        };
        Matrix ref(d + 1, d + 1);
        ref(0, 0) = k(a, b);
        for (Index i = 0; i < d; ++i) {
            const Vector ei = Vector::Unit(d, i);
            ref(1 + i, 0) = derivative([&](double s) { return k(a + s * ei, b); }, h);
            ref(0, 1 + i) = derivative([&](double s) { return k(a, b + s * ei); }, h);
            for (Index j = 0; j < d; ++j) {
                const Vector ej = Vector::Unit(d, j);
                ref(1 + i, 1 + j) = derivative(
                    [&](double s) { return derivative([&](double t) { return k(a + s * ei, b + t * ej); }, h); }, h);
            }
        }
        // relative error per entry, with a floor of 1e-3 of the block's
        // largest entry for entries that vanish at this pair
        const double floor = 1e-3 * ref.cwiseAbs().maxCoeff();
        for (Index i = 0; i <= d; ++i)
            for (Index j = 0; j <= d; ++j)
                worst_block = std::max(worst_block,
                                       std::abs(block(i, j) - ref(i, j)) / std::max(std::abs(ref(i, j)), floor));
    }

    // posterior mean gradient on a mixed value/gradient dataset
    KernelParams p;
    p.lengthscales = Vector{{0.9, 1.3, 0.7}};
    p.output_scale = 1.5;
    ObservationSet obs(d);
    for (int i = 0; i < 25; ++i) {
        Vector z(d);
        for (Index j = 0; j < d; ++j) z(j) = normal(rng);
        const double f = std::sin(z(0)) * std::cos(z(1)) + 0.3 * z(2) * z(2);
        obs.append(z, 0, f, 1e-6);
        if (i % 2 == 0) {
            obs.append(z, 1, std::cos(z(0)) * std::cos(z(1)), 1e-6);
            obs.append(z, 3, 0.6 * z(2), 1e-6);
        }
    }
    const ConditionedGp gp(p, obs);
    Matrix Z(d, 20);
    for (Index c = 0; c < 20; ++c)
        for (Index j = 0; j < d; ++j) Z(j, c) = normal(rng);
    const Posterior post = gp.posterior(Z, true);
    double worst_grad = 0.0;
    for (Index c = 0; c < 20; ++c)
        for (Index j = 0; j < d; ++j) {
            const Vector ej = Vector::Unit(d, j);
            const double fd = derivative(
                [&](double s) {
                    const Vector z = Z.col(c) + s * ej;
                    return gp.posterior(z, false).mean(0);
                },
                1e-3);
            worst_grad = std::max(worst_grad, std::abs(post.mean(c * (d + 1) + 1 + j) - fd));
        }
    return {worst_block < 1e-5 && worst_grad < 1e-4,
            fmt("kernel blocks max rel. error %.2e (< 1e-5) at 100 pairs; posterior gradient max error %.2e (< 1e-4)",
                worst_block, worst_grad)};
}

// 4. QP solver against active-set enumeration; condensed vs sparse OCP paths.
Outcome qp_oracle() {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<Index> nvar(2, 30), nin(1, 20), neq(0, 3);
    double worst = 0.0;
    int solved = 0;
    for (int k = 0; k < 50; ++k) {
        const Index n = nvar(rng);
        const Index me = std::min<Index>(neq(rng), n - 1);
        const auto r = oracle::random_qp(rng, n, me, nin(rng));
        const auto ref = oracle::active_set_enumeration(r.P, r.q, r.A, r.b, r.G, r.h);
        if (!ref) return {false, fmt("oracle found no KKT point for QP %d", k)};
        DenseQp qp{r.P, r.q, r.A, r.b, r.G, r.h, {}, 1e4};
        const QpSolution s = solve_qp(qp);
        if (s.status == QpStatus::Optimal) ++solved;
        worst = std::max(worst, (s.x - *ref).lpNorm<Eigen::Infinity>());
    }
    std::mt19937_64 orng(405);
    double path = 0.0;
    for (int k = 0; k < 10; ++k) {
        const OcpQp ocp = fixtures::random_ocp(orng, 1 + k % 4, 4 + k, 3, 2, k % 2 == 0, k % 2 == 0 ? 0.4 : 50.0);
        const QpOptions opt{1e-12, 200};
        const OcpSolution a = solve_condensed(ocp, opt), b = solve_sparse(ocp, opt);
        path = std::max(path, (a.du - b.du).lpNorm<Eigen::Infinity>());
    }
    return {solved == 50 && worst < 1e-6 && path < 1e-8,
            fmt("50 QPs: %d optimal, max primal error %.2e (< 1e-6); condensed vs sparse max |du| diff %.2e (< 1e-8)",
                solved, worst, path)};
}

// 5. Pendulum propagation comparison. Also returns the CSV for criterion 9.
Outcome propagation(std::string* csv) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cfg = shipped("pendulum.cfg");
    cfg.mc_samples = 1000;
    cfg.samples = 20;
    const ExperimentSetup setup = build_experiment(cfg, cfg.seed);
    const PropagationResult r = run_propagation(setup, cfg, cfg.seed);
    const double t = seconds_since(t0);
    if (csv) *csv = to_csv(propagation_table(r));

    const Index a = cfg.plot_dims[0], b = cfg.plot_dims[1];
    const Plant plant(setup.system);
    Vector x = setup.x0;
    bool truth_inside = true;
    double min_cov = 1.0;
    const Index H = setup.ocp.horizon;
    for (Index i = 0; i <= H; ++i) {
        if (i > 0) x = plant.step(x, r.u.col(i - 1));
        const Matrix& cloud = r.monte_carlo[static_cast<std::size_t>(i)];
        std::vector<oracle::P2> mc, samples;
        for (Index m = 0; m < cloud.cols(); ++m) mc.emplace_back(cloud(a, m), cloud(b, m));
        for (const auto& traj : r.sample_trajectories) samples.emplace_back(traj(a, i), traj(b, i));
        truth_inside = truth_inside && oracle::inside(oracle::gift_wrap(mc), oracle::P2(x(a), x(b)));
        const auto hull = oracle::gift_wrap(samples);
        Index in = 0;
        for (const auto& p : mc) in += oracle::inside(hull, p) ? 1 : 0;
        min_cov = std::min(min_cov, static_cast<double>(in) / static_cast<double>(mc.size()));
    }
    const Matrix& cov = r.linearized.back().covariance;
    const double s = r.linearized.back().scale;
    const double ellipse =
        std::numbers::pi * s * s * std::sqrt(cov(a, a) * cov(b, b) - cov(a, b) * cov(b, a));
    std::vector<oracle::P2> last;
    for (Index m = 0; m < r.monte_carlo.back().cols(); ++m)
        last.emplace_back(r.monte_carlo.back()(a, m), r.monte_carlo.back()(b, m));
    const double hull_area = oracle::shoelace(oracle::gift_wrap(last));
    return {truth_inside && ellipse < hull_area && min_cov >= 0.6 && t < 300.0,
            fmt("(a) truth inside MC hull at all %ld stages: %s; (b) ellipse area %.3g < MC hull area %.3g; "
                "(c) min coverage %.3f (>= 0.6); %.1f s (< 300)",
                static_cast<long>(H + 1), truth_inside ? "yes" : "no", ellipse, hull_area, min_cov, t)};
}

// 6. More samples bring the closest sample nearer to the true residual.
Outcome sample_trend() {
    const ExperimentConfig cfg = shipped("pendulum.cfg");
    const ExperimentSetup setup = build_experiment(cfg, cfg.seed);
    const Plant plant(setup.system);
    const Vector x{{0.7, 1.1}}, u{{3.0}};
    const Vector z = setup.system->gp_input(x, u);
    const Vector g_true = plant.residual(x, u);
    const std::vector<Index> counts{1, 5, 20, 80};
    std::vector<double> medians;
    for (Index N : counts) {
        std::vector<double> best(100);
        for (int trial = 0; trial < 100; ++trial) {
            const std::uint64_t master = 100000ULL * static_cast<std::uint64_t>(N) + static_cast<std::uint64_t>(trial);
            double m = std::numeric_limits<double>::infinity();
            for (Index n = 0; n < N; ++n) {
                SampledDynamics s(setup.model, n, master, setup.ocp.sampler);
                m = std::min(m, (s.draw_joint(z, false).values.col(0) - g_true).norm());
            }
            best[static_cast<std::size_t>(trial)] = m;
        }
        std::nth_element(best.begin(), best.begin() + 50, best.end());
        const double upper = best[50];
        const double lower = *std::max_element(best.begin(), best.begin() + 50);
        medians.push_back(0.5 * (lower + upper));
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < medians.size(); ++i) decreasing = decreasing && medians[i] < medians[i - 1];
    return {decreasing, fmt("median min_n |g_true - g_n| for N = 1, 5, 20, 80: %.3e, %.3e, %.3e, %.3e (strictly "
                            "decreasing)",
                            medians[0], medians[1], medians[2], medians[3])};
}

// Worst violation of the car's boxes and obstacle ellipses, computed from
// the constants of the scenario.
double car_violation(const Vector& x, const std::vector<std::pair<double, double>>& obstacles) {
    const double lo[4] = {-2.14, 0.0, -1.14, -1.0}, hi[4] = {70.0, 6.0, 1.14, 15.0};
    double worst = -1e300;
    for (int i = 0; i < 4; ++i) worst = std::max({worst, lo[i] - x(i), x(i) - hi[i]});
    for (const auto& [xe, ye] : obstacles)
        worst = std::max(worst, 5.67 - (x(0) - xe) * (x(0) - xe) / 9.0 - (x(1) - ye) * (x(1) - ye));
    return worst;
}

double car_input_violation(const Vector& u) {
    return std::max({-0.6 - u(0), u(0) - 0.6, -2.0 - u(1), u(1) - 2.0});
}

// 7. Car closed loop. Also returns the CSV for criterion 9.
Outcome car_closed_loop(std::string* csv) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = shipped("car.cfg");
    const ExperimentSetup setup = build_experiment(cfg, cfg.seed);
    const ClosedLoopTrace trace = run_closed_loop(setup.ocp, setup.mpc, setup.x0, setup.u_guess, cfg.seed);
    const double t = seconds_since(t0);
    if (csv) *csv = to_csv(without_timing(trace_to_csv(trace)));
    if (!trace.error.empty()) return {false, "run aborted after " + std::to_string(trace.steps.size()) + " steps: " + trace.error};

    double worst = -1e300;
    Index count = 0;
    for (std::size_t k = 0; k < trace.steps.size(); ++k) {
        const Vector next = k + 1 < trace.steps.size() ? trace.steps[k + 1].x : trace.final_state;
        const double v = std::max(car_violation(next, cfg.obstacles), car_input_violation(trace.steps[k].u));
        worst = std::max(worst, v);
        count += v > 1e-6 ? 1 : 0;
    }
    const Index n_in = 3;
    const Index bound = setup.model->base_rows() +
                        (cfg.memory_groups + cfg.sqp_iterations) * cfg.horizon * (1 + n_in);
    bool memory = trace.memory_bound == bound;
    for (const auto& s : trace.steps) memory = memory && s.max_rows <= bound;
    const bool ok = static_cast<Index>(trace.steps.size()) == cfg.steps && count == 0 &&
                    trace.final_state(0) >= 65.0 && memory && t < 600.0;
    return {ok, fmt("%zu steps, %ld violations > 1e-6 (worst %.3g), final x_p %.2f (>= 65), memory bound %ld rows "
                    "%s, %.1f s (< 600)",
                    trace.steps.size(), static_cast<long>(count), worst, trace.final_state(0),
                    static_cast<long>(bound), memory ? "held" : "VIOLATED", t)};
}

// 8. Solve time grows with N and L.
Outcome timing_shape() {
    const ExperimentConfig cfg = shipped("car.cfg");
    const std::vector<Index> ns{5, 10, 20};
    const std::vector<int> ls{1, 2, 3};
    const auto cells = run_bench(cfg, ns, ls, 3, cfg.seed);
    auto at = [&](Index n, int l) {
        for (const auto& c : cells)
            if (c.samples == n && c.iterations == l) return c.stats.mean_ms;
        return std::nan("");
    };
    bool monotone = true;
    for (Index n : ns)
        for (std::size_t j = 1; j < ls.size(); ++j) monotone = monotone && at(n, ls[j]) >= at(n, ls[j - 1]);
    for (int l : ls)
        for (std::size_t i = 1; i < ns.size(); ++i) monotone = monotone && at(ns[i], l) >= at(ns[i - 1], l);
    std::string grid;
    for (Index n : ns) {
        grid += " N=" + std::to_string(n) + ":";
        for (int l : ls) grid += fmt(" %.1f", at(n, l));
    }
    const double base = at(20, 1);
    return {monotone && base < 250.0,
            fmt("monotone in N and L: %s; N=20, L=1 %.1f ms (< 250); ms per step (L=1,2,3)%s",
                monotone ? "yes" : "no", base, grid.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    // optional criterion ids on the command line run a subset
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    const auto t0 = std::chrono::steady_clock::now();
    int failures = 0, ran = 0;
    auto report = [&](int id, const char* title, const std::function<Outcome()>& run) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) return;
        ++ran;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("criterion %d %-28s %s  %s\n", id, title, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    };

    std::string csv2, csv5, csv7;
    report(1, "sequential-sampling", sequential_sampling);
    report(2, "forward-consistency", [&] { return forward_consistency(&csv2); });
    report(3, "derivative-kernel", derivative_kernel);
    report(4, "qp-oracle", qp_oracle);
    report(5, "propagation-comparison", [&] { return propagation(&csv5); });
    report(6, "sample-count-trend", sample_trend);
    report(7, "car-closed-loop", [&] { return car_closed_loop(&csv7); });
    report(8, "timing-shape", timing_shape);
    report(9, "determinism", [&]() -> Outcome {
        // first runs come from criteria 2, 5 and 7 unless those were skipped
        if (csv2.empty()) forward_consistency(&csv2);
        if (csv5.empty()) propagation(&csv5);
        if (csv7.empty()) car_closed_loop(&csv7);
        std::string again2, again5, again7;
        forward_consistency(&again2);
        propagation(&again5);
        car_closed_loop(&again7);
        const bool same2 = !csv2.empty() && csv2 == again2;
        const bool same5 = !csv5.empty() && csv5 == again5;
        const bool same7 = !csv7.empty() && csv7 == again7;
        return {same2 && same5 && same7,
                fmt("identical CSV on rerun: criterion 2 %s (%zu bytes), 5 %s (%zu bytes), 7 %s (%zu bytes)",
                    same2 ? "yes" : "no", csv2.size(), same5 ? "yes" : "no", csv5.size(), same7 ? "yes" : "no",
                    csv7.size())};
    });
    std::printf("%d of %d criteria passed in %.0f s\n", ran - failures, ran, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
