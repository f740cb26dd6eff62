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

#include "sgpmpc/mpc_runtime.hpp"

#include <algorithm>
#include <cmath>

namespace sgpmpc {

void MpcConfig::validate() const {
    if (sqp_iterations < 1) throw InvalidArgument("MPC needs at least one SQP iteration per step");
    if (memory_groups < 0 || memory_groups > sqp_iterations)
        throw InvalidArgument("retained groups must lie in [0, L]");
    if (steps < 1) throw InvalidArgument("MPC needs at least one step");
}

double ClosedLoopTrace::max_violation() const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& s : steps) worst = std::max(worst, s.max_violation);
    return worst;
}

SqpIterate shift_warm_start(const SqpIterate& previous) {
    SqpIterate next = previous;
    const Index H = previous.u.cols();
    if (H > 1) {
        next.u.leftCols(H - 1) = previous.u.rightCols(H - 1);
    }
    next.u.col(H - 1) = previous.u.col(H - 1);
    for (std::size_t n = 0; n < previous.x.size(); ++n) {
        const Matrix& x = previous.x[n];
        next.x[n].leftCols(H) = x.rightCols(H);
        next.x[n].col(H) = x.col(H);
    }
    next.iteration = 0;
    return next;
}

double constraint_violation(const SystemSpec& system, const Vector& x, const Vector& u) {
    double worst = std::max(system.state_box.max_violation(x), system.input_box.max_violation(u));
    for (const auto& c : system.state_constraints) worst = std::max(worst, c.value(x));
    return worst;
}

ClosedLoopTrace run_closed_loop(const OcpDefinition& ocp_in, const MpcConfig& mpc, const Vector& x0,
                                const Matrix& u_guess, std::uint64_t seed) {
    mpc.validate();
    OcpDefinition ocp = ocp_in;
    ocp.seed = seed;
    ocp.validate();
    const Plant plant(ocp.system);
    const SystemSpec& sys = *ocp.system;
    const Index n_in = static_cast<Index>(sys.gp_inputs.size());

    ClosedLoopTrace trace;
    trace.memory_bound = ocp.model->base_rows() +
                         (mpc.memory_groups + mpc.sqp_iterations) * ocp.horizon * (1 + n_in);

    Vector x = x0;
    SqpIterate iterate;
    try {
        iterate = make_initial_iterate(ocp, x, u_guess);
        for (Index k = 0; k < mpc.steps; ++k) {
            if (k > 0) {
                if (mpc.shift_warm_start) iterate = shift_warm_start(iterate);
                iterate.iteration = 0;
            }
            for (auto& xs : iterate.x) xs.col(0) = x;

            StepRecord rec;
            rec.k = k;
            rec.x = x;
            Vector applied;
            const int apply_round = mpc.apply_after_last_feedback ? mpc.sqp_iterations - 1 : 0;
            const SqpResult sqp = run_sqp(ocp, iterate, x, mpc.sqp_iterations,
                                          [&](int round, const SqpIterate& it) {
                                              if (round == apply_round) applied = it.u.col(0);
                                          });
            for (const auto& s : sqp.steps) {
                rec.prepare_ms += 1e3 * s.prepare_seconds;
                rec.feedback_ms += 1e3 * s.feedback_seconds;
                rec.clamped += s.clamped;
                rec.out_of_domain_points += s.out_of_domain_points;
            }
            rec.total_ms = rec.prepare_ms + rec.feedback_ms;
            rec.acceptance_rate = sqp.steps.back().acceptance_rate;

            for (const auto& sampler : iterate.samplers)
                rec.max_rows = std::max(rec.max_rows, sampler.max_conditioning_rows());
            if (rec.max_rows > trace.memory_bound) trace.memory_bound_held = false;

            rec.predicted_violation = check_open_loop_feasibility(iterate, ocp, 1e-6).max_violation;
            rec.predictions = iterate.x;
            rec.u = applied;

            for (auto& sampler : iterate.samplers) sampler.keep_recent(mpc.memory_groups);

            x = plant.step(x, applied);
            rec.max_violation = constraint_violation(sys, x, applied);
            trace.steps.push_back(std::move(rec));
        }
    } catch (const Error& e) {
        trace.error = e.what();
    }
    trace.final_state = x;
    if (!trace.memory_bound_held && trace.error.empty())
        trace.error = "conditioning rows exceeded the memory bound";
    return trace;
}

TimingStats timing_report(const std::vector<ClosedLoopTrace>& traces) {
    std::vector<double> samples;
    for (const auto& t : traces) {
        const std::size_t first = t.steps.size() > 1 ? 1 : 0;
        for (std::size_t k = first; k < t.steps.size(); ++k) samples.push_back(t.steps[k].total_ms);
    }
    TimingStats stats;
    stats.count = static_cast<Index>(samples.size());
    if (samples.empty()) return stats;
    double sum = 0.0;
    for (double v : samples) sum += v;
    stats.mean_ms = sum / static_cast<double>(samples.size());
    if (samples.size() > 1) {
        double sq = 0.0;
        for (double v : samples) sq += (v - stats.mean_ms) * (v - stats.mean_ms);
        stats.std_ms = std::sqrt(sq / static_cast<double>(samples.size() - 1));
    }
    return stats;
}

}  // namespace sgpmpc
