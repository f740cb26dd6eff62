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

// Receding-horizon loop: at every step pin the measured state, run a fixed
// number of SQP iterations, apply the first input and keep only the most
// recent sampled row groups for the next step.

#pragma once

#include <string>
#include <vector>

#include "sgpmpc/sqp_ocp.hpp"

namespace sgpmpc {

struct MpcConfig {
    int sqp_iterations = 2;     ///< L
    Index memory_groups = 1;    ///< row groups kept between steps
    Index steps = 50;           ///< T
    bool shift_warm_start = true;
    /// Apply u_0 after the last feedback phase instead of the first.
    bool apply_after_last_feedback = true;

    void validate() const;
};

struct StepRecord {
    Index k = 0;
    Vector x;                        ///< measured state x(k)
    Vector u;                        ///< applied input u(k)
    double max_violation = 0.0;      ///< of x(k+1) and u(k) against all constraints
    double predicted_violation = 0.0;  ///< open-loop, over all samples
    double prepare_ms = 0.0;
    double feedback_ms = 0.0;
    double total_ms = 0.0;
    Index max_rows = 0;              ///< conditioning rows before truncation
    double acceptance_rate = 1.0;
    long clamped = 0;
    Index out_of_domain_points = 0;
    std::vector<Matrix> predictions;  ///< [n], n_x x (H + 1)
};

struct ClosedLoopTrace {
    std::vector<StepRecord> steps;
    Vector final_state;
    Index memory_bound = 0;
    bool memory_bound_held = true;
    /// Set when the run aborted early; the trace holds the completed steps.
    std::string error;

    double max_violation() const;
};

/// Inputs shifted by one stage with the last repeated; states likewise with
/// the terminal state repeated. Sampler states are carried over unchanged.
SqpIterate shift_warm_start(const SqpIterate& previous);

/// Runs the closed loop against the true plant. The sampling seed is taken
/// from `seed`, overriding ocp.seed.
ClosedLoopTrace run_closed_loop(const OcpDefinition& ocp, const MpcConfig& mpc, const Vector& x0,
                                const Matrix& u_guess, std::uint64_t seed);

/// Worst violation of box and nonlinear state constraints at x and of the
/// input box at u; negative when strictly feasible.
double constraint_violation(const SystemSpec& system, const Vector& x, const Vector& u);

struct TimingStats {
    double mean_ms = 0.0;
    double std_ms = 0.0;
    Index count = 0;
};

/// Per-step solve time over all traces, excluding the first step of each
/// trace unless it is the only one.
TimingStats timing_report(const std::vector<ClosedLoopTrace>& traces);

}  // namespace sgpmpc
