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

// Multi-sample SQP for the sampled-dynamics optimal control problem. All N
// sampled trajectories share one input sequence; each sample n propagates its
// own states through x+ = f(x, u) + B_d g^n(x, u).

#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgpmpc/dynamics_models.hpp"
#include "sgpmpc/gp_sampler.hpp"
#include "sgpmpc/qp_backend.hpp"

namespace sgpmpc {

/// sum_i |x_i - x_ref|_Q^2 + |u_i - u_ref|_R^2 (+ |x_H - x_ref|_{Q_H}^2).
struct TrackingCost {
    Matrix Q;
    Matrix R;
    Vector x_ref;
    Vector u_ref;
    std::optional<Matrix> Q_terminal;

    double stage(const Vector& x, const Vector& u) const;
    double terminal(const Vector& x) const;
};

struct OcpDefinition {
    std::shared_ptr<const SystemSpec> system;
    std::shared_ptr<const GpModel> model;
    Index horizon = 1;
    Index samples = 1;
    TrackingCost cost;
    /// State box and nonlinear state constraints are L1-softened when true.
    bool soft_state_constraints = true;
    double soft_weight = 1e4;
    SamplerOptions sampler;
    QpOptions qp;
    bool sparse_qp = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SqpIterate {
    Matrix u;               ///< n_u x H, shared by all samples
    std::vector<Matrix> x;  ///< [n], n_x x (H + 1)
    std::vector<SampledDynamics> samplers;
    Index iteration = 0;

    Index samples() const { return static_cast<Index>(x.size()); }
};

struct LinearizationData {
    std::vector<std::vector<Matrix>> A_hat;  ///< [n][i]
    std::vector<std::vector<Matrix>> B_hat;  ///< [n][i]
    std::vector<Matrix> residual;            ///< [n], n_x x H: f + B_d g - x_{i+1}
    OcpQp qp;
    double cost = 0.0;  ///< quadratic model at zero step
    long draws = 0;
    long clamped = 0;
    long calls = 0;
    Index out_of_domain_points = 0;

    double max_residual() const;
};

struct SqpStepInfo {
    double step_u = 0.0;  ///< infinity norm
    double step_x = 0.0;
    QpStatus qp_status = QpStatus::Optimal;
    int qp_iterations = 0;
    double max_slack = 0.0;
    double acceptance_rate = 1.0;
    long clamped = 0;
    /// Stage points outside the state/input box, where the confidence bounds are extrapolated.
    Index out_of_domain_points = 0;
    double prepare_seconds = 0.0;
    double feedback_seconds = 0.0;
};

struct SqpResult {
    std::vector<SqpStepInfo> steps;
};

/// Sampler states for N fresh samples plus states rolled out under the GP mean
/// from x0 with the given inputs.
SqpIterate make_initial_iterate(const OcpDefinition& ocp, const Vector& x0, const Matrix& u_guess);

/// Rolls out x_{i+1} = f + B_d mu(z_i) with the posterior mean.
Matrix mean_rollout(const SystemSpec& system, const GpModel& model, const Vector& x0, const Matrix& u);

/// Preparation phase: draws (g, dg/dz) at every stage point of every sample,
/// conditions the samplers on the draws and assembles the QP.
LinearizationData prepare(SqpIterate& iterate, const OcpDefinition& ocp, const Vector& x0);

/// Feedback phase: solves the QP and applies the full step.
SqpStepInfo feedback(SqpIterate& iterate, const LinearizationData& lin, const OcpDefinition& ocp);

/// Runs exactly L (prepare, feedback) rounds. The callback, if set, runs after
/// every feedback phase with the round index.
SqpResult run_sqp(const OcpDefinition& ocp, SqpIterate& iterate, const Vector& x0, int iterations,
                  const std::function<void(int, const SqpIterate&)>& after_feedback = {});

/// Forward simulation of one sample under fixed inputs, drawing stage by stage
/// from (and conditioning) the given sampler.
Matrix simulate_sample(const SystemSpec& system, SampledDynamics& sampler, const Vector& x0,
                       const Matrix& u, bool with_gradients = false);

/// max_i |x_hat^n_i - x^n_i|_inf per sample, where x^n is the forward
/// simulation from x0 using copies of the sampler states.
Vector verify_forward_consistency(const SqpIterate& iterate, const OcpDefinition& ocp, const Vector& x0);

struct ConstraintViolation {
    std::string name;
    Index sample = 0;
    Index stage = 0;
    double value = 0.0;  ///< > 0 means violated
};

struct FeasibilityReport {
    double max_violation = -std::numeric_limits<double>::infinity();
    std::vector<ConstraintViolation> violations;  ///< entries above tol
};

/// Evaluates state box and nonlinear constraints at stages 1..H of every
/// sample and the input box at stages 0..H-1.
FeasibilityReport check_open_loop_feasibility(const SqpIterate& iterate, const OcpDefinition& ocp,
                                              double tol);

/// Sample-averaged cost of the iterate.
double nlp_cost(const SqpIterate& iterate, const OcpDefinition& ocp);

}  // namespace sgpmpc
