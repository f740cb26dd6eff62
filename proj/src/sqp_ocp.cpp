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

#include "sgpmpc/sqp_ocp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace sgpmpc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void append_row(StageRows& rows, const Vector& cx, const Vector& cu, double d, bool soft) {
    const Index k = rows.size();
    rows.Cx.conservativeResize(k + 1, cx.size());
    rows.Cx.row(k) = cx.transpose();
    rows.Cu.conservativeResize(k + 1, cu.size());
    rows.Cu.row(k) = cu.transpose();
    rows.d.conservativeResize(k + 1);
    rows.d(k) = d;
    rows.soft.push_back(soft ? 1 : 0);
}

void check_iterate(const SqpIterate& it, const OcpDefinition& ocp) {
    const SystemSpec& sys = *ocp.system;
    if (it.u.rows() != sys.n_u || it.u.cols() != ocp.horizon)
        throw InvalidArgument("iterate inputs have the wrong shape");
    if (it.samples() != ocp.samples || static_cast<Index>(it.samplers.size()) != ocp.samples)
        throw InvalidArgument("iterate sample count does not match the OCP");
    for (const auto& x : it.x)
        if (x.rows() != sys.n_x || x.cols() != ocp.horizon + 1)
            throw InvalidArgument("iterate states have the wrong shape");
}

}  // namespace

double TrackingCost::stage(const Vector& x, const Vector& u) const {
    const Vector dx = x - x_ref;
    const Vector du = u - u_ref;
    return dx.dot(Q * dx) + du.dot(R * du);
}

double TrackingCost::terminal(const Vector& x) const {
    if (!Q_terminal) return 0.0;
    const Vector dx = x - x_ref;
    return dx.dot(*Q_terminal * dx);
}

void OcpDefinition::validate() const {
    if (!system || !model) throw InvalidArgument("OCP needs a system and a GP model");
    system->validate();
    if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
    if (samples < 1) throw InvalidArgument("sample count must be >= 1");
    if (model->output_dim() != system->n_g) throw InvalidArgument("GP outputs do not match n_g");
    if (model->input_dim() != static_cast<Index>(system->gp_inputs.size()))
        throw InvalidArgument("GP input dimension does not match the system");
    const Index nx = system->n_x, nu = system->n_u;
    if (cost.Q.rows() != nx || cost.Q.cols() != nx || cost.R.rows() != nu || cost.R.cols() != nu ||
        cost.x_ref.size() != nx || cost.u_ref.size() != nu)
        throw InvalidArgument("cost dimensions do not match the system");
    if (cost.Q_terminal && (cost.Q_terminal->rows() != nx || cost.Q_terminal->cols() != nx))
        throw InvalidArgument("terminal weight has the wrong shape");
    if (!(soft_weight > 0.0)) throw InvalidArgument("soft weight must be positive");
}

double LinearizationData::max_residual() const {
    double worst = 0.0;
    for (const auto& r : residual)
        if (r.size() > 0) worst = std::max(worst, r.lpNorm<Eigen::Infinity>());
    return worst;
}

Matrix mean_rollout(const SystemSpec& system, const GpModel& model, const Vector& x0, const Matrix& u) {
    const Index H = u.cols();
    Matrix x(system.n_x, H + 1);
    x.col(0) = x0;
    Vector g(system.n_g);
    for (Index i = 0; i < H; ++i) {
        const Matrix z = system.gp_input(x.col(i), u.col(i));
        for (Index d = 0; d < system.n_g; ++d)
            g(d) = model.outputs[static_cast<std::size_t>(d)].value_moments(z).first(0);
        x.col(i + 1) = system.f(x.col(i), u.col(i)) + system.B_d * g;
    }
    return x;
}

SqpIterate make_initial_iterate(const OcpDefinition& ocp, const Vector& x0, const Matrix& u_guess) {
    ocp.validate();
    if (x0.size() != ocp.system->n_x) throw InvalidArgument("initial state has the wrong size");
    if (u_guess.rows() != ocp.system->n_u || u_guess.cols() != ocp.horizon)
        throw InvalidArgument("input guess has the wrong shape");
    SqpIterate it;
    it.u = u_guess;
    const Matrix rollout = mean_rollout(*ocp.system, *ocp.model, x0, u_guess);
    it.x.assign(static_cast<std::size_t>(ocp.samples), rollout);
    it.samplers.reserve(static_cast<std::size_t>(ocp.samples));
    for (Index n = 0; n < ocp.samples; ++n) it.samplers.emplace_back(ocp.model, n, ocp.seed, ocp.sampler);
    return it;
}

LinearizationData prepare(SqpIterate& iterate, const OcpDefinition& ocp, const Vector& x0) {
    ocp.validate();
    check_iterate(iterate, ocp);
    const SystemSpec& sys = *ocp.system;
    const Index N = ocp.samples, H = ocp.horizon, nx = sys.n_x, nu = sys.n_u, ng = sys.n_g;
    const Matrix S = sys.gp_selection();

    LinearizationData lin;
    std::vector<Matrix> points(static_cast<std::size_t>(N));
    for (Index n = 0; n < N; ++n) {
        Matrix& pts = points[static_cast<std::size_t>(n)];
        const Matrix& x = iterate.x[static_cast<std::size_t>(n)];
        pts.resize(S.rows(), H);
        for (Index i = 0; i < H; ++i) {
            pts.col(i) = sys.gp_input(x.col(i), iterate.u.col(i));
            if (!sys.state_box.contains(x.col(i), 1e-9) || !sys.input_box.contains(iterate.u.col(i), 1e-9))
                ++lin.out_of_domain_points;
        }
    }

    // one task per (sample, output dimension)
    std::vector<std::vector<DimensionDraw>> draws(static_cast<std::size_t>(N),
                                                  std::vector<DimensionDraw>(static_cast<std::size_t>(ng)));
    parallel_for(static_cast<std::size_t>(N * ng), [&](std::size_t k) {
        const auto n = k / static_cast<std::size_t>(ng);
        const auto d = static_cast<Index>(k % static_cast<std::size_t>(ng));
        try {
            draws[n][static_cast<std::size_t>(d)] =
                iterate.samplers[n].draw_dimension(d, points[n], true);
        } catch (const FactorizationError& e) {
            throw FactorizationError("sample " + std::to_string(n) + ", output " + std::to_string(d) +
                                         ": " + e.what(),
                                     e.last_jitter, e.mean_diagonal, e.min_diagonal);
        }
    });

    lin.qp = OcpQp(N, H, nx, nu);
    lin.qp.soft_weight = ocp.soft_weight;
    lin.A_hat.assign(static_cast<std::size_t>(N), std::vector<Matrix>(static_cast<std::size_t>(H)));
    lin.B_hat = lin.A_hat;
    lin.residual.assign(static_cast<std::size_t>(N), Matrix(nx, H));

    const double w = 1.0 / static_cast<double>(N);
    const TrackingCost& cost = ocp.cost;
    const bool soft = ocp.soft_state_constraints;
    Matrix fx, fu;
    Vector g(ng);
    Matrix dg(ng, S.rows());
    for (Index n = 0; n < N; ++n) {
        const auto sn = static_cast<std::size_t>(n);
        const Matrix& x = iterate.x[sn];
        for (Index d = 0; d < ng; ++d) {
            const auto& r = draws[sn][static_cast<std::size_t>(d)];
            lin.draws += r.draws;
            lin.calls += 1;
            lin.clamped += r.clamped ? 1 : 0;
        }
        lin.qp.x0_offset[sn] = x0 - x.col(0);

        for (Index i = 0; i < H; ++i) {
            const auto si = static_cast<std::size_t>(i);
            const Vector xi = x.col(i);
            const Vector ui = iterate.u.col(i);
            for (Index d = 0; d < ng; ++d) {
                const auto& r = draws[sn][static_cast<std::size_t>(d)];
                g(d) = r.values(i);
                dg.row(d) = r.gradients.col(i).transpose();
            }
            const Matrix dgz = dg * S;
            sys.f_jacobian(xi, ui, fx, fu);
            lin.A_hat[sn][si] = fx + sys.B_d * dgz.leftCols(nx);
            lin.B_hat[sn][si] = fu + sys.B_d * dgz.rightCols(nu);
            lin.residual[sn].col(i) = sys.f(xi, ui) + sys.B_d * g - x.col(i + 1);
            lin.qp.A[sn][si] = lin.A_hat[sn][si];
            lin.qp.B[sn][si] = lin.B_hat[sn][si];
            lin.qp.c[sn][si] = lin.residual[sn].col(i);

            // Gauss-Newton blocks of the sample-averaged tracking cost
            Matrix& Hs = lin.qp.hessian[sn][si];
            Hs.setZero();
            Hs.topLeftCorner(nx, nx) = 2.0 * w * cost.Q;
            Hs.bottomRightCorner(nu, nu) = 2.0 * w * cost.R;
            Vector& gs = lin.qp.gradient[sn][si];
            gs.head(nx) = 2.0 * w * cost.Q * (xi - cost.x_ref);
            gs.tail(nu) = 2.0 * w * cost.R * (ui - cost.u_ref);
            lin.cost += w * cost.stage(xi, ui);
        }
        const Vector xH = x.col(H);
        if (cost.Q_terminal) {
            lin.qp.hessian[sn][static_cast<std::size_t>(H)] = 2.0 * w * *cost.Q_terminal;
            lin.qp.gradient[sn][static_cast<std::size_t>(H)] = 2.0 * w * *cost.Q_terminal * (xH - cost.x_ref);
            lin.cost += w * cost.terminal(xH);
        }

        const Vector zero_u = Vector::Zero(nu);
        for (Index i = 1; i <= H; ++i) {
            StageRows& rows = lin.qp.state_rows[sn][static_cast<std::size_t>(i)];
            const Vector xi = x.col(i);
            for (Index j = 0; j < nx; ++j) {
                Vector e = Vector::Zero(nx);
                e(j) = 1.0;
                // slack in units of the box width, so wide boxes (track length) do not
                // outweigh narrow ones (lane) in the L1 penalty
                const double width = sys.state_box.upper(j) - sys.state_box.lower(j);
                const double sc = std::isfinite(width) && width > 0.0 ? 1.0 / width : 1.0;
                if (std::isfinite(sys.state_box.upper(j)))
                    append_row(rows, sc * e, zero_u, sc * (sys.state_box.upper(j) - xi(j)), soft);
                if (std::isfinite(sys.state_box.lower(j)))
                    append_row(rows, -sc * e, zero_u, sc * (xi(j) - sys.state_box.lower(j)), soft);
            }
            for (const auto& c : sys.state_constraints)
                append_row(rows, c.gradient(xi), zero_u, -c.value(xi), soft);
        }
    }

    const Vector zero_x = Vector::Zero(nx);
    for (Index i = 0; i < H; ++i) {
        StageRows& rows = lin.qp.input_rows[static_cast<std::size_t>(i)];
        const Vector ui = iterate.u.col(i);
        for (Index j = 0; j < nu; ++j) {
            Vector e = Vector::Zero(nu);
            e(j) = 1.0;
            if (std::isfinite(sys.input_box.upper(j)))
                append_row(rows, zero_x, e, sys.input_box.upper(j) - ui(j), false);
            if (std::isfinite(sys.input_box.lower(j)))
                append_row(rows, zero_x, -e, ui(j) - sys.input_box.lower(j), false);
        }
    }
    lin.qp.regularize(1e-8);
    return lin;
}

SqpStepInfo feedback(SqpIterate& iterate, const LinearizationData& lin, const OcpDefinition& ocp) {
    const OcpSolution sol = ocp.sparse_qp ? solve_sparse(lin.qp, ocp.qp) : solve_condensed(lin.qp, ocp.qp);
    SqpStepInfo info;
    info.qp_status = sol.status;
    info.qp_iterations = sol.iterations;
    info.max_slack = sol.max_slack;
    if (sol.status == QpStatus::Infeasible || !sol.du.allFinite()) {
        if (!ocp.soft_state_constraints)
            throw InfeasibleQp("QP subproblem is infeasible", std::max<Index>(sol.first_violated_stage, 0));
        throw InfeasibleQp("QP subproblem failed despite softened constraints", sol.first_violated_stage);
    }
    if (sol.status != QpStatus::Optimal) {
        // an unconverged step is only taken while it keeps the hard input box
        const Box& box = ocp.system->input_box;
        const Matrix u_next = iterate.u + sol.du;
        for (Index i = 0; i < u_next.cols(); ++i)
            if (!box.contains(u_next.col(i), 1e-6))
                throw InfeasibleQp("QP subproblem did not converge and its step leaves the input box", i);
    }
    iterate.u += sol.du;
    info.step_u = sol.du.lpNorm<Eigen::Infinity>();
    for (std::size_t n = 0; n < iterate.x.size(); ++n) {
        iterate.x[n] += sol.dx[n];
        info.step_x = std::max(info.step_x, sol.dx[n].lpNorm<Eigen::Infinity>());
    }
    ++iterate.iteration;
    return info;
}

SqpResult run_sqp(const OcpDefinition& ocp, SqpIterate& iterate, const Vector& x0, int iterations,
                  const std::function<void(int, const SqpIterate&)>& after_feedback) {
    if (iterations < 1) throw InvalidArgument("SQP needs at least one iteration");
    SqpResult result;
    for (int j = 0; j < iterations; ++j) {
        auto start = Clock::now();
        const LinearizationData lin = prepare(iterate, ocp, x0);
        const double prep = seconds_since(start);
        start = Clock::now();
        SqpStepInfo info = feedback(iterate, lin, ocp);
        info.feedback_seconds = seconds_since(start);
        info.prepare_seconds = prep;
        info.clamped = lin.clamped;
        info.out_of_domain_points = lin.out_of_domain_points;
        info.acceptance_rate =
            lin.draws > 0 ? static_cast<double>(lin.calls - lin.clamped) / static_cast<double>(lin.draws) : 1.0;
        result.steps.push_back(info);
        if (after_feedback) after_feedback(j, iterate);
    }
    return result;
}

Matrix simulate_sample(const SystemSpec& system, SampledDynamics& sampler, const Vector& x0,
                       const Matrix& u, bool with_gradients) {
    const Index H = u.cols();
    Matrix x(system.n_x, H + 1);
    x.col(0) = x0;
    for (Index i = 0; i < H; ++i) {
        const Matrix z = system.gp_input(x.col(i), u.col(i));
        const JointSample s = sampler.draw_joint(z, with_gradients);
        x.col(i + 1) = system.f(x.col(i), u.col(i)) + system.B_d * s.values.col(0);
    }
    return x;
}

Vector verify_forward_consistency(const SqpIterate& iterate, const OcpDefinition& ocp, const Vector& x0) {
    check_iterate(iterate, ocp);
    Vector deviation(ocp.samples);
    parallel_for(static_cast<std::size_t>(ocp.samples), [&](std::size_t n) {
        SampledDynamics copy = iterate.samplers[n];
        const Matrix sim = simulate_sample(*ocp.system, copy, x0, iterate.u);
        deviation(static_cast<Index>(n)) = (sim - iterate.x[n]).lpNorm<Eigen::Infinity>();
    });
    return deviation;
}

FeasibilityReport check_open_loop_feasibility(const SqpIterate& iterate, const OcpDefinition& ocp,
                                              double tol) {
    const SystemSpec& sys = *ocp.system;
    FeasibilityReport report;
    auto record = [&](const std::string& name, Index n, Index i, double value) {
        report.max_violation = std::max(report.max_violation, value);
        if (value > tol) report.violations.push_back({name, n, i, value});
    };
    for (Index n = 0; n < iterate.samples(); ++n) {
        const Matrix& x = iterate.x[static_cast<std::size_t>(n)];
        for (Index i = 1; i < x.cols(); ++i) {
            for (Index j = 0; j < sys.n_x; ++j) {
                record("x_upper" + std::to_string(j), n, i, x(j, i) - sys.state_box.upper(j));
                record("x_lower" + std::to_string(j), n, i, sys.state_box.lower(j) - x(j, i));
            }
            for (const auto& c : sys.state_constraints) record(c.name, n, i, c.value(x.col(i)));
        }
    }
    for (Index i = 0; i < iterate.u.cols(); ++i) {
        for (Index j = 0; j < sys.n_u; ++j) {
            record("u_upper" + std::to_string(j), 0, i, iterate.u(j, i) - sys.input_box.upper(j));
            record("u_lower" + std::to_string(j), 0, i, sys.input_box.lower(j) - iterate.u(j, i));
        }
    }
    return report;
}

double nlp_cost(const SqpIterate& iterate, const OcpDefinition& ocp) {
    double total = 0.0;
    for (const auto& x : iterate.x) {
        for (Index i = 0; i < iterate.u.cols(); ++i) total += ocp.cost.stage(x.col(i), iterate.u.col(i));
        total += ocp.cost.terminal(x.col(x.cols() - 1));
    }
    return total / static_cast<double>(iterate.samples());
}

}  // namespace sgpmpc
