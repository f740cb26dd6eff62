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

#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "sgpmpc/sqp_ocp.hpp"

namespace sgpmpc {
namespace {

TEST(MeanRollout, FollowsPosteriorMean) {
    const OcpDefinition ocp = fixtures::pendulum_ocp(1, 6);
    const Vector x0{{0.1, 0.0}};
    const Matrix u = Matrix::Constant(1, 6, 2.0);
    const Matrix x = mean_rollout(*ocp.system, *ocp.model, x0, u);
    ASSERT_EQ(x.cols(), 7);
    EXPECT_EQ(x.col(0), x0);
    for (Index i = 0; i < 6; ++i) {
        Vector mean;
        Matrix jac;
        ocp.model->mean_and_jacobian(ocp.system->gp_input(x.col(i), u.col(i)), mean, jac);
        EXPECT_LT((x.col(i + 1) - mean).norm(), 1e-12);
    }
    // the mean is close to the true pendulum step on this well-covered grid
    const Plant plant(ocp.system);
    EXPECT_LT((x.col(1) - plant.step(x0, u.col(0))).norm(), 1e-3);
}

TEST(Prepare, LinearizationMatchesSampledFunction) {
    OcpDefinition ocp = fixtures::pendulum_ocp(2, 5);
    ocp.sampler.truncate = false;
    const Vector x0{{0.2, 0.1}};
    SqpIterate it = make_initial_iterate(ocp, x0, Matrix::Constant(1, 5, 1.0));
    const LinearizationData lin = prepare(it, ocp, x0);
    const SystemSpec& sys = *ocp.system;
    const double h = 1e-3;
    for (Index n = 0; n < 2; ++n) {
        const auto sn = static_cast<std::size_t>(n);
        const Matrix& x = it.x[sn];
        for (Index i = 0; i < 5; ++i) {
            const auto si = static_cast<std::size_t>(i);
            const Vector xi = x.col(i), ui = it.u.col(i);
            // the same sample re-queried at z returns the drawn value
            SampledDynamics probe = it.samplers[sn];
            const Vector g = probe.draw_joint(sys.gp_input(xi, ui), false).values.col(0);
            EXPECT_LT((lin.residual[sn].col(i) - (sys.f(xi, ui) + sys.B_d * g - x.col(i + 1))).norm(), 1e-5);
            for (Index j = 0; j < 2; ++j) {
                const Vector e = Vector::Unit(2, j) * h;
                Matrix pair(3, 2);
                pair.col(0) = sys.gp_input(xi + e, ui);
                pair.col(1) = sys.gp_input(xi - e, ui);
                SampledDynamics fd = it.samplers[sn];
                const Matrix v = fd.draw_joint(pair, false).values;
                EXPECT_LT(((v.col(0) - v.col(1)) / (2 * h) - lin.A_hat[sn][si].col(j)).norm(), 5e-3);
            }
            Matrix pair(3, 2);
            pair.col(0) = sys.gp_input(xi, ui + Vector::Constant(1, h));
            pair.col(1) = sys.gp_input(xi, ui - Vector::Constant(1, h));
            SampledDynamics fd = it.samplers[sn];
            const Matrix v = fd.draw_joint(pair, false).values;
            EXPECT_LT(((v.col(0) - v.col(1)) / (2 * h) - lin.B_hat[sn][si].col(0)).norm(), 5e-3);
            // Gauss-Newton blocks carry the 1/N sample weight
            EXPECT_NEAR(lin.qp.hessian[sn][si](0, 0), 2.0 * 50.0 / 2.0, 1e-6);
            EXPECT_NEAR(lin.qp.hessian[sn][si](2, 2), 2.0 * 0.1 / 2.0, 1e-6);
        }
        EXPECT_LT((lin.qp.x0_offset[sn] - (x0 - x.col(0))).norm(), 1e-15);
    }
}

TEST(Feedback, FullStepFollowsQpSolution) {
    OcpDefinition ocp = fixtures::pendulum_ocp(2, 5);
    const Vector x0{{0.0, 0.0}};
    SqpIterate it = make_initial_iterate(ocp, x0, Matrix::Zero(1, 5));
    const LinearizationData lin = prepare(it, ocp, x0);
    const Matrix u_before = it.u;
    const OcpSolution sol = solve_condensed(lin.qp, ocp.qp);
    const SqpStepInfo info = feedback(it, lin, ocp);
    EXPECT_EQ(info.qp_status, QpStatus::Optimal);
    EXPECT_LT((it.u - (u_before + sol.du)).norm(), 1e-9);
    EXPECT_NEAR(info.step_u, sol.du.lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_TRUE((it.u.array().abs() <= 8.0 + 1e-6).all());
}

TEST(RunSqp, IteratesBecomeForwardConsistent) {
    const OcpDefinition ocp = fixtures::pendulum_ocp(3, 10);
    const Vector x0{{0.0, 0.0}};
    SqpIterate it = make_initial_iterate(ocp, x0, Matrix::Zero(1, 10));
    const double initial_cost = nlp_cost(it, ocp);
    int calls = 0;
    const SqpResult r = run_sqp(ocp, it, x0, 12, [&](int round, const SqpIterate&) { EXPECT_EQ(round, calls++); });
    EXPECT_EQ(calls, 12);
    ASSERT_EQ(r.steps.size(), 12u);
    EXPECT_LT(r.steps.back().step_u, 1e-4);
    const Vector dev = verify_forward_consistency(it, ocp, x0);
    ASSERT_EQ(dev.size(), 3);
    EXPECT_LT(dev.maxCoeff(), 1e-4);
    // the swing-up moves theta towards the reference
    EXPECT_LT(nlp_cost(it, ocp), initial_cost);
    for (const auto& x : it.x) EXPECT_GT(x(0, 10), 0.0);
}

TEST(RunSqp, SparseAndCondensedPathsAgree) {
    OcpDefinition a = fixtures::pendulum_ocp(2, 6);
    OcpDefinition b = a;
    b.sparse_qp = true;
    const Vector x0{{0.0, 0.0}};
    SqpIterate ia = make_initial_iterate(a, x0, Matrix::Zero(1, 6));
    SqpIterate ib = make_initial_iterate(b, x0, Matrix::Zero(1, 6));
    run_sqp(a, ia, x0, 3);
    run_sqp(b, ib, x0, 3);
    EXPECT_LT((ia.u - ib.u).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Feasibility, ReportsViolatedStages) {
    OcpDefinition ocp = fixtures::pendulum_ocp(1, 3);
    const Vector x0{{0.0, 0.0}};
    SqpIterate it = make_initial_iterate(ocp, x0, Matrix::Zero(1, 3));
    it.x[0](1, 2) = 3.0;  // omega above 2.5
    it.u(0, 1) = -9.0;    // below -8
    const FeasibilityReport r = check_open_loop_feasibility(it, ocp, 1e-6);
    EXPECT_NEAR(r.max_violation, 1.0, 1e-12);
    ASSERT_EQ(r.violations.size(), 2u);
    bool state = false, input = false;
    for (const auto& v : r.violations) {
        state |= v.stage == 2 && std::abs(v.value - 0.5) < 1e-12;
        input |= v.stage == 1 && std::abs(v.value - 1.0) < 1e-12;
    }
    EXPECT_TRUE(state);
    EXPECT_TRUE(input);
}

TEST(Cost, SampleAverageOfTrackingCost) {
    OcpDefinition ocp = fixtures::pendulum_ocp(2, 2);
    SqpIterate it = make_initial_iterate(ocp, Vector::Zero(2), Matrix::Zero(1, 2));
    it.x[0].setZero();
    it.x[1].setConstant(1.0);
    it.u.setConstant(1.0);
    const double c0 = 2 * (50.0 * 6.25 + 0.1);
    const double c1 = 2 * (50.0 * 2.25 + 50.0 + 0.1);
    EXPECT_NEAR(nlp_cost(it, ocp), 0.5 * (c0 + c1), 1e-9);
}

TEST(OcpDefinitionCheck, RejectsBadShapes) {
    OcpDefinition ocp = fixtures::pendulum_ocp(1, 3);
    ocp.cost.Q = Matrix::Identity(3, 3);
    EXPECT_THROW(ocp.validate(), InvalidArgument);
    ocp = fixtures::pendulum_ocp(1, 3);
    ocp.samples = 0;
    EXPECT_THROW(ocp.validate(), InvalidArgument);
    ocp = fixtures::pendulum_ocp(1, 3);
    EXPECT_THROW(make_initial_iterate(ocp, Vector::Zero(2), Matrix::Zero(1, 2)), InvalidArgument);
}

}  // namespace
}  // namespace sgpmpc
