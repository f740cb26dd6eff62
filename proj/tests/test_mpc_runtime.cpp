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

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "sgpmpc/mpc_runtime.hpp"

namespace sgpmpc {
namespace {

TEST(WarmStart, ShiftsByOneStageAndRepeatsTheLast) {
    const OcpDefinition ocp = fixtures::pendulum_ocp(2, 4);
    Matrix u(1, 4);
    u << 1.0, 2.0, 3.0, 4.0;
    SqpIterate it = make_initial_iterate(ocp, Vector::Zero(2), u);
    it.iteration = 7;
    const SqpIterate next = shift_warm_start(it);
    EXPECT_EQ(next.u, (Matrix{{2.0, 3.0, 4.0, 4.0}}));
    for (std::size_t n = 0; n < 2; ++n) {
        EXPECT_EQ(next.x[n].leftCols(4), it.x[n].rightCols(4));
        EXPECT_EQ(next.x[n].col(4), it.x[n].col(4));
    }
    EXPECT_EQ(next.iteration, 0);
    EXPECT_EQ(next.samplers.size(), 2u);
}

TEST(ConstraintViolation, TakesWorstOfBoxesAndObstacles) {
    auto spec = bicycle_spec();
    spec->state_constraints = obstacle_constraints({{10.0, 2.0}});
    const Vector u{{0.0, 0.0}};
    EXPECT_NEAR(constraint_violation(*spec, Vector{{10.0, 2.0, 0.0, 5.0}}, u), 5.67, 1e-12);
    EXPECT_NEAR(constraint_violation(*spec, Vector{{30.0, 2.0, 0.0, 16.0}}, u), 1.0, 1e-12);
    EXPECT_NEAR(constraint_violation(*spec, Vector{{30.0, 2.0, 0.0, 5.0}}, Vector{{0.0, 2.5}}), 0.5, 1e-12);
    EXPECT_LT(constraint_violation(*spec, Vector{{30.0, 2.0, 0.0, 5.0}}, u), 0.0);
}

class ShortClosedLoop : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        ocp_ = new OcpDefinition(fixtures::pendulum_ocp(3, 8));
        mpc_.sqp_iterations = 2;
        mpc_.memory_groups = 1;
        mpc_.steps = 6;
        trace_ = new ClosedLoopTrace(run_closed_loop(*ocp_, mpc_, Vector::Zero(2), Matrix::Zero(1, 8), 21));
    }
    static void TearDownTestSuite() {
        delete trace_;
        delete ocp_;
    }
    static OcpDefinition* ocp_;
    static MpcConfig mpc_;
    static ClosedLoopTrace* trace_;
};

OcpDefinition* ShortClosedLoop::ocp_ = nullptr;
MpcConfig ShortClosedLoop::mpc_;
ClosedLoopTrace* ShortClosedLoop::trace_ = nullptr;

TEST_F(ShortClosedLoop, CompletesAndFollowsThePlant) {
    ASSERT_TRUE(trace_->error.empty()) << trace_->error;
    ASSERT_EQ(trace_->steps.size(), 6u);
    const Plant plant(ocp_->system);
    for (std::size_t k = 0; k + 1 < trace_->steps.size(); ++k) {
        const auto& s = trace_->steps[k];
        EXPECT_EQ(s.k, static_cast<Index>(k));
        EXPECT_EQ(trace_->steps[k + 1].x, plant.step(s.x, s.u));
        // predictions start from the measured state
        for (const auto& p : s.predictions) EXPECT_EQ(p.col(0), s.x);
    }
    EXPECT_EQ(trace_->final_state, plant.step(trace_->steps.back().x, trace_->steps.back().u));
    EXPECT_GT(trace_->final_state(0), 0.0);
}

TEST_F(ShortClosedLoop, MemoryStaysWithinBound) {
    const Index n_in = 3;
    EXPECT_EQ(trace_->memory_bound, ocp_->model->base_rows() + (1 + 2) * 8 * (1 + n_in));
    EXPECT_TRUE(trace_->memory_bound_held);
    for (const auto& s : trace_->steps) {
        EXPECT_LE(s.max_rows, trace_->memory_bound);
        EXPECT_GT(s.max_rows, ocp_->model->base_rows());
    }
}

TEST_F(ShortClosedLoop, SameSeedReproducesInputs) {
    const ClosedLoopTrace again = run_closed_loop(*ocp_, mpc_, Vector::Zero(2), Matrix::Zero(1, 8), 21);
    ASSERT_EQ(again.steps.size(), trace_->steps.size());
    for (std::size_t k = 0; k < again.steps.size(); ++k) EXPECT_EQ(again.steps[k].u, trace_->steps[k].u);
    const ClosedLoopTrace other = run_closed_loop(*ocp_, mpc_, Vector::Zero(2), Matrix::Zero(1, 8), 22);
    EXPECT_NE(other.steps.back().u, trace_->steps.back().u);
}

TEST(Timing, ExcludesFirstStepOfEachTrace) {
    ClosedLoopTrace a, b;
    for (double ms : {100.0, 2.0, 4.0}) {
        StepRecord r;
        r.total_ms = ms;
        a.steps.push_back(r);
    }
    StepRecord only;
    only.total_ms = 6.0;
    b.steps.push_back(only);
    const TimingStats s = timing_report({a, b});
    EXPECT_EQ(s.count, 3);
    EXPECT_DOUBLE_EQ(s.mean_ms, 4.0);
    EXPECT_DOUBLE_EQ(s.std_ms, 2.0);
}

TEST(MpcConfigCheck, RejectsNonPositiveCounts) {
    MpcConfig c;
    c.sqp_iterations = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = MpcConfig{};
    c.memory_groups = -1;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

}  // namespace
}  // namespace sgpmpc
