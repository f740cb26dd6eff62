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
#include <memory>

#include <gtest/gtest.h>

#include "sgpmpc/gp_sampler.hpp"

namespace sgpmpc {
namespace {

// Two-output model on a 2-D input, trained on a handful of value points.
std::shared_ptr<GpModel> small_model(double sqrt_beta = 2.5) {
    auto model = std::make_shared<GpModel>();
    for (int d = 0; d < 2; ++d) {
        KernelParams p;
        p.lengthscales = Vector{{0.8, 1.2}};
        p.output_scale = d == 0 ? 1.0 : 0.5;
        ObservationSet obs(2);
        for (double a : {-1.0, 0.0, 1.0})
            for (double b : {-1.0, 1.0}) {
                const Vector z{{a, b}};
                obs.append(z, 0, d == 0 ? std::sin(a) + b : a * b, 1e-6);
            }
        model->outputs.emplace_back(p, obs);
    }
    model->confidence.sqrt_beta = sqrt_beta;
    return model;
}

Matrix query_points() {
    Matrix Z(2, 4);
    Z << -0.5, 0.2, 0.7, 1.5, 0.3, -0.6, 0.9, 0.0;
    return Z;
}

TEST(Sampler, SameSeedAndIdReproduceDraws) {
    auto model = small_model();
    SampledDynamics a(model, 3, 42), b(model, 3, 42), c(model, 4, 42);
    const JointSample ja = a.draw_joint(query_points()), jb = b.draw_joint(query_points()),
                      jc = c.draw_joint(query_points());
    EXPECT_EQ(ja.values, jb.values);
    EXPECT_GT((ja.values - jc.values).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Sampler, RequeryingConditionedPointsReturnsSameFunction) {
    auto model = small_model();
    SampledDynamics s(model, 0, 7);
    const Matrix Z = query_points();
    const JointSample first = s.draw_joint(Z, true);
    const JointSample again = s.draw_joint(Z, true);
    EXPECT_LT((first.values - again.values).cwiseAbs().maxCoeff(), 1e-5);
    for (std::size_t d = 0; d < 2; ++d)
        EXPECT_LT((first.gradients[d] - again.gradients[d]).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Sampler, SampledGradientMatchesDifferencesOfSameSample) {
    auto model = small_model();
    SamplerOptions options;
    options.truncate = false;
    SampledDynamics s(model, 1, 9, options);
    const Vector z{{0.3, 0.4}};
    const DimensionDraw at = s.draw_dimension(0, z, true);
    const double h = 1e-3;
    for (Index d = 0; d < 2; ++d) {
        Matrix pair(2, 2);
        pair.col(0) = z + h * Vector::Unit(2, d);
        pair.col(1) = z - h * Vector::Unit(2, d);
        const DimensionDraw near = s.draw_dimension(0, pair, false);
        EXPECT_NEAR((near.values(0) - near.values(1)) / (2 * h), at.gradients(d, 0), 2e-3);
    }
}

TEST(Sampler, TruncatedValuesStayInsideBaseBand) {
    auto model = small_model(1.0);
    const Matrix Z = query_points();
    Matrix lower, upper;
    model->confidence_band(Z, lower, upper);
    for (Index id = 0; id < 40; ++id) {
        SampledDynamics s(model, id, 5);
        const JointSample j = s.draw_joint(Z, true);
        EXPECT_TRUE((j.values.array() >= lower.array() - 1e-12).all());
        EXPECT_TRUE((j.values.array() <= upper.array() + 1e-12).all());
    }
}

TEST(Sampler, ExhaustedRejectionClampsAndFlags) {
    auto model = small_model(0.05);
    SamplerOptions options;
    options.max_draws = 1;
    Matrix Z(2, 10);
    for (Index i = 0; i < 10; ++i) Z.col(i) = Vector{{-2.0 + 0.4 * static_cast<double>(i), 2.0}};
    Matrix lower, upper;
    model->confidence_band(Z, lower, upper);
    long clamped = 0;
    for (Index id = 0; id < 10; ++id) {
        SampledDynamics s(model, id, 1, options);
        const DimensionDraw r = s.draw_dimension(0, Z, false);
        EXPECT_EQ(r.draws, 1);
        clamped += r.clamped ? 1 : 0;
        EXPECT_TRUE((r.values.array() >= lower.row(0).transpose().array() - 1e-12).all());
        EXPECT_TRUE((r.values.array() <= upper.row(0).transpose().array() + 1e-12).all());
    }
    EXPECT_GT(clamped, 0);
}

TEST(Sampler, SingleDrawMomentsMatchPosterior) {
    auto model = small_model();
    SamplerOptions options;
    options.truncate = false;
    const Matrix Z = query_points();
    const Index M = 10000;
    Matrix draws(Z.cols(), M);
    for (Index m = 0; m < M; ++m) {
        SampledDynamics s(model, m, 2024, options);
        draws.col(m) = s.draw_dimension(0, Z, false).values;
    }
    // analytic posterior from the dense formula
    const ObservationSet& obs = model->outputs[0].observations();
    const KernelParams& p = model->outputs[0].params();
    const Index n = obs.size();
    Matrix K(n, n), Ks(n, Z.cols()), Kss(Z.cols(), Z.cols());
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) K(i, j) = se_kernel(obs.inputs.col(i), obs.inputs.col(j), p);
        for (Index j = 0; j < Z.cols(); ++j) Ks(i, j) = se_kernel(obs.inputs.col(i), Z.col(j), p);
    }
    for (Index i = 0; i < Z.cols(); ++i)
        for (Index j = 0; j < Z.cols(); ++j) Kss(i, j) = se_kernel(Z.col(i), Z.col(j), p);
    K.diagonal() += obs.noise_var;
    const Eigen::LDLT<Matrix> ldlt(K);
    const Vector mu = Ks.transpose() * ldlt.solve(obs.values);
    const Matrix sigma = Kss - Ks.transpose() * ldlt.solve(Ks);

    const Vector mean = draws.rowwise().mean();
    const Matrix centered = draws.colwise() - mean;
    const Matrix cov = centered * centered.transpose() / static_cast<double>(M - 1);
    for (Index i = 0; i < Z.cols(); ++i)
        EXPECT_LT(std::abs(mean(i) - mu(i)), 4.0 * std::sqrt(sigma(i, i) / static_cast<double>(M)));
    EXPECT_LT((cov - sigma).norm() / sigma.norm(), 0.05);
}

TEST(Sampler, KeepRecentRetainsBasePlusLastGroups) {
    auto model = small_model();
    SampledDynamics s(model, 0, 3);
    const Index base = model->base_rows();
    EXPECT_EQ(s.max_conditioning_rows(), base);
    const Matrix Z = query_points();
    for (int k = 0; k < 3; ++k) s.draw_joint(Z + Matrix::Constant(2, 4, 0.1 * k), true);
    EXPECT_EQ(s.group_count(0), 3);
    const Index before = s.conditioning_rows(0);
    s.keep_recent(1);
    EXPECT_EQ(s.group_count(0), 1);
    EXPECT_LT(s.conditioning_rows(0), before);
    EXPECT_LE(s.conditioning_rows(0), base + Z.cols() * 3);
    // the retained group still pins the most recent draw
    const JointSample last = truncate_memory(s, 1).draw_joint(Z + Matrix::Constant(2, 4, 0.2), false);
    SampledDynamics copy = s;
    const JointSample again = copy.draw_joint(Z + Matrix::Constant(2, 4, 0.2), false);
    EXPECT_LT((last.values - again.values).cwiseAbs().maxCoeff(), 1e-5);
    s.keep_recent(0);
    EXPECT_EQ(s.conditioning_rows(0), base);
    EXPECT_THROW(s.keep_recent(-1), InvalidArgument);
}

TEST(Sampler, SequentialBlocksMatchJointDraws) {
    auto model = std::make_shared<GpModel>();
    KernelParams p;
    p.lengthscales = Vector{{0.6}};
    ObservationSet obs(1);
    for (double x : {-1.0, -0.4, 0.1, 0.5, 1.2}) obs.append(Vector::Constant(1, x), 0, std::sin(3 * x), 1e-6);
    model->outputs.emplace_back(p, obs);
    Matrix Z(1, 6);
    Z << -1.3, -0.7, -0.1, 0.3, 0.8, 1.6;
    const auto r = sequential_equivalence_check(model, Z, {{0, 2, 4}, {1, 3, 5}}, 4000, 17);
    EXPECT_LT(r.covariance_relative_error, 0.1);
    EXPECT_LT(r.joint_covariance_relative_error, 0.1);
    EXPECT_LT(r.max_mean_zscore, 4.0);
    EXPECT_THROW(sequential_equivalence_check(model, Z, {{0, 1}, {1, 2, 3, 4, 5}}, 10, 1), InvalidArgument);
}

TEST(Sampler, RejectsBadQueries) {
    auto model = small_model();
    SampledDynamics s(model, 0, 1);
    EXPECT_THROW(s.draw_dimension(5, query_points(), false), InvalidArgument);
    EXPECT_THROW(s.draw_dimension(0, Matrix(2, 0), false), InvalidArgument);
    Matrix bad = query_points();
    bad(0, 0) = std::nan("");
    EXPECT_THROW(s.draw_dimension(0, bad, false), InvalidArgument);
}

}  // namespace
}  // namespace sgpmpc
