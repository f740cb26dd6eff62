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

#include "sgpmpc/gp_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sgpmpc {

namespace {

// Outputs are addressed per point in blocks of (value, gradient...) in
// derivative mode; component of output o is o % per_point.
struct PivotedFactor {
    std::vector<Index> pivots;
    Matrix factor;  // m x r with S ~= F F^T
};

// Greedy pivoted Cholesky that stops once every remaining conditional variance
// is below `tol` times the prior variance of its component.
PivotedFactor pivoted_cholesky(const Matrix& cov, const Vector& prior, double tol) {
    const Index m = cov.rows();
    PivotedFactor out;
    out.factor.resize(m, 0);
    Vector residual = cov.diagonal();
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    Matrix cols(m, m);
    Index r = 0;
    while (r < m) {
        Index best = -1;
        double best_ratio = tol;
        for (Index j = 0; j < m; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const double ratio = residual(j) / prior(j);
            if (ratio > best_ratio) {
                best_ratio = ratio;
                best = j;
            }
        }
        if (best < 0) break;
        used[static_cast<std::size_t>(best)] = 1;
        Vector col = cov.col(best);
        if (r > 0) col.noalias() -= cols.leftCols(r) * cols.row(best).head(r).transpose();
        col /= std::sqrt(residual(best));
        for (Index j = 0; j < m; ++j) {
            if (used[static_cast<std::size_t>(j)] && j != best) col(j) = 0.0;
        }
        cols.col(r) = col;
        residual -= col.cwiseAbs2();
        residual(best) = 0.0;
        out.pivots.push_back(best);
        ++r;
    }
    out.factor = cols.leftCols(r);
    return out;
}

}  // namespace

void GpModel::mean_and_jacobian(const Vector& z, Vector& mean, Matrix& jacobian) const {
    const Index n_in = input_dim();
    mean.resize(output_dim());
    jacobian.resize(output_dim(), n_in);
    Matrix point = z;
    for (Index d = 0; d < output_dim(); ++d) {
        const auto q = outputs[static_cast<std::size_t>(d)].query(point, true);
        mean(d) = q.mean(0);
        jacobian.row(d) = q.mean.tail(n_in).transpose();
    }
}

Vector GpModel::value_variance(const Vector& z) const {
    Vector var(output_dim());
    Matrix point = z;
    for (Index d = 0; d < output_dim(); ++d)
        var(d) = outputs[static_cast<std::size_t>(d)].value_moments(point).second(0);
    return var;
}

void GpModel::confidence_band(const Matrix& points, Matrix& lower, Matrix& upper) const {
    lower.resize(output_dim(), points.cols());
    upper.resize(output_dim(), points.cols());
    for (Index d = 0; d < output_dim(); ++d) {
        const auto [mean, var] = outputs[static_cast<std::size_t>(d)].value_moments(points);
        const Vector width = confidence.sqrt_beta * var.array().sqrt().matrix();
        lower.row(d) = (mean - width).transpose();
        upper.row(d) = (mean + width).transpose();
    }
}

Matrix JointSample::jacobian(Index p) const {
    const Index n_g = values.rows();
    if (gradients.empty()) throw InvalidArgument("sample was drawn without gradients");
    Matrix jac(n_g, gradients.front().rows());
    for (Index d = 0; d < n_g; ++d) jac.row(d) = gradients[static_cast<std::size_t>(d)].col(p).transpose();
    return jac;
}

SampledDynamics::SampledDynamics(std::shared_ptr<const GpModel> model, Index sample_id,
                                 std::uint64_t master_seed, SamplerOptions options)
    : model_(std::move(model)), sample_id_(sample_id), options_(options) {
    if (!model_ || model_->output_dim() == 0) throw InvalidArgument("sampler needs a GP model");
    if (options_.max_draws < 1) throw InvalidArgument("max_draws must be >= 1");
    if (options_.pivot_tolerance <= 0.0 || options_.row_jitter < 0.0)
        throw InvalidArgument("invalid sampler tolerances");
    dims_.reserve(static_cast<std::size_t>(model_->output_dim()));
    for (Index d = 0; d < model_->output_dim(); ++d) {
        // one stream per (sample, output dimension) keeps parallel draws reproducible
        const auto index = static_cast<std::uint64_t>(sample_id) * 64u + static_cast<std::uint64_t>(d);
        dims_.push_back({model_->outputs[static_cast<std::size_t>(d)], {},
                         make_rng(master_seed, streams::kSampling, index), 0, 0, 0});
    }
}

DimensionDraw SampledDynamics::draw_dimension(Index dim, const Matrix& points, bool with_gradients) {
    if (dim < 0 || dim >= model_->output_dim()) throw InvalidArgument("output dimension out of range");
    if (points.cols() < 1) throw InvalidArgument("draw needs at least one point");
    if (!points.allFinite()) throw InvalidArgument("query points must be finite");
    DimState& state = dims_[static_cast<std::size_t>(dim)];
    const KernelParams& params = state.gp.params();
    const Index m = points.cols();

    auto q = state.gp.query(points, with_gradients);
    const Index per_point = q.outputs_per_point();
    const Index outputs = q.mean.size();
    const Matrix cov = 0.5 * (q.covariance + q.covariance.transpose());

    Vector prior(outputs);
    for (Index o = 0; o < outputs; ++o) prior(o) = params.prior_variance(static_cast<int>(o % per_point));

    const auto piv = pivoted_cholesky(cov, prior, options_.pivot_tolerance);
    const Index rank = static_cast<Index>(piv.pivots.size());

    Vector lower, upper;
    if (options_.truncate) {
        // bounds always come from the base posterior
        const auto [mean, var] = model_->outputs[static_cast<std::size_t>(dim)].value_moments(points);
        const Vector width = model_->confidence.sqrt_beta * var.array().sqrt().matrix();
        lower = mean - width;
        upper = mean + width;
    }

    std::normal_distribution<double> normal;
    Vector eta(rank);
    Vector draw;
    DimensionDraw result;
    bool accepted = false;
    for (int attempt = 0; attempt < options_.max_draws; ++attempt) {
        for (Index i = 0; i < rank; ++i) eta(i) = normal(state.rng);
        draw = q.mean;
        if (rank > 0) draw.noalias() += piv.factor * eta;
        ++result.draws;
        if (!options_.truncate) {
            accepted = true;
            break;
        }
        bool inside = true;
        for (Index p = 0; p < m && inside; ++p) {
            const double v = draw(p * per_point);
            inside = v >= lower(p) && v <= upper(p);
        }
        if (inside) {
            accepted = true;
            break;
        }
    }
    if (!accepted) {
        for (Index p = 0; p < m; ++p)
            draw(p * per_point) = std::clamp(draw(p * per_point), lower(p), upper(p));
        result.clamped = true;
    }

    if (rank > 0) {
        Vector values(rank), noise(rank);
        for (Index i = 0; i < rank; ++i) {
            const Index o = piv.pivots[static_cast<std::size_t>(i)];
            values(i) = draw(o);
            noise(i) = options_.row_jitter * prior(o);
        }
        const Index before = state.gp.size();
        state.gp.append(q, piv.pivots, values, noise);
        ObservationSet group(params.input_dim());
        const auto& obs = state.gp.observations();
        for (Index i = before; i < obs.size(); ++i)
            group.append(obs.inputs.col(i), obs.components[static_cast<std::size_t>(i)],
                         obs.values(i), obs.noise_var(i));
        state.groups.push_back(std::move(group));
    } else {
        state.groups.emplace_back(params.input_dim());
    }
    result.appended_rows = rank;
    state.draws += result.draws;
    ++(result.clamped ? state.clamped : state.accepted);

    result.values.resize(m);
    for (Index p = 0; p < m; ++p) result.values(p) = draw(p * per_point);
    if (with_gradients) {
        const Index n_in = params.input_dim();
        result.gradients.resize(n_in, m);
        for (Index p = 0; p < m; ++p)
            result.gradients.col(p) = draw.segment(p * per_point + 1, n_in);
    }
    return result;
}

JointSample SampledDynamics::draw_joint(const Matrix& points, bool with_gradients) {
    const Index n_g = model_->output_dim();
    JointSample out;
    out.values.resize(n_g, points.cols());
    for (Index d = 0; d < n_g; ++d) {
        auto r = draw_dimension(d, points, with_gradients);
        out.values.row(d) = r.values.transpose();
        if (with_gradients) out.gradients.push_back(std::move(r.gradients));
        out.draws += r.draws;
        out.clamped = out.clamped || r.clamped;
    }
    return out;
}

long SampledDynamics::total_draws() const {
    long total = 0;
    for (const auto& d : dims_) total += d.draws;
    return total;
}

long SampledDynamics::accepted_calls() const {
    long total = 0;
    for (const auto& d : dims_) total += d.accepted;
    return total;
}

long SampledDynamics::clamped_calls() const {
    long total = 0;
    for (const auto& d : dims_) total += d.clamped;
    return total;
}

Index SampledDynamics::group_count(Index dim) const {
    return static_cast<Index>(dims_.at(static_cast<std::size_t>(dim)).groups.size());
}

Index SampledDynamics::conditioning_rows(Index dim) const {
    return dims_.at(static_cast<std::size_t>(dim)).gp.size();
}

Index SampledDynamics::max_conditioning_rows() const {
    Index rows = 0;
    for (const auto& d : dims_) rows = std::max(rows, d.gp.size());
    return rows;
}

void SampledDynamics::keep_recent(Index keep) {
    if (keep < 0) throw InvalidArgument("keep must be non-negative");
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        DimState& state = dims_[d];
        if (static_cast<Index>(state.groups.size()) <= keep) continue;
        while (static_cast<Index>(state.groups.size()) > keep) state.groups.pop_front();
        state.gp = model_->outputs[d];
        for (const auto& group : state.groups) state.gp.append(group);
    }
}

SampledDynamics truncate_memory(SampledDynamics sample, Index keep) {
    sample.keep_recent(keep);
    return sample;
}

namespace {

void moments(const Matrix& draws, Vector& mean, Matrix& cov) {
    const double m = static_cast<double>(draws.cols());
    mean = draws.rowwise().mean();
    const Matrix centered = draws.colwise() - mean;
    cov = centered * centered.transpose() / (m - 1.0);
}

}  // namespace

EquivalenceReport sequential_equivalence_check(std::shared_ptr<const GpModel> model,
                                               const Matrix& points,
                                               const std::vector<std::vector<Index>>& partition,
                                               Index sample_count, std::uint64_t seed) {
    if (sample_count < 2) throw InvalidArgument("equivalence check needs at least two samples");
    const Index k = points.cols();
    std::vector<char> seen(static_cast<std::size_t>(k), 0);
    for (const auto& block : partition) {
        for (Index i : block) {
            if (i < 0 || i >= k || seen[static_cast<std::size_t>(i)])
                throw InvalidArgument("partition must cover every point exactly once");
            seen[static_cast<std::size_t>(i)] = 1;
        }
    }
    if (std::count(seen.begin(), seen.end(), 1) != k)
        throw InvalidArgument("partition must cover every point exactly once");

    SamplerOptions options;
    options.truncate = false;

    Matrix sequential(k, sample_count), joint(k, sample_count);
    parallel_for(static_cast<std::size_t>(sample_count), [&](std::size_t s) {
        const auto id = static_cast<Index>(s);
        SampledDynamics seq(model, id, seed, options);
        for (const auto& block : partition) {
            Matrix sub(points.rows(), static_cast<Index>(block.size()));
            for (std::size_t b = 0; b < block.size(); ++b) sub.col(static_cast<Index>(b)) = points.col(block[b]);
            const auto r = seq.draw_dimension(0, sub, false);
            for (std::size_t b = 0; b < block.size(); ++b) sequential(block[b], id) = r.values(static_cast<Index>(b));
        }
        SampledDynamics all(model, id, seed, options);
        joint.col(id) = all.draw_dimension(0, points, false).values;
    });

    EquivalenceReport report;
    const auto post = model->outputs.front().posterior(points, false);
    report.analytic_mean = post.mean;
    report.analytic_covariance = post.covariance;
    moments(sequential, report.sequential_mean, report.sequential_covariance);
    moments(joint, report.joint_mean, report.joint_covariance);

    const double m = static_cast<double>(sample_count);
    for (Index i = 0; i < k; ++i) {
        const double se = std::sqrt(std::max(post.covariance(i, i), 1e-300) / m);
        report.max_mean_zscore =
            std::max(report.max_mean_zscore, std::abs(report.sequential_mean(i) - post.mean(i)) / se);
    }
    const double norm = post.covariance.norm();
    report.covariance_relative_error = (report.sequential_covariance - post.covariance).norm() / norm;
    report.joint_covariance_relative_error = (report.joint_covariance - post.covariance).norm() / norm;
    report.sequential_vs_joint_relative_error =
        (report.sequential_covariance - report.joint_covariance).norm() / norm;
    return report;
}

}  // namespace sgpmpc
