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

#include "sgpmpc/gp_regression.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace sgpmpc {

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;

void check_dims(const Vector& a, const Vector& b, const KernelParams& params) {
    if (a.size() != params.input_dim() || b.size() != params.input_dim()) {
        std::ostringstream msg;
        msg << "kernel input dimension mismatch: got " << a.size() << " and " << b.size()
            << ", expected " << params.input_dim();
        throw InvalidArgument(msg.str());
    }
}

// Kernel entry between component ca of g at a and component cb of g at b,
// given the scaled difference r_d = (a_d - b_d) / l_d^2 and k = k(a, b).
inline double component_entry(const Vector& r, double k, const Vector& inv_sq_len, int ca,
                              int cb) {
    if (ca == 0 && cb == 0) return k;
    if (ca == 0) return r(cb - 1) * k;
    if (cb == 0) return -r(ca - 1) * k;
    const Index d = ca - 1;
    const Index e = cb - 1;
    return k * ((d == e ? inv_sq_len(d) : 0.0) - r(d) * r(e));
}

struct PairTerms {
    Vector r;
    double k;
};

inline PairTerms pair_terms(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                            const Vector& inv_sq_len, double signal_var) {
    Vector r = (a - b).cwiseProduct(inv_sq_len);
    const double sq = (a - b).cwiseProduct(r).sum();
    return {std::move(r), signal_var * std::exp(-0.5 * sq)};
}

}  // namespace

double KernelParams::prior_variance(int component) const {
    const double s2 = output_scale * output_scale;
    if (component == 0) return s2;
    const double l = lengthscales(component - 1);
    return s2 / (l * l);
}

void KernelParams::validate() const {
    if (lengthscales.size() == 0) throw InvalidArgument("kernel needs at least one lengthscale");
    if ((lengthscales.array() <= 0.0).any() || !lengthscales.allFinite())
        throw InvalidArgument("lengthscales must be positive and finite");
    if (!(output_scale > 0.0) || !std::isfinite(output_scale))
        throw InvalidArgument("output scale must be positive");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var))
        throw InvalidArgument("noise variance must be non-negative");
}

void ConfidenceParams::validate() const {
    if (!(sqrt_beta > 0.0)) throw InvalidArgument("sqrt_beta must be positive");
}

double se_kernel(const Vector& a, const Vector& b, const KernelParams& params) {
    check_dims(a, b, params);
    const double sq = ((a - b).array() / params.lengthscales.array()).square().sum();
    return params.output_scale * params.output_scale * std::exp(-0.5 * sq);
}

Matrix se_kernel_derivative_block(const Vector& a, const Vector& b, const KernelParams& params) {
    check_dims(a, b, params);
    const Index n = params.input_dim();
    const Vector inv_sq_len = params.lengthscales.array().square().inverse();
    const auto terms =
        pair_terms(a, b, inv_sq_len, params.output_scale * params.output_scale);
    Matrix block(n + 1, n + 1);
    for (int ca = 0; ca <= n; ++ca)
        for (int cb = 0; cb <= n; ++cb)
            block(ca, cb) = component_entry(terms.r, terms.k, inv_sq_len, ca, cb);
    return block;
}

void ObservationSet::append(const Vector& z, int component, double value, double noise) {
    if (inputs.rows() == 0 && inputs.cols() == 0) inputs.resize(z.size(), 0);
    if (z.size() != inputs.rows()) throw InvalidArgument("observation input dimension mismatch");
    if (component < 0 || component > inputs.rows())
        throw InvalidArgument("observation component out of range");
    const Index n = size();
    inputs.conservativeResize(Eigen::NoChange, n + 1);
    inputs.col(n) = z;
    components.push_back(component);
    values.conservativeResize(n + 1);
    values(n) = value;
    noise_var.conservativeResize(n + 1);
    noise_var(n) = noise;
}

void GpDataset::add_value(const Vector& z, double value, double noise_var) {
    if (z.size() != input_dim_) throw InvalidArgument("dataset input dimension mismatch");
    if (noise_var < 0.0) throw InvalidArgument("noise variance must be non-negative");
    entries_.push_back({z, value, std::nullopt, noise_var});
}

void GpDataset::add_value_gradient(const Vector& z, double value, const Vector& gradient,
                                   double noise_var) {
    if (z.size() != input_dim_) throw InvalidArgument("dataset input dimension mismatch");
    if (gradient.size() != input_dim_)
        throw InvalidArgument("gradient length must equal the input dimension");
    if (noise_var < 0.0) throw InvalidArgument("noise variance must be non-negative");
    entries_.push_back({z, value, gradient, noise_var});
}

ObservationSet GpDataset::observations() const {
    ObservationSet obs(input_dim_);
    for (const auto& e : entries_) {
        obs.append(e.input, 0, e.value, e.noise_var);
        if (e.gradient) {
            for (Index d = 0; d < input_dim_; ++d)
                obs.append(e.input, static_cast<int>(d + 1), (*e.gradient)(d), e.noise_var);
        }
    }
    return obs;
}

Matrix observation_covariance(const ObservationSet& obs, const KernelParams& params) {
    const Index m = obs.size();
    const Vector inv_sq_len = params.lengthscales.array().square().inverse();
    const double s2 = params.output_scale * params.output_scale;
    Matrix k(m, m);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j <= i; ++j) {
            const auto t = pair_terms(obs.inputs.col(i), obs.inputs.col(j), inv_sq_len, s2);
            k(i, j) = component_entry(t.r, t.k, inv_sq_len, obs.components[i], obs.components[j]);
            k(j, i) = k(i, j);
        }
    }
    return k;
}

Matrix cross_covariance(const ObservationSet& obs, const Matrix& points, bool with_derivatives,
                        const KernelParams& params) {
    const Index n = params.input_dim();
    const Index per_point = with_derivatives ? n + 1 : 1;
    const Vector inv_sq_len = params.lengthscales.array().square().inverse();
    const double s2 = params.output_scale * params.output_scale;
    Matrix k(obs.size(), points.cols() * per_point);
    for (Index p = 0; p < points.cols(); ++p) {
        for (Index i = 0; i < obs.size(); ++i) {
            const auto t = pair_terms(obs.inputs.col(i), points.col(p), inv_sq_len, s2);
            for (Index c = 0; c < per_point; ++c)
                k(i, p * per_point + c) = component_entry(t.r, t.k, inv_sq_len,
                                                          obs.components[i], static_cast<int>(c));
        }
    }
    return k;
}

Matrix query_covariance(const Matrix& points, bool with_derivatives, const KernelParams& params) {
    const Index n = params.input_dim();
    const Index per_point = with_derivatives ? n + 1 : 1;
    const Vector inv_sq_len = params.lengthscales.array().square().inverse();
    const double s2 = params.output_scale * params.output_scale;
    const Index m = points.cols() * per_point;
    Matrix k(m, m);
    for (Index p = 0; p < points.cols(); ++p) {
        for (Index q = 0; q <= p; ++q) {
            const auto t = pair_terms(points.col(p), points.col(q), inv_sq_len, s2);
            for (Index a = 0; a < per_point; ++a) {
                for (Index b = 0; b < per_point; ++b) {
                    const double v = component_entry(t.r, t.k, inv_sq_len, static_cast<int>(a),
                                                     static_cast<int>(b));
                    k(p * per_point + a, q * per_point + b) = v;
                    k(q * per_point + b, p * per_point + a) = v;
                }
            }
        }
    }
    return k;
}

CholeskyResult cholesky_with_jitter(const Matrix& symmetric) {
    const Index n = symmetric.rows();
    if (n == 0) return {Matrix(0, 0), 0.0};
    const double mean_diag = std::max(symmetric.diagonal().mean(), 0.0);
    const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
    double jitter = kJitterStart * scale;
    for (;;) {
        Matrix shifted = symmetric;
        shifted.diagonal().array() += jitter;
        Eigen::LLT<Matrix> llt(shifted);
        if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
        if (jitter >= kJitterMax * scale * (1.0 - 1e-12)) break;
        jitter = std::min(jitter * 10.0, kJitterMax * scale);
    }
    std::ostringstream msg;
    msg << "Gram matrix not positive definite after jitter " << jitter << " (n = " << n
        << ", mean diagonal " << mean_diag << ", min diagonal " << symmetric.diagonal().minCoeff()
        << ")";
    throw FactorizationError(msg.str(), jitter, mean_diag, symmetric.diagonal().minCoeff());
}

ConditionedGp::ConditionedGp(KernelParams params, ObservationSet observations)
    : params_(std::move(params)), observations_(std::move(observations)) {
    params_.validate();
    if (observations_.size() > 0 && observations_.input_dim() != params_.input_dim())
        throw InvalidArgument("observation dimension does not match kernel");
    if (observations_.size() == 0) observations_.inputs.resize(params_.input_dim(), 0);

    Matrix gram = observation_covariance(observations_, params_);
    gram.diagonal() += observations_.noise_var;
    auto factor = cholesky_with_jitter(gram);
    chol_ = std::move(factor.lower);
    jitter_ = factor.jitter;
    whitened_targets_ = chol_.triangularView<Eigen::Lower>().solve(observations_.values);
}

ConditionedGp::Query ConditionedGp::query(const Matrix& points, bool with_derivatives) const {
    if (points.rows() != params_.input_dim())
        throw InvalidArgument("query dimension does not match kernel");
    Query q;
    q.points = points;
    q.with_derivatives = with_derivatives;
    q.covariance = query_covariance(points, with_derivatives, params_);
    if (size() == 0) {
        q.whitened_cross.resize(0, q.covariance.rows());
        q.mean = Vector::Zero(q.covariance.rows());
        return q;
    }
    q.whitened_cross = cross_covariance(observations_, points, with_derivatives, params_);
    chol_.triangularView<Eigen::Lower>().solveInPlace(q.whitened_cross);
    q.mean = q.whitened_cross.transpose() * whitened_targets_;
    q.covariance.noalias() -= q.whitened_cross.transpose() * q.whitened_cross;
    return q;
}

Posterior ConditionedGp::posterior(const Matrix& points, bool with_derivatives) const {
    auto q = query(points, with_derivatives);
    Posterior post;
    post.mean = std::move(q.mean);
    post.covariance = std::move(q.covariance);
    post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
    post.points = points.cols();
    post.with_derivatives = with_derivatives;
    return post;
}

std::pair<Vector, Vector> ConditionedGp::value_moments(const Matrix& points) const {
    const double s2 = params_.output_scale * params_.output_scale;
    if (size() == 0)
        return {Vector::Zero(points.cols()), Vector::Constant(points.cols(), s2)};
    Matrix v = cross_covariance(observations_, points, false, params_);
    chol_.triangularView<Eigen::Lower>().solveInPlace(v);
    Vector mean = v.transpose() * whitened_targets_;
    Vector var = (s2 - v.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
    return {std::move(mean), std::move(var)};
}

void ConditionedGp::extend(const Matrix& whitened_cross, const Matrix& schur,
                           const ObservationSet& extra) {
    const Index n = size();
    const Index r = extra.size();
    if (r == 0) return;

    Matrix block_lower;
    {
        Eigen::LLT<Matrix> llt(schur);
        if (llt.info() == Eigen::Success) {
            block_lower = llt.matrixL();
        } else {
            block_lower = cholesky_with_jitter(schur).lower;
        }
    }

    Matrix grown = Matrix::Zero(n + r, n + r);
    grown.topLeftCorner(n, n) = chol_;
    grown.bottomLeftCorner(r, n) = whitened_cross.transpose();
    grown.bottomRightCorner(r, r) = block_lower;
    chol_ = std::move(grown);

    Vector rhs = extra.values;
    if (n > 0) rhs.noalias() -= whitened_cross.transpose() * whitened_targets_;
    block_lower.triangularView<Eigen::Lower>().solveInPlace(rhs);
    whitened_targets_.conservativeResize(n + r);
    whitened_targets_.tail(r) = rhs;

    for (Index i = 0; i < r; ++i)
        observations_.append(extra.inputs.col(i), extra.components[i], extra.values(i),
                             extra.noise_var(i));
}

void ConditionedGp::append(const Query& query, const std::vector<Index>& outputs,
                           const Vector& values, const Vector& noise_var) {
    const Index r = static_cast<Index>(outputs.size());
    if (values.size() != r || noise_var.size() != r)
        throw InvalidArgument("append: values and noise must match the selected outputs");
    if (query.whitened_cross.rows() != size())
        throw InvalidArgument("append: query is stale with respect to this posterior");

    const Index per_point = query.outputs_per_point();
    ObservationSet extra(params_.input_dim());
    Matrix cross(size(), r);
    Matrix schur(r, r);
    for (Index a = 0; a < r; ++a) {
        const Index oa = outputs[a];
        extra.append(query.points.col(oa / per_point), static_cast<int>(oa % per_point), values(a),
                     noise_var(a));
        if (size() > 0) cross.col(a) = query.whitened_cross.col(oa);
        for (Index b = 0; b < r; ++b) schur(a, b) = query.covariance(oa, outputs[b]);
        schur(a, a) += noise_var(a);
    }
    extend(cross, schur, extra);
}

void ConditionedGp::append(const ObservationSet& extra) {
    if (extra.size() == 0) return;
    Matrix kxx = observation_covariance(extra, params_);
    kxx.diagonal() += extra.noise_var;
    Matrix cross(size(), extra.size());
    if (size() > 0) {
        // cross covariance between existing rows and the new tagged rows
        const Vector inv_sq_len = params_.lengthscales.array().square().inverse();
        const double s2 = params_.output_scale * params_.output_scale;
        for (Index j = 0; j < extra.size(); ++j) {
            for (Index i = 0; i < size(); ++i) {
                const auto t = pair_terms(observations_.inputs.col(i), extra.inputs.col(j),
                                          inv_sq_len, s2);
                cross(i, j) = component_entry(t.r, t.k, inv_sq_len, observations_.components[i],
                                              extra.components[j]);
            }
        }
        chol_.triangularView<Eigen::Lower>().solveInPlace(cross);
        kxx.noalias() -= cross.transpose() * cross;
    }
    extend(cross, kxx, extra);
}

double ConditionedGp::log_marginal_likelihood() const {
    const Index n = size();
    return -0.5 * whitened_targets_.squaredNorm() - chol_.diagonal().array().log().sum() -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

Posterior posterior(const GpDataset& data, const PosteriorQuery& query, const KernelParams& params) {
    if (query.test_inputs.cols() < 1) throw InvalidArgument("posterior query needs test inputs");
    if (data.input_dim() != params.input_dim())
        throw InvalidArgument("dataset dimension does not match kernel");
    ConditionedGp gp(params, data.observations());
    return gp.posterior(query.test_inputs, query.with_derivatives);
}

Interval confidence_bounds(const Vector& z, const GpDataset& data, const KernelParams& params,
                           const ConfidenceParams& conf) {
    conf.validate();
    ConditionedGp gp(params, data.observations());
    Matrix point = z;
    const auto [mean, var] = gp.value_moments(point);
    const double width = conf.sqrt_beta * std::sqrt(var(0));
    return {mean(0) - width, mean(0) + width};
}

}  // namespace sgpmpc
