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

// Scalar Gaussian process regression with a squared-exponential kernel and
// first-order derivative observations.
//
// Observations are scalar rows tagged with the component they observe:
// component 0 is the function value g(z), component c > 0 is the partial
// derivative dg/dz_{c-1}. A dataset that only holds function values therefore
// never materializes the selection between the derivative-augmented process
// and the observed rows; kernel entries are assembled per tag.
//
// Query layout in derivative mode: the outputs of test point p occupy the
// contiguous block [p * (n + 1), (p + 1) * (n + 1)) ordered as
// (value, d/dz_0, ..., d/dz_{n-1}). In value mode output p is g(z_p).

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sgpmpc/common.hpp"

namespace sgpmpc {

struct KernelParams {
    Vector lengthscales;        ///< one per input dimension, > 0
    double output_scale = 1.0;  ///< signal standard deviation, > 0
    double noise_var = 0.0;     ///< observation noise variance, >= 0

    Index input_dim() const { return lengthscales.size(); }
    /// Prior variance of an observation component (value or partial derivative).
    double prior_variance(int component) const;
    void validate() const;
};

/// sigma_f^2 * exp(-0.5 * sum_d (a_d - b_d)^2 / l_d^2)
double se_kernel(const Vector& a, const Vector& b, const KernelParams& params);

/// Covariance block between (g(a), grad g(a)) and (g(b), grad g(b)).
///
/// Entry (0, 0) is k(a, b), (0, 1 + e) = dk/db_e, (1 + d, 0) = dk/da_d and
/// (1 + d, 1 + e) = d^2 k / (da_d db_e).
Matrix se_kernel_derivative_block(const Vector& a, const Vector& b, const KernelParams& params);

/// Scalar observations, each tagged with its observed component.
struct ObservationSet {
    Matrix inputs;  ///< input_dim x size
    std::vector<int> components;
    Vector values;
    Vector noise_var;

    explicit ObservationSet(Index input_dim = 0) : inputs(input_dim, 0) {}

    Index size() const { return values.size(); }
    Index input_dim() const { return inputs.rows(); }
    void append(const Vector& z, int component, double value, double noise);
};

/// Heterogeneous dataset: value-only rows and value + gradient rows.
class GpDataset {
public:
    struct Entry {
        Vector input;
        double value = 0.0;
        std::optional<Vector> gradient;
        double noise_var = 0.0;
    };

    explicit GpDataset(Index input_dim) : input_dim_(input_dim) {}

    void add_value(const Vector& z, double value, double noise_var);
    void add_value_gradient(const Vector& z, double value, const Vector& gradient,
                            double noise_var);

    Index input_dim() const { return input_dim_; }
    Index size() const { return static_cast<Index>(entries_.size()); }
    const std::vector<Entry>& entries() const { return entries_; }

    /// Flattens the dataset into tagged scalar rows.
    ObservationSet observations() const;

private:
    Index input_dim_;
    std::vector<Entry> entries_;
};

struct PosteriorQuery {
    Matrix test_inputs;  ///< input_dim x n_star, n_star >= 1
    bool with_derivatives = false;
};

struct Posterior {
    Vector mean;
    Matrix covariance;
    Index points = 0;
    bool with_derivatives = false;

    Index outputs_per_point() const { return points == 0 ? 0 : mean.size() / points; }
    double value_mean(Index p) const { return mean(p * outputs_per_point()); }
    double value_variance(Index p) const {
        const Index k = p * outputs_per_point();
        return covariance(k, k);
    }
};

struct ConfidenceParams {
    double sqrt_beta = 2.5;
    double failure_prob = 0.05;  // informational only

    void validate() const;
};

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

/// Covariance among observation rows, without noise.
Matrix observation_covariance(const ObservationSet& obs, const KernelParams& params);

/// Covariance between observation rows and the outputs of query points.
Matrix cross_covariance(const ObservationSet& obs, const Matrix& points, bool with_derivatives,
                        const KernelParams& params);

/// Prior covariance among the outputs of query points.
Matrix query_covariance(const Matrix& points, bool with_derivatives, const KernelParams& params);

struct CholeskyResult {
    Matrix lower;
    double jitter = 0.0;
};

/// Cholesky with adaptive jitter: 1e-10 * trace / n, escalated by 10x up to
/// 1e-4 * trace / n, then FactorizationError.
CholeskyResult cholesky_with_jitter(const Matrix& symmetric);

/// GP posterior conditioned on a set of tagged observations. Supports cheap
/// incremental extension by block Cholesky updates. Immutable instances are
/// safe to share between threads.
class ConditionedGp {
public:
    /// Intermediate result of a query, reusable for appending the queried
    /// outputs as new observations.
    struct Query {
        Matrix points;
        bool with_derivatives = false;
        Matrix whitened_cross;  ///< L^{-1} k(observations, outputs)
        Vector mean;
        Matrix covariance;
        Index outputs_per_point() const { return with_derivatives ? points.rows() + 1 : 1; }
    };

    ConditionedGp(KernelParams params, ObservationSet observations);

    const KernelParams& params() const { return params_; }
    const ObservationSet& observations() const { return observations_; }
    Index size() const { return observations_.size(); }
    double jitter() const { return jitter_; }

    Query query(const Matrix& points, bool with_derivatives) const;
    Posterior posterior(const Matrix& points, bool with_derivatives) const;

    /// Value-only mean and variance at each point (diagonal only).
    std::pair<Vector, Vector> value_moments(const Matrix& points) const;

    /// Appends selected outputs of a previous query as observations with the
    /// given values and noise variances. The query must come from the current
    /// state of this object.
    void append(const Query& query, const std::vector<Index>& outputs, const Vector& values,
                const Vector& noise_var);

    /// Appends arbitrary observations.
    void append(const ObservationSet& extra);

    double log_marginal_likelihood() const;

private:
    void extend(const Matrix& whitened_cross, const Matrix& schur, const ObservationSet& extra);

    KernelParams params_;
    ObservationSet observations_;
    Matrix chol_;
    Vector whitened_targets_;
    double jitter_ = 0.0;
};

/// Posterior under the dataset (value mode or derivative mode).
Posterior posterior(const GpDataset& data, const PosteriorQuery& query, const KernelParams& params);

/// mu(z) -/+ sqrt(beta) * sigma(z).
Interval confidence_bounds(const Vector& z, const GpDataset& data, const KernelParams& params,
                           const ConfidenceParams& conf);

// Hyperparameter estimation

struct FitOptions {
    int max_sweeps = 40;
    double tolerance = 1e-7;
    /// Initial lengthscales as multiples of the per-dimension input range.
    std::vector<double> lengthscale_starts{0.5, 1.0, 2.0};
    int golden_iterations = 30;
};

/// Coordinate-wise log-marginal-likelihood ascent over log lengthscales and
/// log output scale with multi-start. Noise variance is kept fixed.
KernelParams fit_hyperparameters(const GpDataset& data, double noise_var,
                                 const FitOptions& options = {});

double log_marginal_likelihood(const GpDataset& data, const KernelParams& params);

}  // namespace sgpmpc
