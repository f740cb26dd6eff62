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

// Consistent sampling of function values and Jacobians from a truncated GP
// posterior.
//
// A SampledDynamics object realizes one function g^n lazily: every draw is
// conditioned on all rows drawn before it (forward sampling), so querying the
// same input twice returns the same value and gradient. Value components are
// truncated to the confidence band of the base posterior by rejection.

#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "sgpmpc/gp_regression.hpp"

namespace sgpmpc {

/// Independent scalar GPs, one per output dimension, conditioned on the base
/// dataset. Shared read-only between samples.
struct GpModel {
    std::vector<ConditionedGp> outputs;
    ConfidenceParams confidence;

    Index input_dim() const { return outputs.empty() ? 0 : outputs.front().params().input_dim(); }
    Index output_dim() const { return static_cast<Index>(outputs.size()); }
    Index base_rows() const { return outputs.empty() ? 0 : outputs.front().size(); }

    /// Posterior mean (n_g) and mean Jacobian (n_g x n_in) at one input.
    void mean_and_jacobian(const Vector& z, Vector& mean, Matrix& jacobian) const;
    /// Posterior value variance per output dimension at one input.
    Vector value_variance(const Vector& z) const;
    /// Lower/upper confidence bounds for every output dimension (n_g x m each).
    void confidence_band(const Matrix& points, Matrix& lower, Matrix& upper) const;
};

struct SamplerOptions {
    bool truncate = true;
    int max_draws = 100;  ///< eta redraws per call before clamping
    /// Outputs whose conditional variance falls below this fraction of their
    /// prior variance are treated as determined by the rows drawn so far.
    double pivot_tolerance = 1e-12;
    /// Diagonal jitter on appended sampled rows, relative to prior variance.
    double row_jitter = 1e-12;
};

struct DimensionDraw {
    Vector values;     ///< m
    Matrix gradients;  ///< n_in x m, empty in value mode
    int draws = 0;
    bool clamped = false;
    Index appended_rows = 0;
};

struct JointSample {
    Matrix values;                 ///< n_g x m
    std::vector<Matrix> gradients;  ///< per output dimension, n_in x m
    int draws = 0;
    bool clamped = false;

    Index points() const { return values.cols(); }
    /// Jacobian dg/dz (n_g x n_in) at point p.
    Matrix jacobian(Index p) const;
};

class SampledDynamics {
public:
    SampledDynamics(std::shared_ptr<const GpModel> model, Index sample_id,
                    std::uint64_t master_seed, SamplerOptions options = {});

    Index sample_id() const { return sample_id_; }
    const GpModel& model() const { return *model_; }
    const std::shared_ptr<const GpModel>& model_ptr() const { return model_; }
    const SamplerOptions& options() const { return options_; }

    /// Draws (values, gradients) at all points for every output dimension and
    /// conditions the sample on the result.
    JointSample draw_joint(const Matrix& points, bool with_gradients = true);

    /// Same as draw_joint for one output dimension. Distinct dimensions of one
    /// sample may be drawn concurrently.
    DimensionDraw draw_dimension(Index dim, const Matrix& points, bool with_gradients);

    /// Number of appended row groups (one per draw call) for a dimension.
    Index group_count(Index dim = 0) const;
    /// Conditioning rows (base + sampled) of a dimension.
    Index conditioning_rows(Index dim) const;
    Index max_conditioning_rows() const;

    /// Keeps the base dataset plus the most recent `keep` row groups.
    void keep_recent(Index keep);

    /// Sampling statistics summed over output dimensions.
    long total_draws() const;
    long accepted_calls() const;
    long clamped_calls() const;

private:
    struct DimState {
        ConditionedGp gp;
        std::deque<ObservationSet> groups;
        Rng rng;
        long draws = 0;
        long accepted = 0;
        long clamped = 0;
    };

    std::shared_ptr<const GpModel> model_;
    Index sample_id_;
    SamplerOptions options_;
    std::vector<DimState> dims_;
};

/// Returns a copy reduced to the base dataset plus the last `keep` groups.
SampledDynamics truncate_memory(SampledDynamics sample, Index keep);

struct EquivalenceReport {
    Vector analytic_mean;
    Matrix analytic_covariance;
    Vector sequential_mean;
    Matrix sequential_covariance;
    Vector joint_mean;
    Matrix joint_covariance;
    double max_mean_zscore = 0.0;
    double covariance_relative_error = 0.0;           ///< sequential vs analytic, Frobenius
    double joint_covariance_relative_error = 0.0;     ///< joint draws vs analytic
    double sequential_vs_joint_relative_error = 0.0;  ///< sequential vs joint draws
};

/// Draws M full value vectors at `points` block-by-block (each block
/// conditioned on the previous ones) and M joint draws with the same seeds,
/// and compares their moments against the analytic posterior of output 0.
EquivalenceReport sequential_equivalence_check(std::shared_ptr<const GpModel> model,
                                               const Matrix& points,
                                               const std::vector<std::vector<Index>>& partition,
                                               Index sample_count, std::uint64_t seed);

}  // namespace sgpmpc
