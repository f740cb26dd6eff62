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

// Reference uncertainty propagation for a fixed input sequence: Monte-Carlo
// envelopes of sampled functions, mean-equivalent linearized covariance
// propagation, and planar convex-hull utilities.

#pragma once

#include <memory>
#include <vector>

#include "sgpmpc/dynamics_models.hpp"
#include "sgpmpc/gp_sampler.hpp"

namespace sgpmpc {

using Point2 = Eigen::Vector2d;
using Polygon = std::vector<Point2>;

/// Per-stage state clouds, stage i holds an n_x x M matrix.
using StageClouds = std::vector<Matrix>;

/// Simulates M independent sampled functions under the inputs u. Sample m uses
/// the same sampler construction as the SQP (id m) with a master seed derived
/// from `seed` on the Monte-Carlo stream.
StageClouds monte_carlo_envelope(const SystemSpec& system, std::shared_ptr<const GpModel> model,
                                 const Vector& x0, const Matrix& u, Index sample_count,
                                 std::uint64_t seed, const SamplerOptions& options = {});

/// Master seed used by monte_carlo_envelope for a user seed.
std::uint64_t monte_carlo_master_seed(std::uint64_t seed);

struct Ellipsoid {
    Vector center;
    Matrix covariance;
    double scale = 1.0;  ///< boundary at scale standard deviations
};

/// Mean rollout with Sigma_{i+1} = A_i Sigma_i A_i' + B_d diag(sigma^2(z_i)) B_d',
/// Sigma_0 = 0, A_i the Jacobian of the mean dynamics.
std::vector<Ellipsoid> linearized_propagation(const SystemSpec& system, const GpModel& model,
                                              const Vector& x0, const Matrix& u, double scale);

/// Area of the planar projection onto dimensions (a, b).
double ellipse_area(const Ellipsoid& e, Index a, Index b);

/// Boundary points of the planar projection, counter-clockwise.
Polygon ellipse_boundary(const Ellipsoid& e, Index a, Index b, int points = 64);

/// Monotone-chain hull, counter-clockwise without repeated endpoint. Collinear
/// input yields the two extreme points, identical input a single point.
Polygon convex_hull(const std::vector<Point2>& points);

/// Rows a, b of a cloud as planar points.
std::vector<Point2> project(const Matrix& cloud, Index a, Index b);

std::vector<Polygon> convex_hulls(const StageClouds& clouds, Index a, Index b);

double polygon_area(const Polygon& polygon);

/// Inside or on the boundary of a convex counter-clockwise polygon, with an
/// absolute tolerance. Degenerate hulls are treated as segments or points.
bool contains(const Polygon& polygon, const Point2& p, double tol = 1e-9);

/// Fraction of points inside the polygon.
double coverage(const Polygon& polygon, const std::vector<Point2>& points, double tol = 1e-9);

}  // namespace sgpmpc
