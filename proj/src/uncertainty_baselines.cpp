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

#include "sgpmpc/uncertainty_baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sgpmpc/sqp_ocp.hpp"

namespace sgpmpc {

std::uint64_t monte_carlo_master_seed(std::uint64_t seed) {
    Rng rng = make_rng(seed, streams::kMonteCarlo);
    return rng();
}

StageClouds monte_carlo_envelope(const SystemSpec& system, std::shared_ptr<const GpModel> model,
                                 const Vector& x0, const Matrix& u, Index sample_count,
                                 std::uint64_t seed, const SamplerOptions& options) {
    if (sample_count < 1) throw InvalidArgument("Monte-Carlo envelope needs at least one sample");
    const Index H = u.cols();
    StageClouds clouds(static_cast<std::size_t>(H + 1), Matrix(system.n_x, sample_count));
    const std::uint64_t master = monte_carlo_master_seed(seed);
    parallel_for(static_cast<std::size_t>(sample_count), [&](std::size_t m) {
        SampledDynamics sampler(model, static_cast<Index>(m), master, options);
        const Matrix traj = simulate_sample(system, sampler, x0, u);
        for (Index i = 0; i <= H; ++i) clouds[static_cast<std::size_t>(i)].col(static_cast<Index>(m)) = traj.col(i);
    });
    return clouds;
}

std::vector<Ellipsoid> linearized_propagation(const SystemSpec& system, const GpModel& model,
                                              const Vector& x0, const Matrix& u, double scale) {
    const Index H = u.cols();
    const Index nx = system.n_x;
    const Matrix S = system.gp_selection();
    std::vector<Ellipsoid> out;
    out.reserve(static_cast<std::size_t>(H + 1));
    Vector x = x0;
    Matrix sigma = Matrix::Zero(nx, nx);
    out.push_back({x, sigma, scale});
    Vector mean;
    Matrix jac, fx, fu;
    for (Index i = 0; i < H; ++i) {
        const Vector z = system.gp_input(x, u.col(i));
        model.mean_and_jacobian(z, mean, jac);
        const Vector var = model.value_variance(z);
        system.f_jacobian(x, u.col(i), fx, fu);
        const Matrix A = fx + system.B_d * (jac * S).leftCols(nx);
        sigma = A * sigma * A.transpose() + system.B_d * var.asDiagonal() * system.B_d.transpose();
        sigma = 0.5 * (sigma + sigma.transpose()).eval();
        x = system.f(x, u.col(i)) + system.B_d * mean;
        out.push_back({x, sigma, scale});
    }
    return out;
}

namespace {

Eigen::Matrix2d planar(const Matrix& cov, Index a, Index b) {
    Eigen::Matrix2d m;
    m << cov(a, a), cov(a, b), cov(b, a), cov(b, b);
    return m;
}

double cross(const Point2& o, const Point2& a, const Point2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

double segment_distance(const Point2& a, const Point2& b, const Point2& p) {
    const Point2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (a + t * ab - p).norm();
}

}  // namespace

double ellipse_area(const Ellipsoid& e, Index a, Index b) {
    const double det = std::max(0.0, planar(e.covariance, a, b).determinant());
    return std::numbers::pi * e.scale * e.scale * std::sqrt(det);
}

Polygon ellipse_boundary(const Ellipsoid& e, Index a, Index b, int points) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(planar(e.covariance, a, b));
    const Eigen::Vector2d radii = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt() * e.scale;
    Eigen::Matrix2d axes = eig.eigenvectors();
    if (axes.determinant() < 0.0) axes.col(1) *= -1.0;
    const Point2 center(e.center(a), e.center(b));
    Polygon out;
    out.reserve(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k) {
        const double t = 2.0 * std::numbers::pi * k / points;
        out.push_back(center + axes * Eigen::Vector2d(radii(0) * std::cos(t), radii(1) * std::sin(t)));
    }
    return out;
}

Polygon convex_hull(const std::vector<Point2>& input) {
    std::vector<Point2> pts = input;
    std::sort(pts.begin(), pts.end(), [](const Point2& p, const Point2& q) {
        return p.x() < q.x() || (p.x() == q.x() && p.y() < q.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() <= 2) return pts;

    Polygon hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

std::vector<Point2> project(const Matrix& cloud, Index a, Index b) {
    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>(cloud.cols()));
    for (Index j = 0; j < cloud.cols(); ++j) pts.emplace_back(cloud(a, j), cloud(b, j));
    return pts;
}

std::vector<Polygon> convex_hulls(const StageClouds& clouds, Index a, Index b) {
    std::vector<Polygon> hulls;
    hulls.reserve(clouds.size());
    for (const auto& c : clouds) hulls.push_back(convex_hull(project(c, a, b)));
    return hulls;
}

double polygon_area(const Polygon& polygon) {
    if (polygon.size() < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const Point2& p = polygon[i];
        const Point2& q = polygon[(i + 1) % polygon.size()];
        twice += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * std::abs(twice);
}

bool contains(const Polygon& polygon, const Point2& p, double tol) {
    if (polygon.empty()) return false;
    if (polygon.size() == 1) return (polygon[0] - p).norm() <= tol;
    if (polygon.size() == 2) return segment_distance(polygon[0], polygon[1], p) <= tol;
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const Point2& a = polygon[i];
        const Point2& b = polygon[(i + 1) % polygon.size()];
        const double len = (b - a).norm();
        // signed distance to the edge line, negative outside
        if (cross(a, b, p) / len < -tol) return false;
    }
    return true;
}

double coverage(const Polygon& polygon, const std::vector<Point2>& points, double tol) {
    if (points.empty()) return 0.0;
    std::size_t inside = 0;
    for (const auto& p : points) inside += contains(polygon, p, tol) ? 1 : 0;
    return static_cast<double>(inside) / static_cast<double>(points.size());
}

}  // namespace sgpmpc
