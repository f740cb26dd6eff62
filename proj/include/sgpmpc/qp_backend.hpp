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

// Convex QP solver and the multi-sample OCP subproblem.

#pragma once

#include <string>
#include <vector>

#include "sgpmpc/common.hpp"

namespace sgpmpc {

/// min 0.5 x'Px + q'x  s.t.  Ax = b,  Gx <= h.
///
/// Rows flagged soft are relaxed to Gx <= h + t with t >= 0 and an added cost
/// soft_weight * sum(t).
struct DenseQp {
    Matrix P;
    Vector q;
    Matrix A;
    Vector b;
    Matrix G;
    Vector h;
    std::vector<char> soft;  ///< empty means all rows hard
    double soft_weight = 1e4;

    Index variables() const { return q.size(); }
    Index equalities() const { return b.size(); }
    Index inequalities() const { return h.size(); }
    bool is_soft(Index row) const { return !soft.empty() && soft[static_cast<std::size_t>(row)]; }
    void validate() const;
};

enum class QpStatus { Optimal, MaxIterations, Infeasible };

const char* to_string(QpStatus status);

struct QpOptions {
    double tol = 1e-8;
    int max_iter = 100;
};

struct QpSolution {
    Vector x;
    Vector y;      ///< equality multipliers
    Vector z;      ///< inequality multipliers (>= 0)
    Vector slack;  ///< soft-row relaxation t (zero on hard rows)
    QpStatus status = QpStatus::MaxIterations;
    int iterations = 0;
    double stationarity = 0.0;
    double primal_residual = 0.0;
    double complementarity = 0.0;
};

/// Primal-dual interior point with Mehrotra predictor-corrector. Stationarity
/// and primal residuals are measured in the infinity norm relative to 1 + the
/// size of the data; the largest pairwise complementarity product is absolute.
QpSolution solve_qp(const DenseQp& qp, const QpOptions& options = {});

/// Adds eps * I with eps = max(0, floor - lambda_min) to a symmetric matrix.
Matrix regularize_hessian(const Matrix& hessian, double floor = 1e-8);

/// Linear rows Cx * dx + Cu * du <= d attached to one stage of one sample.
struct StageRows {
    Matrix Cx;
    Matrix Cu;
    Vector d;
    std::vector<char> soft;

    Index size() const { return d.size(); }
};

/// Multi-sample OCP subproblem with inputs shared across samples:
///
///   dx^n_0 = x0_offset^n,
///   dx^n_{i+1} = A^n_i dx^n_i + B^n_i du_i + c^n_i,
///   cost sum_n sum_i 0.5 [dx; du]' H^n_i [dx; du] + g^n_i' [dx; du]
///        + 0.5 dx^n_H' H^n_H dx^n_H + g^n_H' dx^n_H.
struct OcpQp {
    Index samples = 0;
    Index horizon = 0;
    Index n_x = 0;
    Index n_u = 0;

    std::vector<Vector> x0_offset;                   ///< [n]
    std::vector<std::vector<Matrix>> A, B;           ///< [n][i], i < H
    std::vector<std::vector<Vector>> c;              ///< [n][i], i < H
    std::vector<std::vector<Matrix>> hessian;        ///< [n][i], i <= H (stage H: n_x x n_x)
    std::vector<std::vector<Vector>> gradient;       ///< [n][i], i <= H
    std::vector<std::vector<StageRows>> state_rows;  ///< [n][i], i <= H (Cu ignored at H)
    std::vector<StageRows> input_rows;               ///< [i], i < H, only Cu used
    double soft_weight = 1e4;

    /// Allocates zero-filled data of the right shape.
    OcpQp(Index samples, Index horizon, Index n_x, Index n_u);
    OcpQp() = default;

    void validate() const;
    /// Applies regularize_hessian to every block.
    void regularize(double floor = 1e-8);
};

struct OcpSolution {
    Matrix du;                ///< n_u x H
    std::vector<Matrix> dx;   ///< [n], n_x x (H + 1)
    QpStatus status = QpStatus::MaxIterations;
    int iterations = 0;
    double max_slack = 0.0;
    /// Stage of the first row violated by more than tol, -1 when none.
    Index first_violated_stage = -1;
};

/// Input-only QP plus the affine map dx^n_i = offset^n_i + Gamma^n_i du.
struct CondensedQp {
    DenseQp qp;
    std::vector<std::vector<Vector>> offset;  ///< [n][i], i <= H
    std::vector<std::vector<Matrix>> gamma;   ///< [n][i], i <= H
    /// Stage index of every inequality row.
    std::vector<Index> row_stage;

    OcpSolution expand(const QpSolution& solution, const OcpQp& ocp) const;
};

CondensedQp condense(const OcpQp& ocp);

/// Solves through the condensed form.
OcpSolution solve_condensed(const OcpQp& ocp, const QpOptions& options = {});

/// Solves the uncondensed problem over (du, dx) with the dynamics as equality
/// constraints.
OcpSolution solve_sparse(const OcpQp& ocp, const QpOptions& options = {});

}  // namespace sgpmpc
