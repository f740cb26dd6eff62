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

// Shared random problem generators for unit and acceptance tests.

#pragma once

#include <random>

#include "sgpmpc/qp_backend.hpp"
#include "sgpmpc/sqp_ocp.hpp"

namespace sgpmpc::fixtures {

// Multi-sample OCP subproblem with random stable-ish dynamics, positive
// definite stage costs, box rows on states and inputs. Feasible at du = 0
// for the input rows; state rows are soft when `soft` is set.
inline OcpQp random_ocp(std::mt19937_64& rng, Index samples, Index horizon, Index nx, Index nu, bool soft,
                        double state_bound = 0.4) {
    std::normal_distribution<double> normal;
    auto randn = [&](Index r, Index c) {
        Matrix M(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) M(i, j) = normal(rng);
        return M;
    };
    OcpQp ocp(samples, horizon, nx, nu);
    ocp.soft_weight = 1e3;
    for (Index n = 0; n < samples; ++n) {
        const auto sn = static_cast<std::size_t>(n);
        ocp.x0_offset[sn] = 0.1 * randn(nx, 1);
        for (Index i = 0; i <= horizon; ++i) {
            const auto si = static_cast<std::size_t>(i);
            const Index w = i < horizon ? nx + nu : nx;
            const Matrix L = randn(w, w);
            ocp.hessian[sn][si] = L * L.transpose() / static_cast<double>(w) + 0.5 * Matrix::Identity(w, w);
            ocp.gradient[sn][si] = randn(w, 1);
            if (i < horizon) {
                ocp.A[sn][si] = Matrix::Identity(nx, nx) + 0.1 * randn(nx, nx);
                ocp.B[sn][si] = randn(nx, nu);
                ocp.c[sn][si] = 0.05 * randn(nx, 1);
            }
            StageRows rows;
            rows.Cx.resize(2 * nx, nx);
            rows.Cx << Matrix::Identity(nx, nx), -Matrix::Identity(nx, nx);
            rows.Cu = Matrix::Zero(2 * nx, nu);
            rows.d = Vector::Constant(2 * nx, state_bound);
            rows.soft.assign(static_cast<std::size_t>(2 * nx), soft ? 1 : 0);
            ocp.state_rows[sn][si] = rows;
        }
    }
    for (Index i = 0; i < horizon; ++i) {
        StageRows rows;
        rows.Cx = Matrix::Zero(2 * nu, nx);
        rows.Cu.resize(2 * nu, nu);
        rows.Cu << Matrix::Identity(nu, nu), -Matrix::Identity(nu, nu);
        rows.d = Vector::Constant(2 * nu, 0.5);
        rows.soft.assign(static_cast<std::size_t>(2 * nu), 0);
        ocp.input_rows[static_cast<std::size_t>(i)] = rows;
    }
    return ocp;
}

// Pendulum OCP with fixed kernel parameters, so no likelihood fit is needed.
inline OcpDefinition pendulum_ocp(Index samples, Index horizon) {
    auto system = pendulum_spec();
    TrainingGridSpec grid{{3, 3, 5}, Vector{{-2.14, -2.5, -8.0}}, Vector{{2.14, 2.5, 8.0}}, 0.0, true};
    const auto data = generate_training_data(*system, grid, 1);
    KernelParams p;
    p.lengthscales = Vector{{3.0, 5.0, 30.0}};
    p.output_scale = 2.0;
    OcpDefinition ocp;
    ocp.system = system;
    ocp.model = make_gp_model(data, 1e-6, ConfidenceParams{}, std::vector<KernelParams>{p, p});
    ocp.horizon = horizon;
    ocp.samples = samples;
    ocp.cost.Q = Matrix{{50.0, 0.0}, {0.0, 50.0}};
    ocp.cost.R = Matrix{{0.1}};
    ocp.cost.x_ref = Vector{{2.5, 0.0}};
    ocp.cost.u_ref = Vector{{0.0}};
    ocp.seed = 5;
    return ocp;
}

}  // namespace sgpmpc::fixtures
