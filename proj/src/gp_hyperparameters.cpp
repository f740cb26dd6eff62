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
#include <limits>

#include "sgpmpc/gp_regression.hpp"

namespace sgpmpc {

namespace {

// Log-parameters: [log l_0, ..., log l_{n-1}, log sigma_f].
KernelParams unpack(const Vector& theta, double noise_var) {
    KernelParams p;
    const Index n = theta.size() - 1;
    p.lengthscales = theta.head(n).array().exp();
    p.output_scale = std::exp(theta(n));
    p.noise_var = noise_var;
    return p;
}

double objective(const ObservationSet& obs, const Vector& theta, double noise_var) {
    try {
        return ConditionedGp(unpack(theta, noise_var), obs).log_marginal_likelihood();
    } catch (const FactorizationError&) {
        return -std::numeric_limits<double>::infinity();
    }
}

}  // namespace

double log_marginal_likelihood(const GpDataset& data, const KernelParams& params) {
    return ConditionedGp(params, data.observations()).log_marginal_likelihood();
}

KernelParams fit_hyperparameters(const GpDataset& data, double noise_var,
                                 const FitOptions& options) {
    const Index n = data.input_dim();
    if (data.size() == 0) throw InvalidArgument("cannot fit hyperparameters without data");
    const ObservationSet obs = data.observations();

    Vector range(n);
    for (Index d = 0; d < n; ++d) {
        const double span = obs.inputs.row(d).maxCoeff() - obs.inputs.row(d).minCoeff();
        range(d) = span > 0.0 ? span : 1.0;
    }
    double y_rms = std::sqrt(obs.values.squaredNorm() / static_cast<double>(obs.size()));
    if (!(y_rms > 0.0)) y_rms = 1.0;

    Vector lower(n + 1), upper(n + 1);
    lower.head(n) = (range * 1e-2).array().log();
    upper.head(n) = (range * 1e2).array().log();
    lower(n) = std::log(1e-3 * y_rms);
    upper(n) = std::log(1e3 * y_rms);

    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    Vector best_theta;
    double best_value = -std::numeric_limits<double>::infinity();

    for (double start : options.lengthscale_starts) {
        Vector theta(n + 1);
        theta.head(n) = (range * start).array().log();
        theta(n) = std::log(y_rms);
        double value = objective(obs, theta, noise_var);

        for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
            const double sweep_start = value;
            for (Index c = 0; c <= n; ++c) {
                // golden-section search along one log-coordinate
                double a = std::max(lower(c), theta(c) - 3.0);
                double b = std::min(upper(c), theta(c) + 3.0);
                Vector probe = theta;
                auto eval = [&](double x) {
                    probe(c) = x;
                    return objective(obs, probe, noise_var);
                };
                double x1 = b - golden * (b - a);
                double x2 = a + golden * (b - a);
                double f1 = eval(x1);
                double f2 = eval(x2);
                for (int it = 0; it < options.golden_iterations; ++it) {
                    if (f1 < f2) {
                        a = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = a + golden * (b - a);
                        f2 = eval(x2);
                    } else {
                        b = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = b - golden * (b - a);
                        f1 = eval(x1);
                    }
                }
                const double x_new = f1 > f2 ? x1 : x2;
                const double f_new = std::max(f1, f2);
                if (f_new > value) {
                    theta(c) = x_new;
                    value = f_new;
                }
            }
            if (value - sweep_start <= options.tolerance * (1.0 + std::abs(value))) break;
        }

        if (value > best_value) {
            best_value = value;
            best_theta = theta;
        }
    }

    if (!std::isfinite(best_value))
        throw FactorizationError("hyperparameter fit failed: no finite likelihood", 0.0, 0.0, 0.0);
    return unpack(best_theta, noise_var);
}

}  // namespace sgpmpc
