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

// Benchmark systems x+ = f(x, u) + B_d g(x, u) with a known part f and an
// unknown residual g that the controller only sees through a GP.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgpmpc/gp_regression.hpp"
#include "sgpmpc/gp_sampler.hpp"

namespace sgpmpc {

struct Box {
    Vector lower;
    Vector upper;

    Index size() const { return lower.size(); }
    bool contains(const Vector& v, double tol = 0.0) const;
    /// Largest violation max(lower - v, v - upper); negative when strictly inside.
    double max_violation(const Vector& v) const;
};

/// Nonlinear state constraint h(x) <= 0 with analytic gradient.
struct StateConstraint {
    std::string name;
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
};

class Plant;

class SystemSpec {
public:
    using DynamicsFn = std::function<Vector(const Vector& x, const Vector& u)>;
    using JacobianFn = std::function<void(const Vector& x, const Vector& u, Matrix& fx, Matrix& fu)>;
    using ResidualFn = std::function<Vector(const Vector& x, const Vector& u)>;

    std::string name;
    Index n_x = 0;
    Index n_u = 0;
    Index n_g = 0;
    double dt = 0.0;
    DynamicsFn f;
    JacobianFn f_jacobian;
    Matrix B_d;
    /// Indices into z = (x, u) that form the GP input.
    std::vector<Index> gp_inputs;
    Box state_box;
    Box input_box;
    std::vector<StateConstraint> state_constraints;

    /// GP input for a state/input pair.
    Vector gp_input(const Vector& x, const Vector& u) const;
    /// Selection matrix S with gp_input = S * (x, u).
    Matrix gp_selection() const;

    /// Installs the ground-truth residual. It can only be read back through a
    /// Plant or through training-data generation.
    void set_oracle(ResidualFn g_true) { g_true_ = std::move(g_true); }
    bool has_oracle() const { return static_cast<bool>(g_true_); }

    void validate() const;

private:
    friend class Plant;
    ResidualFn g_true_;
};

/// Evaluation-side view of the true system.
class Plant {
public:
    explicit Plant(std::shared_ptr<const SystemSpec> spec);

    Vector step(const Vector& x, const Vector& u) const;
    Vector residual(const Vector& x, const Vector& u) const;
    const SystemSpec& spec() const { return *spec_; }

private:
    std::shared_ptr<const SystemSpec> spec_;
};

struct PendulumParams {
    double dt = 0.015;
    double length = 1.0;
    double gravity = 10.0;
    /// Use theta in [-3, 3] instead of [-2.14, 2.14].
    bool wide_angle_box = false;
};

struct BicycleParams {
    double dt = 0.06;
    double lf = 1.105;
    double lr = 1.738;
};

/// Pendulum with f = 0, B_d = I and g(theta, omega, alpha) as the full step.
std::shared_ptr<SystemSpec> pendulum_spec(const PendulumParams& params = {});

/// Kinematic bicycle, x = (x_p, y_p, theta, v), u = (delta, a),
/// g(theta, v, delta) acting on the first three states.
std::shared_ptr<SystemSpec> bicycle_spec(const BicycleParams& params = {});

/// h(x) = 5.67 - (x_p - x_e)^2 / 9 - (y_p - y_e)^2 for each center.
std::vector<StateConstraint> obstacle_constraints(const std::vector<std::pair<double, double>>& centers,
                                                  Index x_index = 0, Index y_index = 1);

struct TrainingGridSpec {
    std::vector<Index> counts;  ///< per GP input dimension
    Vector lower;
    Vector upper;
    double noise_std = 1e-3;
    bool with_gradients = false;  ///< also record d y / d z at every grid point
};

/// Equally spaced grid points (gp input dim x prod(counts)), last dimension
/// varying fastest.
Matrix training_grid(const TrainingGridSpec& grid);

/// One dataset per output dimension of g, with targets
/// y = B_d^+ (x+ - f(x, u)) + noise. State/input components that are not GP
/// inputs are held at the box point closest to zero. With `with_gradients`
/// every row also carries d y / d z.
std::vector<GpDataset> generate_training_data(const SystemSpec& spec, const TrainingGridSpec& grid,
                                              std::uint64_t seed);

/// Builds the per-output GP model, either with fixed kernel parameters (one
/// per output dimension) or by maximizing the marginal likelihood.
std::shared_ptr<GpModel> make_gp_model(const std::vector<GpDataset>& data, double noise_var,
                                       const ConfidenceParams& confidence,
                                       const std::optional<std::vector<KernelParams>>& fixed = {});

}  // namespace sgpmpc
