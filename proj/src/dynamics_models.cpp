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

#include "sgpmpc/dynamics_models.hpp"

#include <algorithm>
#include <cmath>

namespace sgpmpc {

bool Box::contains(const Vector& v, double tol) const { return max_violation(v) <= tol; }

double Box::max_violation(const Vector& v) const {
    if (v.size() != size()) throw InvalidArgument("box dimension mismatch");
    double worst = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < size(); ++i)
        worst = std::max({worst, lower(i) - v(i), v(i) - upper(i)});
    return worst;
}

Vector SystemSpec::gp_input(const Vector& x, const Vector& u) const {
    Vector z(static_cast<Index>(gp_inputs.size()));
    for (std::size_t i = 0; i < gp_inputs.size(); ++i) {
        const Index j = gp_inputs[i];
        z(static_cast<Index>(i)) = j < n_x ? x(j) : u(j - n_x);
    }
    return z;
}

Matrix SystemSpec::gp_selection() const {
    Matrix s = Matrix::Zero(static_cast<Index>(gp_inputs.size()), n_x + n_u);
    for (std::size_t i = 0; i < gp_inputs.size(); ++i) s(static_cast<Index>(i), gp_inputs[i]) = 1.0;
    return s;
}

void SystemSpec::validate() const {
    if (n_x < 1 || n_u < 1 || n_g < 1) throw InvalidArgument(name + ": dimensions must be positive");
    if (B_d.rows() != n_x || B_d.cols() != n_g) throw InvalidArgument(name + ": B_d has wrong shape");
    Eigen::FullPivLU<Matrix> lu(B_d);
    if (lu.rank() != n_g) throw InvalidArgument(name + ": B_d must have full column rank");
    if (!f || !f_jacobian) throw InvalidArgument(name + ": known dynamics missing");
    for (Index j : gp_inputs)
        if (j < 0 || j >= n_x + n_u) throw InvalidArgument(name + ": GP input index out of range");
    if (state_box.size() != n_x || input_box.size() != n_u)
        throw InvalidArgument(name + ": box dimensions do not match");
    if (!(dt > 0.0)) throw InvalidArgument(name + ": sampling time must be positive");
}

Plant::Plant(std::shared_ptr<const SystemSpec> spec) : spec_(std::move(spec)) {
    if (!spec_ || !spec_->g_true_) throw InvalidArgument("plant needs a system with a residual oracle");
}

Vector Plant::residual(const Vector& x, const Vector& u) const { return spec_->g_true_(x, u); }

Vector Plant::step(const Vector& x, const Vector& u) const {
    return spec_->f(x, u) + spec_->B_d * spec_->g_true_(x, u);
}

std::shared_ptr<SystemSpec> pendulum_spec(const PendulumParams& params) {
    auto spec = std::make_shared<SystemSpec>();
    spec->name = "pendulum";
    spec->n_x = 2;
    spec->n_u = 1;
    spec->n_g = 2;
    spec->dt = params.dt;
    spec->f = [](const Vector&, const Vector&) { return Vector::Zero(2).eval(); };
    spec->f_jacobian = [](const Vector&, const Vector&, Matrix& fx, Matrix& fu) {
        fx = Matrix::Zero(2, 2);
        fu = Matrix::Zero(2, 1);
    };
    spec->B_d = Matrix::Identity(2, 2);
    spec->gp_inputs = {0, 1, 2};
    const double theta_max = params.wide_angle_box ? 3.0 : 2.14;
    spec->state_box = {Vector{{-theta_max, -2.5}}, Vector{{theta_max, 2.5}}};
    spec->input_box = {Vector{{-8.0}}, Vector{{8.0}}};
    const double dt = params.dt, l = params.length, ga = params.gravity;
    spec->set_oracle([dt, l, ga](const Vector& x, const Vector& u) {
        Vector next(2);
        next(0) = x(0) + x(1) * dt;
        next(1) = x(1) - ga * std::sin(x(0)) * dt / l + u(0) * dt;
        return next;
    });
    spec->validate();
    return spec;
}

std::shared_ptr<SystemSpec> bicycle_spec(const BicycleParams& params) {
    auto spec = std::make_shared<SystemSpec>();
    spec->name = "bicycle";
    spec->n_x = 4;
    spec->n_u = 2;
    spec->n_g = 3;
    spec->dt = params.dt;
    const double dt = params.dt;
    spec->f = [dt](const Vector& x, const Vector& u) {
        Vector next = x;
        next(3) += u(1) * dt;
        return next;
    };
    spec->f_jacobian = [dt](const Vector&, const Vector&, Matrix& fx, Matrix& fu) {
        fx = Matrix::Identity(4, 4);
        fu = Matrix::Zero(4, 2);
        fu(3, 1) = dt;
    };
    spec->B_d = Matrix::Zero(4, 3);
    spec->B_d.topRows(3).setIdentity();
    spec->gp_inputs = {2, 3, 4};
    spec->state_box = {Vector{{-2.14, 0.0, -1.14, -1.0}}, Vector{{70.0, 6.0, 1.14, 15.0}}};
    spec->input_box = {Vector{{-0.6, -2.0}}, Vector{{0.6, 2.0}}};
    const double lf = params.lf, lr = params.lr;
    spec->set_oracle([dt, lf, lr](const Vector& x, const Vector& u) {
        const double zeta = std::atan(lr / (lf + lr) * std::tan(u(0)));
        Vector g(3);
        g(0) = x(3) * std::cos(x(2) + zeta) * dt;
        g(1) = x(3) * std::sin(x(2) + zeta) * dt;
        g(2) = x(3) * std::sin(zeta) / lr * dt;
        return g;
    });
    spec->validate();
    return spec;
}

std::vector<StateConstraint> obstacle_constraints(const std::vector<std::pair<double, double>>& centers,
                                                  Index x_index, Index y_index) {
    std::vector<StateConstraint> out;
    for (std::size_t i = 0; i < centers.size(); ++i) {
        const auto [xe, ye] = centers[i];
        StateConstraint c;
        c.name = "obstacle" + std::to_string(i);
        c.value = [=](const Vector& x) {
            const double dx = x(x_index) - xe, dy = x(y_index) - ye;
            return 5.67 - dx * dx / 9.0 - dy * dy;
        };
        c.gradient = [=](const Vector& x) {
            Vector g = Vector::Zero(x.size());
            g(x_index) = -2.0 * (x(x_index) - xe) / 9.0;
            g(y_index) = -2.0 * (x(y_index) - ye);
            return g;
        };
        out.push_back(std::move(c));
    }
    return out;
}

Matrix training_grid(const TrainingGridSpec& grid) {
    const Index dim = static_cast<Index>(grid.counts.size());
    if (dim == 0 || grid.lower.size() != dim || grid.upper.size() != dim)
        throw InvalidArgument("training grid dimensions are inconsistent");
    Index total = 1;
    for (Index c : grid.counts) {
        if (c < 1) throw InvalidArgument("training grid counts must be >= 1");
        total *= c;
    }
    Matrix points(dim, total);
    for (Index k = 0; k < total; ++k) {
        Index rem = k;
        for (Index d = dim - 1; d >= 0; --d) {
            const Index c = grid.counts[static_cast<std::size_t>(d)];
            const Index idx = rem % c;
            rem /= c;
            points(d, k) = c == 1 ? 0.5 * (grid.lower(d) + grid.upper(d))
                                  : grid.lower(d) + (grid.upper(d) - grid.lower(d)) *
                                                        static_cast<double>(idx) /
                                                        static_cast<double>(c - 1);
        }
    }
    return points;
}

std::vector<GpDataset> generate_training_data(const SystemSpec& spec, const TrainingGridSpec& grid,
                                              std::uint64_t seed) {
    spec.validate();
    if (static_cast<Index>(grid.counts.size()) != static_cast<Index>(spec.gp_inputs.size()))
        throw InvalidArgument("training grid must span the GP inputs");
    if (grid.noise_std < 0.0) throw InvalidArgument("noise std must be non-negative");

    auto spec_ptr = std::shared_ptr<const SystemSpec>(&spec, [](const SystemSpec*) {});
    const Plant plant(spec_ptr);
    const Matrix points = training_grid(grid);
    const Matrix pinv = spec.B_d.completeOrthogonalDecomposition().pseudoInverse();

    Vector x(spec.n_x), u(spec.n_u);
    for (Index i = 0; i < spec.n_x; ++i)
        x(i) = std::clamp(0.0, spec.state_box.lower(i), spec.state_box.upper(i));
    for (Index i = 0; i < spec.n_u; ++i)
        u(i) = std::clamp(0.0, spec.input_box.lower(i), spec.input_box.upper(i));

    Rng rng = make_rng(seed, streams::kTrainingNoise);
    std::normal_distribution<double> normal;
    const double noise_var = grid.noise_std * grid.noise_std;
    std::vector<GpDataset> data(static_cast<std::size_t>(spec.n_g),
                                GpDataset(static_cast<Index>(spec.gp_inputs.size())));
    const Index n_in = static_cast<Index>(spec.gp_inputs.size());
    auto set_input = [&](Index i, double value) {
        const Index j = spec.gp_inputs[static_cast<std::size_t>(i)];
        (j < spec.n_x ? x(j) : u(j - spec.n_x)) = value;
    };
    auto measure = [&](const Vector& z) {
        for (Index i = 0; i < n_in; ++i) set_input(i, z(i));
        return Vector(pinv * (plant.step(x, u) - spec.f(x, u)));
    };
    for (Index k = 0; k < points.cols(); ++k) {
        const Vector z = points.col(k);
        const Vector y = measure(z);
        // central differences of the true residual map; h^2 error is far
        // below the measurement noise
        Matrix jac(spec.n_g, n_in);
        if (grid.with_gradients) {
            for (Index i = 0; i < n_in; ++i) {
                const double h = 1e-5 * std::max(1.0, std::abs(z(i)));
                Vector zp = z, zm = z;
                zp(i) += h;
                zm(i) -= h;
                jac.col(i) = (measure(zp) - measure(zm)) / (2.0 * h);
            }
        }
        for (Index d = 0; d < spec.n_g; ++d) {
            const double eps = grid.noise_std > 0.0 ? grid.noise_std * normal(rng) : 0.0;
            auto& set = data[static_cast<std::size_t>(d)];
            if (!grid.with_gradients) {
                set.add_value(z, y(d) + eps, noise_var);
                continue;
            }
            Vector grad = jac.row(d).transpose();
            if (grid.noise_std > 0.0)
                for (Index i = 0; i < n_in; ++i) grad(i) += grid.noise_std * normal(rng);
            set.add_value_gradient(z, y(d) + eps, grad, noise_var);
        }
    }
    return data;
}

std::shared_ptr<GpModel> make_gp_model(const std::vector<GpDataset>& data, double noise_var,
                                       const ConfidenceParams& confidence,
                                       const std::optional<std::vector<KernelParams>>& fixed) {
    confidence.validate();
    if (data.empty()) throw InvalidArgument("GP model needs at least one output dimension");
    if (fixed && fixed->size() != data.size())
        throw InvalidArgument("one kernel parameter set per output dimension required");
    auto model = std::make_shared<GpModel>();
    model->confidence = confidence;
    model->outputs.reserve(data.size());
    for (std::size_t d = 0; d < data.size(); ++d) {
        KernelParams params;
        if (fixed) {
            params = (*fixed)[d];
            params.noise_var = noise_var;
        } else {
            params = fit_hyperparameters(data[d], noise_var);
        }
        model->outputs.emplace_back(params, data[d].observations());
    }
    return model;
}

}  // namespace sgpmpc
