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

// Experiment configuration: flat "key = value" text with dotted section names
// and '#' comments. Unknown keys are rejected.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgpmpc/common.hpp"

namespace sgpmpc {

struct ExperimentConfig {
    std::string system = "pendulum";  ///< pendulum | bicycle
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    // plant parameters
    double dt = 0.0;  ///< 0 keeps the model default
    bool wide_angle_box = false;
    std::vector<std::pair<double, double>> obstacles;

    // GP
    bool fit_hyperparameters = true;
    std::vector<double> lengthscales;
    double output_scale = 1.0;
    double noise_std = 1e-3;  ///< likelihood noise std
    double sqrt_beta = 2.5;
    std::vector<Index> grid_counts;
    std::vector<double> grid_lower;
    std::vector<double> grid_upper;
    std::optional<double> data_noise_std;  ///< noise added to training data, defaults to noise_std
    bool grid_gradients = false;  ///< gradient observations at grid points

    // OCP
    Index horizon = 31;
    Index samples = 20;
    std::vector<double> Q;  ///< diagonal
    std::vector<double> R;
    std::optional<std::vector<double>> Q_terminal;
    std::vector<double> x_ref;
    std::vector<double> u_ref;
    std::vector<double> x0;
    std::vector<double> u_guess;  ///< constant input guess
    bool soft_constraints = true;
    double soft_weight = 1e4;
    bool sparse_qp = false;
    double qp_tol = 1e-8;
    int qp_max_iter = 100;

    // sampler
    bool truncate = true;
    int max_draws = 100;
    double pivot_tolerance = 1e-12;
    double row_jitter = 1e-12;

    // closed loop
    int sqp_iterations = 2;
    Index memory_groups = 1;
    Index steps = 50;
    bool apply_after_last_feedback = true;

    // uncertainty comparison
    int propagate_iterations = 20;
    Index mc_samples = 1000;
    std::vector<Index> plot_dims{0, 1};

    // benchmark
    Index bench_steps = 10;

    void validate() const;
};

/// Parses configuration text. Throws ConfigError with a line number on
/// malformed input and on unknown keys.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config(const std::string& path);

}  // namespace sgpmpc
