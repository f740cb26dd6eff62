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

// Experiment drivers behind the command-line tool.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sgpmpc/experiment_config.hpp"
#include "sgpmpc/experiment_io.hpp"
#include "sgpmpc/mpc_runtime.hpp"
#include "sgpmpc/uncertainty_baselines.hpp"

namespace sgpmpc {

struct ExperimentSetup {
    std::shared_ptr<SystemSpec> system;
    std::shared_ptr<GpModel> model;
    OcpDefinition ocp;
    MpcConfig mpc;
    Vector x0;
    Matrix u_guess;  ///< n_u x H
    std::vector<std::pair<double, double>> obstacles;
};

/// Builds the system, trains the GP on noisy grid data and assembles the OCP.
/// Training noise and sampling are seeded from `seed`.
ExperimentSetup build_experiment(const ExperimentConfig& config, std::uint64_t seed);

struct PropagationResult {
    Matrix u;
    std::vector<Matrix> sample_trajectories;  ///< SQP iterate, [n]
    Matrix true_trajectory;
    StageClouds monte_carlo;
    std::vector<Ellipsoid> linearized;
    std::vector<Polygon> sample_hulls;
    std::vector<Polygon> monte_carlo_hulls;
    Vector coverage;                  ///< per stage, fraction of MC points in the sample hull
    std::vector<char> true_contained;  ///< per stage
    double final_ellipse_area = 0.0;
    double final_monte_carlo_area = 0.0;
    Vector forward_deviation;  ///< per sample
    SqpResult sqp;
    Index dim_a = 0;
    Index dim_b = 1;
};

PropagationResult run_propagation(const ExperimentSetup& setup, const ExperimentConfig& config,
                                  std::uint64_t seed);

/// Geometry table: method, stage, vertex, x, y.
CsvTable propagation_table(const PropagationResult& result);

/// Writes propagation.csv, propagation.svg and propagation_summary.json.
void write_propagation(const PropagationResult& result, const std::string& dir);

/// Writes trace.csv, closed_loop.svg and violations.json.
void write_closed_loop(const ClosedLoopTrace& trace, const ExperimentSetup& setup, const std::string& dir);

struct BenchCell {
    Index samples = 0;
    int iterations = 0;
    TimingStats stats;
};

std::vector<BenchCell> run_bench(const ExperimentConfig& config, const std::vector<Index>& samples,
                                 const std::vector<int>& iterations, int repeats, std::uint64_t seed);

/// Table with one row per N and one column per L, cells "mean +- std".
std::string format_bench_table(const std::vector<BenchCell>& cells, Index horizon);

CsvTable bench_csv(const std::vector<BenchCell>& cells);

}  // namespace sgpmpc
