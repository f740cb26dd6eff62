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

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sgpmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Cholesky factorization failed even after the maximum jitter escalation.
class FactorizationError : public Error {
public:
    FactorizationError(const std::string& what, double last_jitter, double mean_diagonal,
                       double min_diagonal)
        : Error(what),
          last_jitter(last_jitter),
          mean_diagonal(mean_diagonal),
          min_diagonal(min_diagonal) {}

    double last_jitter;
    double mean_diagonal;
    double min_diagonal;
};

class SamplingError : public Error {
public:
    SamplingError(const std::string& what, double acceptance_rate)
        : Error(what), acceptance_rate(acceptance_rate) {}

    double acceptance_rate;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Raised in hard-constraint mode when the QP of an SQP iteration is infeasible.
class InfeasibleQp : public Error {
public:
    InfeasibleQp(const std::string& what, Index stage) : Error(what), stage(stage) {}

    Index stage;
};

using Rng = std::mt19937_64;

/// Deterministic sub-stream of a master seed. The same (master, stream, index)
/// triple always yields the same generator, independent of thread scheduling.
Rng make_rng(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t index = 0);

/// Named sub-streams used across the library.
namespace streams {
inline constexpr std::uint64_t kSampling = 1;
inline constexpr std::uint64_t kTrainingNoise = 2;
inline constexpr std::uint64_t kMonteCarlo = 3;
inline constexpr std::uint64_t kBenchmark = 4;
inline constexpr std::uint64_t kTest = 5;
}  // namespace streams

/// Number of worker threads; read once from SGPMPC_THREADS, defaulting to the
/// hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, count). Exceptions thrown by any task are
/// rethrown on the calling thread after all workers finished.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace sgpmpc
