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

#include "sgpmpc/experiment_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace sgpmpc {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) parts.push_back(trim(item));
    return parts;
}

struct Entry {
    std::string value;
    int line = 0;
};

class Reader {
public:
    explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

    template <typename Fn>
    void read(const std::string& key, Fn&& assign) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return;
        used_.insert(key);
        try {
            assign(it->second.value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(it->second.line) + ": " + key + ": " + e.what());
        }
    }

    void finish() const {
        for (const auto& [key, entry] : entries_) {
            if (!used_.count(key))
                throw ConfigError("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
        }
    }

private:
    std::map<std::string, Entry> entries_;
    std::set<std::string> used_;
};

double to_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw ConfigError("trailing characters in number '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("expected a number, got '" + s + "'");
    }
}

long long to_integer(const std::string& s) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("expected an integer, got '" + s + "'");
    return v;
}

std::uint64_t to_unsigned(const std::string& s) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("expected an unsigned integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("expected true or false, got '" + s + "'");
}

std::vector<double> to_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& part : split(s, ',')) out.push_back(to_double(part));
    return out;
}

std::vector<Index> to_indices(const std::string& s) {
    std::vector<Index> out;
    for (const auto& part : split(s, ',')) out.push_back(static_cast<Index>(to_integer(part)));
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError(what); };
    if (system != "pendulum" && system != "bicycle") fail("system must be 'pendulum' or 'bicycle'");
    const std::size_t nx = system == "pendulum" ? 2 : 4;
    const std::size_t nu = system == "pendulum" ? 1 : 2;
    const std::size_t nin = 3;
    if (dt < 0.0) fail("model.dt must be non-negative");
    if (!fit_hyperparameters && lengthscales.size() != nin) fail("gp.lengthscales needs 3 entries");
    if (!(output_scale > 0.0)) fail("gp.output_scale must be positive");
    if (!(noise_std > 0.0)) fail("gp.noise_std must be positive");
    if (data_noise_std && !(*data_noise_std >= 0.0)) fail("grid.noise_std must be non-negative");
    if (!(sqrt_beta > 0.0)) fail("gp.sqrt_beta must be positive");
    if (grid_counts.size() != nin || grid_lower.size() != nin || grid_upper.size() != nin)
        fail("grid.counts, grid.lower and grid.upper need 3 entries");
    for (std::size_t i = 0; i < nin; ++i) {
        if (grid_counts[i] < 1) fail("grid.counts must be >= 1");
        if (grid_lower[i] > grid_upper[i]) fail("grid.lower must not exceed grid.upper");
    }
    if (horizon < 1) fail("ocp.horizon must be >= 1");
    if (samples < 1) fail("ocp.samples must be >= 1");
    if (Q.size() != nx || x_ref.size() != nx || x0.size() != nx) fail("ocp.Q, ocp.x_ref and x0 need n_x entries");
    if (R.size() != nu || u_ref.size() != nu || u_guess.size() != nu)
        fail("ocp.R, ocp.u_ref and ocp.u_guess need n_u entries");
    if (Q_terminal && Q_terminal->size() != nx) fail("ocp.Q_terminal needs n_x entries");
    for (double q : Q)
        if (q < 0.0) fail("ocp.Q must be non-negative");
    for (double r : R)
        if (!(r > 0.0)) fail("ocp.R must be positive");
    if (!(soft_weight > 0.0)) fail("ocp.soft_weight must be positive");
    if (!(qp_tol > 0.0) || qp_max_iter < 1) fail("qp.tol and qp.max_iter must be positive");
    if (max_draws < 1) fail("sampler.max_draws must be >= 1");
    if (!(pivot_tolerance > 0.0) || row_jitter < 0.0) fail("invalid sampler tolerances");
    if (sqp_iterations < 1) fail("mpc.sqp_iterations must be >= 1");
    if (memory_groups < 0 || memory_groups > sqp_iterations) fail("mpc.memory_groups must lie in [0, L]");
    if (steps < 1) fail("mpc.steps must be >= 1");
    if (propagate_iterations < 1) fail("propagate.sqp_iterations must be >= 1");
    if (mc_samples < 1) fail("propagate.mc_samples must be >= 1");
    if (plot_dims.size() != 2) fail("propagate.plot_dims needs two entries");
    for (Index d : plot_dims)
        if (d < 0 || d >= static_cast<Index>(nx)) fail("propagate.plot_dims out of range");
    if (bench_steps < 1) fail("bench.steps must be >= 1");
}

ExperimentConfig parse_config(const std::string& text) {
    std::map<std::string, Entry> entries;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (content.empty()) continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
        const std::string key = trim(content.substr(0, eq));
        const std::string value = trim(content.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(line) + ": empty key or value");
        if (entries.count(key))
            throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
        entries[key] = {value, line};
    }

    ExperimentConfig c;
    Reader r(std::move(entries));
    r.read("system", [&](const std::string& v) { c.system = v; });
    r.read("seed", [&](const std::string& v) { c.seed = to_unsigned(v); });
    r.read("output_dir", [&](const std::string& v) { c.output_dir = v; });
    r.read("model.dt", [&](const std::string& v) { c.dt = to_double(v); });
    r.read("model.wide_angle_box", [&](const std::string& v) { c.wide_angle_box = to_bool(v); });
    r.read("model.obstacles", [&](const std::string& v) {
        if (v == "none") return;
        for (const auto& item : split(v, ';')) {
            const auto xy = to_doubles(item);
            if (xy.size() != 2) throw ConfigError("obstacles are 'x, y' pairs separated by ';'");
            c.obstacles.emplace_back(xy[0], xy[1]);
        }
    });
    r.read("gp.fit", [&](const std::string& v) { c.fit_hyperparameters = to_bool(v); });
    r.read("gp.lengthscales", [&](const std::string& v) { c.lengthscales = to_doubles(v); });
    r.read("gp.output_scale", [&](const std::string& v) { c.output_scale = to_double(v); });
    r.read("gp.noise_std", [&](const std::string& v) { c.noise_std = to_double(v); });
    r.read("gp.sqrt_beta", [&](const std::string& v) { c.sqrt_beta = to_double(v); });
    r.read("grid.counts", [&](const std::string& v) { c.grid_counts = to_indices(v); });
    r.read("grid.lower", [&](const std::string& v) { c.grid_lower = to_doubles(v); });
    r.read("grid.upper", [&](const std::string& v) { c.grid_upper = to_doubles(v); });
    r.read("grid.noise_std", [&](const std::string& v) { c.data_noise_std = to_double(v); });
    r.read("grid.gradients", [&](const std::string& v) { c.grid_gradients = to_bool(v); });
    r.read("ocp.horizon", [&](const std::string& v) { c.horizon = static_cast<Index>(to_integer(v)); });
    r.read("ocp.samples", [&](const std::string& v) { c.samples = static_cast<Index>(to_integer(v)); });
    r.read("ocp.Q", [&](const std::string& v) { c.Q = to_doubles(v); });
    r.read("ocp.R", [&](const std::string& v) { c.R = to_doubles(v); });
    r.read("ocp.Q_terminal", [&](const std::string& v) { c.Q_terminal = to_doubles(v); });
    r.read("ocp.x_ref", [&](const std::string& v) { c.x_ref = to_doubles(v); });
    r.read("ocp.u_ref", [&](const std::string& v) { c.u_ref = to_doubles(v); });
    r.read("ocp.x0", [&](const std::string& v) { c.x0 = to_doubles(v); });
    r.read("ocp.u_guess", [&](const std::string& v) { c.u_guess = to_doubles(v); });
    r.read("ocp.soft_constraints", [&](const std::string& v) { c.soft_constraints = to_bool(v); });
    r.read("ocp.soft_weight", [&](const std::string& v) { c.soft_weight = to_double(v); });
    r.read("ocp.sparse_qp", [&](const std::string& v) { c.sparse_qp = to_bool(v); });
    r.read("qp.tol", [&](const std::string& v) { c.qp_tol = to_double(v); });
    r.read("qp.max_iter", [&](const std::string& v) { c.qp_max_iter = static_cast<int>(to_integer(v)); });
    r.read("sampler.truncate", [&](const std::string& v) { c.truncate = to_bool(v); });
    r.read("sampler.max_draws", [&](const std::string& v) { c.max_draws = static_cast<int>(to_integer(v)); });
    r.read("sampler.pivot_tolerance", [&](const std::string& v) { c.pivot_tolerance = to_double(v); });
    r.read("sampler.row_jitter", [&](const std::string& v) { c.row_jitter = to_double(v); });
    r.read("mpc.sqp_iterations", [&](const std::string& v) { c.sqp_iterations = static_cast<int>(to_integer(v)); });
    r.read("mpc.memory_groups", [&](const std::string& v) { c.memory_groups = static_cast<Index>(to_integer(v)); });
    r.read("mpc.steps", [&](const std::string& v) { c.steps = static_cast<Index>(to_integer(v)); });
    r.read("mpc.apply_after_last_feedback",
           [&](const std::string& v) { c.apply_after_last_feedback = to_bool(v); });
    r.read("propagate.sqp_iterations",
           [&](const std::string& v) { c.propagate_iterations = static_cast<int>(to_integer(v)); });
    r.read("propagate.mc_samples", [&](const std::string& v) { c.mc_samples = static_cast<Index>(to_integer(v)); });
    r.read("propagate.plot_dims", [&](const std::string& v) { c.plot_dims = to_indices(v); });
    r.read("bench.steps", [&](const std::string& v) { c.bench_steps = static_cast<Index>(to_integer(v)); });
    r.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

}  // namespace sgpmpc
