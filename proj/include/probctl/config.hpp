#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace probctl {

/// Everything a pretrain/run/compare invocation needs. Defaults are
/// per-benchmark; a flat key=value file and CLI flags override them.
struct RunConfig {
    int example = 1;    // 1 | 2
    int kernels = 2;    // mixture components N
    int n_lags = 1;
    int m_lags = 0;
    std::vector<int> hidden = {16};

    double weight_variance = 0.4; // R
    double weight_mean = 1.0;     // M
    double weight_control = 1e-3; // Q

    std::vector<double> noise_weights = {0.5, 0.5};

    std::string ref_kind = "piecewise";
    std::string ref_file;
    double ref_level_min = 0.7;
    double ref_level_max = 1.0;
    int ref_hold = 50;
    double sine_amplitude = 0.5;
    int sine_period = 100;

    std::uint64_t seed = 1;
    int pretrain_steps = 2000;
    int pretrain_iterations = 200;
    int online_steps = 500;
    int updates_per_step = 1; // SCG updates per network per control step
    int stability_period = 10;
    int replay = 100;         // online replay-buffer length
    int summary_window = 200;

    double u_min = -5.0;
    double u_max = 5.0;
    double variance_floor = 1e-6;

    double excitation_min = -2.0;
    double excitation_max = 2.0;
    int excitation_hold = 5;

    std::string out_dir = "out";

    void validate() const {
        if (example != 1 && example != 2) throw std::invalid_argument("config: example must be 1 or 2");
        if (kernels <= 0 || n_lags <= 0 || m_lags < 0) throw std::invalid_argument("config: bad model orders");
        if (hidden.empty()) throw std::invalid_argument("config: need at least one hidden layer size");
        for (int h : hidden)
            if (h <= 0) throw std::invalid_argument("config: hidden sizes must be positive");
        if (pretrain_steps <= 0 || online_steps <= 0 || updates_per_step <= 0 ||
            stability_period <= 0 || replay <= 0 || pretrain_iterations <= 0)
            throw std::invalid_argument("config: counts must be positive");
        if (!(u_min < u_max)) throw std::invalid_argument("config: u_min must be < u_max");
        if (weight_control <= 0.0) throw std::invalid_argument("config: weight_control must be positive");
        if (noise_weights.size() != 2) throw std::invalid_argument("config: expected two noise weights");
        if (variance_floor <= 0.0) throw std::invalid_argument("config: variance floor must be positive");
    }
};

/// Benchmark defaults: weights from the two experiments, reference levels
/// chosen so the desired output stays reachable inside the control bounds.
inline RunConfig default_config(int example) {
    RunConfig cfg;
    cfg.example = example;
    if (example == 1) {
        cfg.weight_variance = 0.4;
        cfg.weight_mean = 1.0;
        cfg.weight_control = 0.001;
        cfg.ref_level_min = 0.7;
        cfg.ref_level_max = 1.0;
    } else if (example == 2) {
        cfg.weight_variance = 0.25;
        cfg.weight_mean = 1.0;
        cfg.weight_control = 0.01;
        cfg.ref_level_min = -0.3;
        cfg.ref_level_max = 0.3;
    } else {
        throw std::invalid_argument("default_config: example must be 1 or 2");
    }
    return cfg;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(trim(item)));
    return out;
}

inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(trim(item)));
    return out;
}

} // namespace detail

/// Applies one key=value assignment. Unknown keys are rejected.
inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_double_list;
    using detail::parse_int_list;
    if (key == "example") {
        const int ex = std::stoi(value);
        const RunConfig defaults = default_config(ex);
        cfg.example = ex;
        cfg.weight_variance = defaults.weight_variance;
        cfg.weight_mean = defaults.weight_mean;
        cfg.weight_control = defaults.weight_control;
        cfg.ref_level_min = defaults.ref_level_min;
        cfg.ref_level_max = defaults.ref_level_max;
    } else if (key == "kernels") cfg.kernels = std::stoi(value);
    else if (key == "n_lags") cfg.n_lags = std::stoi(value);
    else if (key == "m_lags") cfg.m_lags = std::stoi(value);
    else if (key == "hidden") cfg.hidden = parse_int_list(value);
    else if (key == "weight_variance") cfg.weight_variance = std::stod(value);
    else if (key == "weight_mean") cfg.weight_mean = std::stod(value);
    else if (key == "weight_control") cfg.weight_control = std::stod(value);
    else if (key == "noise_weights") cfg.noise_weights = parse_double_list(value);
    else if (key == "ref_kind") cfg.ref_kind = value;
    else if (key == "ref_file") cfg.ref_file = value;
    else if (key == "ref_level_min") cfg.ref_level_min = std::stod(value);
    else if (key == "ref_level_max") cfg.ref_level_max = std::stod(value);
    else if (key == "ref_hold") cfg.ref_hold = std::stoi(value);
    else if (key == "sine_amplitude") cfg.sine_amplitude = std::stod(value);
    else if (key == "sine_period") cfg.sine_period = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "pretrain_steps") cfg.pretrain_steps = std::stoi(value);
    else if (key == "pretrain_iterations") cfg.pretrain_iterations = std::stoi(value);
    else if (key == "online_steps") cfg.online_steps = std::stoi(value);
    else if (key == "updates_per_step") cfg.updates_per_step = std::stoi(value);
    else if (key == "stability_period") cfg.stability_period = std::stoi(value);
    else if (key == "replay") cfg.replay = std::stoi(value);
    else if (key == "summary_window") cfg.summary_window = std::stoi(value);
    else if (key == "u_min") cfg.u_min = std::stod(value);
    else if (key == "u_max") cfg.u_max = std::stod(value);
    else if (key == "variance_floor") cfg.variance_floor = std::stod(value);
    else if (key == "excitation_min") cfg.excitation_min = std::stod(value);
    else if (key == "excitation_max") cfg.excitation_max = std::stod(value);
    else if (key == "excitation_hold") cfg.excitation_hold = std::stoi(value);
    else if (key == "out_dir") cfg.out_dir = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

/// Flat key=value file; '#' starts a comment. An `example` line resets the
/// per-benchmark defaults, so it should come before any weight overrides.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config file not found: " + path);
    RunConfig cfg = default_config(1);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
        apply_config_entry(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    // environment override for the output directory
    if (const char* env = std::getenv("PROBCTL_OUT_DIR")) cfg.out_dir = env;
    cfg.validate();
    return cfg;
}

} // namespace probctl
