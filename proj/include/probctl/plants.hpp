#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "probctl/mixture.hpp"
#include "probctl/rng.hpp"

namespace probctl {

/// Two-component (or general) Gaussian noise source.
struct NoiseMixture {
    Eigen::VectorXd weights;
    Eigen::VectorXd means;
    Eigen::VectorXd variances;

    MixtureParams as_mixture() const { return MixtureParams{weights, means, variances}; }

    double mean() const { return weights.dot(means); }

    double stddev() const {
        const Moments m = moments(as_mixture());
        return std::sqrt(m.variance);
    }
};

inline double noise_sample(const NoiseMixture& nm, Rng& rng) {
    return sample(nm.as_mixture(), rng);
}

/// Benchmark 1 noise: components N(1, 0.02) and N(0, 0.001).
inline NoiseMixture benchmark1_noise(const Eigen::VectorXd& weights) {
    NoiseMixture nm;
    nm.weights = weights;
    nm.means = Eigen::Vector2d(1.0, 0.0);
    nm.variances = Eigen::Vector2d(0.02, 0.001);
    return nm;
}

/// Benchmark 2 noise: components N(0.5, 0.002) and N(0, 0.001).
inline NoiseMixture benchmark2_noise(const Eigen::VectorXd& weights) {
    NoiseMixture nm;
    nm.weights = weights;
    nm.means = Eigen::Vector2d(0.5, 0.0);
    nm.variances = Eigen::Vector2d(0.002, 0.001);
    return nm;
}

struct PlantState {
    double y_prev = 0.0;
    double u_prev = 0.0;
    long step = 0;
};

/// y_k = 0.5 - 0.02 y_{k-1} (1.2 + atan u_k) + 0.2 u_k + eps_k  (additive noise).
inline double plant1_output(double y_prev, double u, double eps) {
    return 0.5 - 0.02 * y_prev * (1.2 + std::atan(u)) + 0.2 * u + eps;
}

inline double step_plant1(PlantState& s, double u, double eps) {
    const double y = plant1_output(s.y_prev, u, eps);
    s.y_prev = y;
    s.u_prev = u;
    ++s.step;
    return y;
}

/// y_k = (29/40) eps_k sin((16 u_{k-1} + 8 y_{k-1}) / (3 + 4 u_{k-1}^2 + 4 y_{k-1}^2))
///       + 0.2 (u_{k-1} + y_{k-1})  (multiplicative noise).
inline double plant2_output(double y_prev, double u_prev, double eps) {
    const double arg = (16.0 * u_prev + 8.0 * y_prev) / (3.0 + 4.0 * u_prev * u_prev + 4.0 * y_prev * y_prev);
    return (29.0 / 40.0) * eps * std::sin(arg) + 0.2 * (u_prev + y_prev);
}

inline double step_plant2(PlantState& s, double u_prev, double eps) {
    const double y = plant2_output(s.y_prev, u_prev, eps);
    s.y_prev = y;
    s.u_prev = u_prev;
    ++s.step;
    return y;
}

/// (y_prev, u, eps) -> y. The harness drives either benchmark through this.
using PlantFn = std::function<double(double y_prev, double u, double eps)>;

/// First-order reference model y^d = r_in + c y^d_prev. `input_delay` records
/// whether the driving input is r_k or r_{k-1}; the recurrence itself is the
/// same either way, the delay only shifts which output index a desired value
/// pairs with.
struct ReferenceModel {
    double feedback = 0.25; // |c| < 1
    int input_delay = 0;    // 0 or 1
    double y_d_prev = 0.0;

    double step(double r) {
        const double y_d = r + feedback * y_d_prev;
        y_d_prev = y_d;
        return y_d;
    }
};

enum class RefKind { piecewise, sine, file };

inline RefKind ref_kind_from_string(const std::string& s) {
    if (s == "piecewise") return RefKind::piecewise;
    if (s == "sine") return RefKind::sine;
    if (s == "file") return RefKind::file;
    throw std::invalid_argument("unknown reference kind: " + s);
}

/// Reference-input generator r_k. Kinds: piecewise-constant levels drawn
/// uniformly from [level_lo, level_hi] held for `hold` steps, a sinusoid
/// (amplitude 0.5, period 100), or a fixed sequence from file (one real per
/// line).
class ReferenceInput {
public:
    static ReferenceInput piecewise(double level_lo, double level_hi, int hold, Rng rng) {
        ReferenceInput ri;
        ri.kind_ = RefKind::piecewise;
        ri.lo_ = level_lo;
        ri.hi_ = level_hi;
        ri.hold_ = hold;
        ri.rng_ = rng;
        return ri;
    }

    static ReferenceInput sine(double amplitude = 0.5, int period = 100) {
        ReferenceInput ri;
        ri.kind_ = RefKind::sine;
        ri.amplitude_ = amplitude;
        ri.period_ = period;
        return ri;
    }

    static ReferenceInput from_file(const std::string& path) {
        ReferenceInput ri;
        ri.kind_ = RefKind::file;
        std::ifstream in(path);
        if (!in) throw std::runtime_error("reference file not found: " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            ri.file_values_.push_back(std::stod(line));
        }
        if (ri.file_values_.empty()) throw std::runtime_error("reference file is empty: " + path);
        return ri;
    }

    double next() {
        const long k = k_++;
        switch (kind_) {
        case RefKind::piecewise:
            if (k % hold_ == 0) level_ = rng_.uniform(lo_, hi_);
            return level_;
        case RefKind::sine:
            return amplitude_ * std::sin(two_pi * static_cast<double>(k) / period_);
        case RefKind::file:
            if (static_cast<std::size_t>(k) >= file_values_.size())
                throw std::runtime_error("reference file shorter than run length");
            return file_values_[static_cast<std::size_t>(k)];
        }
        return 0.0;
    }

    std::vector<double> generate(int steps) {
        std::vector<double> out(steps);
        for (int i = 0; i < steps; ++i) out[i] = next();
        return out;
    }

private:
    ReferenceInput() : rng_(0) {}

    RefKind kind_ = RefKind::piecewise;
    double lo_ = -1.0, hi_ = 1.0;
    int hold_ = 50;
    double amplitude_ = 0.5;
    int period_ = 100;
    Rng rng_;
    double level_ = 0.0;
    long k_ = 0;
    std::vector<double> file_values_;
};

} // namespace probctl
