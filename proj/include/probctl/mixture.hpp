#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "probctl/rng.hpp"

namespace probctl {

inline constexpr double two_pi = 6.283185307179586476925286766559;

/// Finite stand-in for -log(0); returned when the density underflows past
/// what log-sum-exp stabilization can represent.
inline constexpr double nll_underflow_penalty = 1e30;

/// One-dimensional Gaussian mixture: the shared currency of the output pdf,
/// the tracking-error pdf, and the controller pdf.
struct MixtureParams {
    Eigen::VectorXd priors;     // alpha_i, on the simplex
    Eigen::VectorXd means;      // mu_i
    Eigen::VectorXd variances;  // sigma^2_i, >= floor

    int size() const { return static_cast<int>(priors.size()); }
};

inline void validate(const MixtureParams& p) {
    if (p.size() == 0 || p.means.size() != p.size() || p.variances.size() != p.size())
        throw std::invalid_argument("MixtureParams: inconsistent component counts");
    if ((p.priors.array() < 0.0).any())
        throw std::invalid_argument("MixtureParams: negative prior");
    if (std::abs(p.priors.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("MixtureParams: priors do not sum to 1");
    if ((p.variances.array() <= 0.0).any())
        throw std::invalid_argument("MixtureParams: non-positive variance");
}

/// Maps the 3N raw network outputs [prior logits | means | log-variances]
/// onto constrained mixture parameters.
struct MdnHead {
    int n_kernels = 2;
    double variance_floor = 1e-6;

    int raw_size() const { return 3 * n_kernels; }
};

inline MixtureParams to_params(const MdnHead& head, const Eigen::VectorXd& raw) {
    const int n = head.n_kernels;
    if (raw.size() != head.raw_size())
        throw std::invalid_argument("MdnHead: raw output size mismatch");
    if (!raw.allFinite())
        throw std::invalid_argument("MdnHead: non-finite raw outputs");
    MixtureParams p;
    const Eigen::ArrayXd logits = raw.head(n).array();
    const Eigen::ArrayXd shifted = (logits - logits.maxCoeff()).exp();
    p.priors = (shifted / shifted.sum()).matrix();
    p.means = raw.segment(n, n);
    p.variances = raw.tail(n).array().exp().max(head.variance_floor).matrix();
    return p;
}

/// Mixture density at t with the standard 1/sqrt(2 pi sigma^2) normalizer.
inline double density(const MixtureParams& p, double t) {
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        const double v = p.variances[i];
        const double d = t - p.means[i];
        acc += p.priors[i] * std::exp(-0.5 * d * d / v) / std::sqrt(two_pi * v);
    }
    return acc;
}

/// -ln density(p, t) via log-sum-exp. Components with zero prior contribute
/// nothing; a value that still underflows maps to nll_underflow_penalty.
inline double nll(const MixtureParams& p, double t) {
    const int n = p.size();
    double max_term = -std::numeric_limits<double>::infinity();
    Eigen::ArrayXd log_terms(n);
    for (int i = 0; i < n; ++i) {
        if (p.priors[i] <= 0.0) {
            log_terms[i] = -std::numeric_limits<double>::infinity();
            continue;
        }
        const double v = p.variances[i];
        const double d = t - p.means[i];
        log_terms[i] = std::log(p.priors[i]) - 0.5 * std::log(two_pi * v) - 0.5 * d * d / v;
        max_term = std::max(max_term, log_terms[i]);
    }
    if (!std::isfinite(max_term)) return nll_underflow_penalty;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        if (std::isfinite(log_terms[i])) sum += std::exp(log_terms[i] - max_term);
    const double value = -(max_term + std::log(sum));
    return std::isfinite(value) ? value : nll_underflow_penalty;
}

/// Posterior responsibilities pi_i = alpha_i phi_i / sum_l alpha_l phi_l,
/// computed in log space.
inline Eigen::VectorXd responsibilities(const MixtureParams& p, double t) {
    const int n = p.size();
    Eigen::ArrayXd log_terms(n);
    double max_term = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        if (p.priors[i] <= 0.0) {
            log_terms[i] = -std::numeric_limits<double>::infinity();
            continue;
        }
        const double v = p.variances[i];
        const double d = t - p.means[i];
        log_terms[i] = std::log(p.priors[i]) - 0.5 * std::log(v) - 0.5 * d * d / v;
        max_term = std::max(max_term, log_terms[i]);
    }
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
    if (!std::isfinite(max_term)) return pi; // degenerate; caller guards
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        if (std::isfinite(log_terms[i])) {
            pi[i] = std::exp(log_terms[i] - max_term);
            sum += pi[i];
        }
    }
    return pi / sum;
}

/// Exact gradient of nll(to_params(head, raw), t) with respect to the raw
/// network outputs: logits get alpha_i - pi_i, means pi_i (mu_i - t)/sigma^2_i,
/// log-variances pi_i (1 - (t - mu_i)^2 / sigma^2_i)/2 (zero where the
/// variance floor clamps).
inline Eigen::VectorXd nll_grad_raw(const MdnHead& head, const Eigen::VectorXd& raw, double t) {
    const int n = head.n_kernels;
    const MixtureParams p = to_params(head, raw);
    const Eigen::VectorXd pi = responsibilities(p, t);
    Eigen::VectorXd g(head.raw_size());
    for (int i = 0; i < n; ++i) {
        const double v = p.variances[i];
        const double d = t - p.means[i];
        g[i] = p.priors[i] - pi[i];
        g[n + i] = pi[i] * (p.means[i] - t) / v;
        const bool clamped = std::exp(raw[2 * n + i]) < head.variance_floor;
        g[2 * n + i] = clamped ? 0.0 : 0.5 * pi[i] * (1.0 - d * d / v);
    }
    return g;
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

inline Moments moments(const MixtureParams& p) {
    Moments m;
    m.mean = p.priors.dot(p.means);
    for (int i = 0; i < p.size(); ++i) {
        const double d = p.means[i] - m.mean;
        m.variance += p.priors[i] * (p.variances[i] + d * d);
    }
    return m;
}

/// Mean of the highest-prior kernel; ties resolve to the lowest index.
inline double most_probable(const MixtureParams& p) {
    int best = 0;
    for (int i = 1; i < p.size(); ++i)
        if (p.priors[i] > p.priors[best]) best = i;
    return p.means[best];
}

/// Draws component index i ~ priors, then N(mu_i, sigma^2_i).
inline double sample(const MixtureParams& p, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    int pick = p.size() - 1;
    for (int i = 0; i < p.size(); ++i) {
        cum += p.priors[i];
        if (u < cum) {
            pick = i;
            break;
        }
    }
    return rng.normal(p.means[pick], std::sqrt(p.variances[pick]));
}

} // namespace probctl
