#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "probctl/mixture.hpp"
#include "probctl/models.hpp"

namespace probctl {

/// Weights of the performance index J = R Var(e) + M Mean(e)^2 + Q u^2.
struct CostWeights {
    double variance_weight = 0.4; // R
    double mean_weight = 1.0;     // M
    double control_weight = 1e-3; // Q, must stay positive for the recursive law
};

inline double cost(const MixtureParams& error_p, double u, const CostWeights& w) {
    const Moments m = moments(error_p);
    return w.variance_weight * m.variance + w.mean_weight * m.mean * m.mean +
           w.control_weight * u * u;
}

/// phi(chi, u) = d(R Var + M Mean^2)/du of the tracking-error density, via the
/// exact chain rule through the mixture head. The stationarity condition for
/// the optimal control is phi + 2 Q u = 0.
inline double phi(const ForwardModel& fm, const StateVector& z, double u, double y_d,
                  const CostWeights& w) {
    const int n = fm.head.n_kernels;
    const Eigen::VectorXd x = model_input(z, u);
    const int u_idx = static_cast<int>(x.size()) - 1;
    const Eigen::VectorXd raw = fm.net.forward(x);
    if (!raw.allFinite()) throw std::runtime_error("phi: non-finite forward-model output");

    // d raw_j / du, one backward pass per raw output
    Eigen::VectorXd draw(3 * n);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(3 * n);
    for (int j = 0; j < 3 * n; ++j) {
        unit[j] = 1.0;
        draw[j] = fm.net.grad_input(x, unit)[u_idx];
        unit[j] = 0.0;
    }
    if (!draw.allFinite()) throw std::runtime_error("phi: non-finite input gradient");

    const MixtureParams p = to_params(fm.head, raw);
    const Eigen::VectorXd& alpha = p.priors;

    // chain through softmax / exp links
    const double mean_dlogit = alpha.dot(draw.head(n));
    Eigen::VectorXd dalpha(n), dvar(n), dl(n), ell(n);
    for (int i = 0; i < n; ++i) {
        dalpha[i] = alpha[i] * (draw[i] - mean_dlogit);
        const bool clamped = std::exp(raw[2 * n + i]) < fm.head.variance_floor;
        dvar[i] = clamped ? 0.0 : p.variances[i] * draw[2 * n + i];
        dl[i] = draw[n + i];            // d ell_i/du = d mu_i/du
        ell[i] = p.means[i] - y_d;      // tracking-error kernel centres
    }
    const double ell_bar = alpha.dot(ell);
    const double dell_bar = dalpha.dot(ell) + alpha.dot(dl);

    double var_term = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dev = ell[i] - ell_bar;
        var_term += dalpha[i] * (p.variances[i] + dev * dev) +
                    alpha[i] * (dvar[i] + 2.0 * dev * (dl[i] - dell_bar));
    }
    const double mean_term = 2.0 * ell_bar * dell_bar;
    return w.variance_weight * var_term + w.mean_weight * mean_term;
}

/// phi as a function of the augmented state chi = (z, y_d).
inline double phi_chi(const ForwardModel& fm, const Eigen::VectorXd& chi, double u,
                      const CostWeights& w, int n_lags, int m_lags) {
    const StateVector z = StateVector::from_chi(chi, n_lags, m_lags);
    return phi(fm, z, u, chi[n_lags + m_lags], w);
}

using PhiFn = std::function<double(const Eigen::VectorXd& chi, double u)>;

struct ControlUpdate {
    double u = 0.0;
    bool guard_ok = true; // false when |2Q + dphi/du| fell below the guard
};

/// Denominator guard for the recursive law and for B_k.
inline constexpr double denominator_guard = 1e-8;
/// Finite-difference step for the phi Jacobians; inputs are O(1) here.
inline constexpr double phi_fd_step = 1e-5;

struct PhiJacobian {
    Eigen::VectorXd dphi_dchi;
    double dphi_du = 0.0;
};

inline PhiJacobian phi_jacobian(const PhiFn& phi_fn, const Eigen::VectorXd& chi, double u) {
    const double h = phi_fd_step;
    PhiJacobian j;
    j.dphi_dchi.resize(chi.size());
    Eigen::VectorXd probe = chi;
    for (Eigen::Index i = 0; i < chi.size(); ++i) {
        probe[i] = chi[i] + h;
        const double hi = phi_fn(probe, u);
        probe[i] = chi[i] - h;
        const double lo = phi_fn(probe, u);
        probe[i] = chi[i];
        j.dphi_dchi[i] = (hi - lo) / (2.0 * h);
    }
    j.dphi_du = (phi_fn(chi, u + h) - phi_fn(chi, u - h)) / (2.0 * h);
    return j;
}

/// First-order recursive update of the optimal control:
///   u_k = u_{k-1} - [dphi/dchi / (2Q + dphi/du)] (chi_k - chi_{k-1}),
/// with Jacobians evaluated at the previous operating point. If the
/// denominator is within the guard of zero the previous control is held.
inline ControlUpdate recursive_update(const PhiFn& phi_fn, double u_prev,
                                      const Eigen::VectorXd& chi_prev,
                                      const Eigen::VectorXd& chi_now, double control_weight) {
    const PhiJacobian j = phi_jacobian(phi_fn, chi_prev, u_prev);
    const double denom = 2.0 * control_weight + j.dphi_du;
    if (std::abs(denom) <= denominator_guard) return {u_prev, false};
    return {u_prev - j.dphi_dchi.dot(chi_now - chi_prev) / denom, true};
}

inline ControlUpdate recursive_u(double u_prev, const Eigen::VectorXd& chi_prev,
                                 const Eigen::VectorXd& chi_now, const ForwardModel& fm,
                                 const CostWeights& w, int n_lags, int m_lags) {
    const PhiFn fn = [&](const Eigen::VectorXd& chi, double u) {
        return phi_chi(fm, chi, u, w, n_lags, m_lags);
    };
    return recursive_update(fn, u_prev, chi_prev, chi_now, w.control_weight);
}

/// Scalar minimizer of the performance index over [u_lo, u_hi]: coarse grid
/// (41 points) then golden-section refinement inside the bracketing cell.
/// Used for pretraining targets and as a cross-check on the recursive law.
inline double solve_u_direct(const ForwardModel& fm, const StateVector& z, double y_d,
                             const CostWeights& w, double u_lo, double u_hi) {
    if (!(u_lo < u_hi)) throw std::invalid_argument("solve_u_direct: invalid bounds");
    const auto j_of = [&](double u) { return cost(error_pdf(output_pdf(fm, z, u), y_d), u, w); };

    constexpr int grid_points = 41;
    int best = 0;
    double best_j = std::numeric_limits<double>::infinity();
    const double step = (u_hi - u_lo) / (grid_points - 1);
    for (int i = 0; i < grid_points; ++i) {
        const double j = j_of(u_lo + i * step);
        if (j < best_j) {
            best_j = j;
            best = i;
        }
    }
    double a = u_lo + std::max(0, best - 1) * step;
    double b = u_lo + std::min(grid_points - 1, best + 1) * step;

    constexpr double inv_phi_ratio = 0.6180339887498949; // (sqrt(5)-1)/2
    double x1 = b - inv_phi_ratio * (b - a);
    double x2 = a + inv_phi_ratio * (b - a);
    double f1 = j_of(x1);
    double f2 = j_of(x2);
    while (b - a > 1e-9) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi_ratio * (b - a);
            f1 = j_of(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi_ratio * (b - a);
            f2 = j_of(x2);
        }
    }
    return 0.5 * (a + b);
}

} // namespace probctl
