#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <optional>

#include "probctl/control.hpp"
#include "probctl/models.hpp"

namespace probctl {

/// Local linearization of the learned plant surrogate (the forward-model
/// mixture mean) around an operating point.
struct Linearization {
    Eigen::VectorXd df_dy; // d f / d y_{k-i}, i = 1..n
    Eigen::VectorXd df_du; // d f / d u_{k-j}, j = 0..m (index 0 = current u)
};

struct StabilityReport {
    Eigen::VectorXd b_row;            // B_k, dimension n+m+1
    Eigen::VectorXd poly_coeffs;      // a^1..a^{n+m} of N(z^-1) = 1 - sum a^i z^-i
    Eigen::MatrixXd companion;        // (n+m) x (n+m)
    Eigen::VectorXcd eigenvalues;
    double spectral_norm = std::numeric_limits<double>::quiet_NaN();
    double spectral_radius = std::numeric_limits<double>::quiet_NaN();
    bool stable = false;              // spectral norm < 1 (sufficient condition)
    bool indeterminate = false;       // denominator guard fired; values unreliable
};

inline constexpr double linearize_fd_step = 1e-4;

/// Central finite differences of the mixture mean with respect to every
/// regressor entry and the current control.
inline Linearization linearize(const ForwardModel& fm, const StateVector& z, double u) {
    const int n = z.n();
    const int m = z.m();
    const double h = linearize_fd_step;
    const Eigen::VectorXd x0 = model_input(z, u);
    const auto mean_at = [&](const Eigen::VectorXd& x) {
        const MixtureParams p = to_params(fm.head, fm.net.forward(x));
        return moments(p).mean;
    };
    Eigen::VectorXd d(x0.size());
    Eigen::VectorXd x = x0;
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        x[i] = x0[i] + h;
        const double hi = mean_at(x);
        x[i] = x0[i] - h;
        const double lo = mean_at(x);
        x[i] = x0[i];
        d[i] = (hi - lo) / (2.0 * h);
        if (!std::isfinite(d[i])) throw std::runtime_error("linearize: non-finite model output");
    }
    Linearization lin;
    lin.df_dy = d.head(n);
    lin.df_du.resize(m + 1);
    lin.df_du[0] = d[n + m];                          // current control
    for (int j = 1; j <= m; ++j) lin.df_du[j] = d[n + j - 1]; // lagged controls
    return lin;
}

/// B_k = -dphi/dchi / (2Q + dphi/du). Empty when the guard fires.
inline std::optional<Eigen::VectorXd> compute_b_row(const Eigen::VectorXd& dphi_dchi,
                                                    double dphi_du, double control_weight) {
    const double denom = 2.0 * control_weight + dphi_du;
    if (std::abs(denom) <= denominator_guard) return std::nullopt;
    return Eigen::VectorXd(-dphi_dchi / denom);
}

/// Expands the closed-loop polynomial
///   N(z^-1) = 1 - sum_j B^{n+j} z^-j - sum_i f_y^i z^-i
///             + (sum_i f_y^i z^-i)(sum_j B^{n+j} z^-j)
///             - (sum_j f_u^j z^-j)(sum_i B^i z^-i)
/// and returns a^1..a^{n+m} with N = 1 - sum a^i z^-i.
inline Eigen::VectorXd closed_loop_poly(const Linearization& lin, const Eigen::VectorXd& b_row) {
    const int n = static_cast<int>(lin.df_dy.size());
    const int m = static_cast<int>(lin.df_du.size()) - 1;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n + m + 1); // coefficients of z^-i, i = 0..n+m
    c[0] = 1.0;
    for (int j = 1; j <= m; ++j) c[j] -= b_row[n + j - 1];
    for (int i = 1; i <= n; ++i) c[i] -= lin.df_dy[i - 1];
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= m; ++j) c[i + j] += lin.df_dy[i - 1] * b_row[n + j - 1];
    for (int j = 0; j <= m; ++j)
        for (int i = 1; i <= n; ++i) c[j + i] -= lin.df_du[j] * b_row[i - 1];
    return -c.tail(n + m); // a^i = -c_i
}

/// Builds the companion matrix of N(z^-1,k) (ones on the superdiagonal,
/// [a^{n+m} ... a^1] in the last row) and evaluates the norm condition.
inline StabilityReport stability_check(const Eigen::VectorXd& coeffs) {
    const int d = static_cast<int>(coeffs.size());
    StabilityReport rep;
    rep.poly_coeffs = coeffs;
    rep.companion = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i + 1 < d; ++i) rep.companion(i, i + 1) = 1.0;
    for (int i = 0; i < d; ++i) rep.companion(d - 1, i) = coeffs[d - 1 - i];
    rep.spectral_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(rep.companion).singularValues()(0);
    Eigen::EigenSolver<Eigen::MatrixXd> es(rep.companion, /*computeEigenvectors=*/false);
    rep.eigenvalues = es.eigenvalues();
    rep.spectral_radius = rep.eigenvalues.cwiseAbs().maxCoeff();
    rep.stable = rep.spectral_norm < 1.0;
    return rep;
}

/// Assembles a full report at an operating point (chi, u): phi Jacobians,
/// B_k, linearization, closed-loop polynomial, norm test. Read-only with
/// respect to the models.
inline StabilityReport monitor(const ForwardModel& fm, const StateVector& z, double u, double y_d,
                               const CostWeights& w) {
    const int n = z.n();
    const int m = z.m();
    const PhiFn fn = [&](const Eigen::VectorXd& chi, double uu) {
        return phi_chi(fm, chi, uu, w, n, m);
    };
    const PhiJacobian j = phi_jacobian(fn, z.chi(y_d), u);
    const auto b = compute_b_row(j.dphi_dchi, j.dphi_du, w.control_weight);
    if (!b) {
        StabilityReport rep;
        rep.indeterminate = true;
        return rep;
    }
    const Linearization lin = linearize(fm, z, u);
    StabilityReport rep = stability_check(closed_loop_poly(lin, *b));
    rep.b_row = *b;
    return rep;
}

} // namespace probctl
