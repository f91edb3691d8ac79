#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <vector>

#include "probctl/mixture.hpp"
#include "probctl/network.hpp"
#include "probctl/scg.hpp"

namespace probctl {

/// Regressor of lagged outputs y_{k-1..k-n} and lagged controls u_{k-1..k-m}.
struct StateVector {
    Eigen::VectorXd y_lags;
    Eigen::VectorXd u_lags;

    int n() const { return static_cast<int>(y_lags.size()); }
    int m() const { return static_cast<int>(u_lags.size()); }

    Eigen::VectorXd regressor() const {
        Eigen::VectorXd z(n() + m());
        z << y_lags, u_lags;
        return z;
    }

    /// chi = (z, y_d), the augmented state of the control law.
    Eigen::VectorXd chi(double y_d) const {
        Eigen::VectorXd c(n() + m() + 1);
        c << y_lags, u_lags, y_d;
        return c;
    }

    static StateVector from_chi(const Eigen::VectorXd& chi, int n, int m) {
        if (chi.size() != n + m + 1)
            throw std::invalid_argument("StateVector: chi dimension mismatch");
        StateVector z;
        z.y_lags = chi.head(n);
        z.u_lags = chi.segment(n, m);
        return z;
    }
};

/// MDN over the next plant output, conditioned on (z, u).
struct ForwardModel {
    Network net;
    MdnHead head;

    int input_size() const { return net.input_size(); }
};

/// Controller head: 2N raw outputs (means, log-variances). It has no prior
/// logits of its own; priors are always injected from the forward model.
struct CtrlHead {
    int n_kernels = 2;
    double variance_floor = 1e-6;

    int raw_size() const { return 2 * n_kernels; }
};

/// MDN over the control input, conditioned on (z, y_d), with tied priors.
struct InverseController {
    Network net;
    CtrlHead head;

    int input_size() const { return net.input_size(); }
};

inline ForwardModel make_forward_model(int n_lags, int m_lags, const std::vector<int>& hidden,
                                       int kernels, double variance_floor, Rng& rng) {
    std::vector<int> sizes;
    sizes.push_back(n_lags + m_lags + 1);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(3 * kernels);
    return ForwardModel{Network::random_init(sizes, rng), MdnHead{kernels, variance_floor}};
}

inline InverseController make_inverse_controller(int n_lags, int m_lags, const std::vector<int>& hidden,
                                                 int kernels, double variance_floor, Rng& rng) {
    std::vector<int> sizes;
    sizes.push_back(n_lags + m_lags + 1);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(2 * kernels);
    return InverseController{Network::random_init(sizes, rng), CtrlHead{kernels, variance_floor}};
}

inline Eigen::VectorXd model_input(const StateVector& z, double last) {
    Eigen::VectorXd x(z.n() + z.m() + 1);
    x << z.y_lags, z.u_lags, last;
    return x;
}

/// Predictive density of the next output at (z, u).
inline MixtureParams output_pdf(const ForwardModel& fm, const StateVector& z, double u) {
    return to_params(fm.head, fm.net.forward(model_input(z, u)));
}

/// Tracking-error density: same priors and variances, means shifted by -y_d.
inline MixtureParams error_pdf(MixtureParams p, double y_d) {
    p.means.array() -= y_d;
    return p;
}

inline MixtureParams control_params(const CtrlHead& head, const Eigen::VectorXd& raw,
                                    const Eigen::VectorXd& tied_priors) {
    const int n = head.n_kernels;
    if (raw.size() != head.raw_size())
        throw std::invalid_argument("CtrlHead: raw output size mismatch");
    if (tied_priors.size() != n)
        throw std::invalid_argument("CtrlHead: tied prior count mismatch");
    if ((tied_priors.array() < 0.0).any() || std::abs(tied_priors.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("CtrlHead: tied priors must lie on the simplex");
    MixtureParams p;
    p.priors = tied_priors; // passed through exactly, never renormalized
    p.means = raw.head(n);
    p.variances = raw.tail(n).array().exp().max(head.variance_floor).matrix();
    return p;
}

/// Density over the control input at (z, y_d), with priors taken verbatim
/// from the forward model.
inline MixtureParams control_pdf(const InverseController& ic, const StateVector& z, double y_d,
                                 const Eigen::VectorXd& tied_priors) {
    return control_params(ic.head, ic.net.forward(model_input(z, y_d)), tied_priors);
}

/// Gradient of -ln control density wrt the 2N raw controller outputs. Tied
/// priors are inputs, not parameters, so no logit term exists; a zero-prior
/// kernel has zero responsibility and receives no error signal.
inline Eigen::VectorXd ctrl_nll_grad_raw(const CtrlHead& head, const Eigen::VectorXd& raw,
                                         const Eigen::VectorXd& tied_priors, double u_target) {
    const int n = head.n_kernels;
    const MixtureParams p = control_params(head, raw, tied_priors);
    const Eigen::VectorXd pi = responsibilities(p, u_target);
    Eigen::VectorXd g(head.raw_size());
    for (int i = 0; i < n; ++i) {
        const double v = p.variances[i];
        const double d = u_target - p.means[i];
        g[i] = pi[i] * (p.means[i] - u_target) / v;
        const bool clamped = std::exp(raw[n + i]) < head.variance_floor;
        g[n + i] = clamped ? 0.0 : 0.5 * pi[i] * (1.0 - d * d / v);
    }
    return g;
}

/// One observation for forward-model training.
struct Sample {
    Eigen::VectorXd z; // regressor
    double u = 0.0;    // applied control
    double y = 0.0;    // observed next output
};

/// One observation for controller training. `tied_priors` are the forward
/// model's priors at the (z, u) this sample is paired with.
struct CtrlSample {
    Eigen::VectorXd z;
    double y_d = 0.0;
    double u_target = 0.0;
    Eigen::VectorXd tied_priors;
};

/// Mean NLL objective over a batch for the forward model.
inline Objective forward_nll_objective(ForwardModel& fm, std::span<const Sample> batch) {
    return [&fm, batch](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
        fm.net.params() = p;
        double loss = 0.0;
        if (grad) grad->setZero(p.size());
        for (const Sample& s : batch) {
            Eigen::VectorXd x(s.z.size() + 1);
            x << s.z, s.u;
            const Eigen::VectorXd raw = fm.net.forward(x);
            loss += nll(to_params(fm.head, raw), s.y);
            if (grad) *grad += fm.net.grad_params(x, nll_grad_raw(fm.head, raw, s.y));
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        if (grad) *grad *= inv;
        return loss * inv;
    };
}

inline Objective controller_nll_objective(InverseController& ic, std::span<const CtrlSample> batch) {
    return [&ic, batch](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
        ic.net.params() = p;
        double loss = 0.0;
        if (grad) grad->setZero(p.size());
        for (const CtrlSample& s : batch) {
            Eigen::VectorXd x(s.z.size() + 1);
            x << s.z, s.y_d;
            const Eigen::VectorXd raw = ic.net.forward(x);
            loss += nll(control_params(ic.head, raw, s.tied_priors), s.u_target);
            if (grad)
                *grad += ic.net.grad_params(x, ctrl_nll_grad_raw(ic.head, raw, s.tied_priors, s.u_target));
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        if (grad) *grad *= inv;
        return loss * inv;
    };
}

/// SCG step(s) on the batch NLL; returns the post-step loss. On divergence
/// the optimizer restores the previous parameters.
inline double train_forward(ForwardModel& fm, ScgState& st, std::span<const Sample> batch,
                            int max_iterations = 1) {
    if (batch.empty()) throw std::invalid_argument("train_forward: empty batch");
    Eigen::VectorXd p = fm.net.params();
    const ScgResult r = scg_minimize(p, forward_nll_objective(fm, batch), st, max_iterations);
    fm.net.params() = p; // objective leaves the net at its last evaluation point
    return r.final_loss;
}

inline double train_controller(InverseController& ic, ScgState& st, std::span<const CtrlSample> batch,
                               int max_iterations = 1) {
    if (batch.empty()) throw std::invalid_argument("train_controller: empty batch");
    Eigen::VectorXd p = ic.net.params();
    const ScgResult r = scg_minimize(p, controller_nll_objective(ic, batch), st, max_iterations);
    ic.net.params() = p; // objective leaves the net at its last evaluation point
    return r.final_loss;
}

/// Single-sample conveniences.
inline double train_forward(ForwardModel& fm, ScgState& st, const StateVector& z, double u, double y,
                            int max_iterations = 1) {
    const Sample s{z.regressor(), u, y};
    return train_forward(fm, st, std::span<const Sample>(&s, 1), max_iterations);
}

inline double train_controller(InverseController& ic, ScgState& st, const StateVector& z, double y_d,
                               double u_target, const Eigen::VectorXd& tied_priors,
                               int max_iterations = 1) {
    const CtrlSample s{z.regressor(), y_d, u_target, tied_priors};
    return train_controller(ic, st, std::span<const CtrlSample>(&s, 1), max_iterations);
}

} // namespace probctl
