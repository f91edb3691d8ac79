#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <span>
#include <vector>

#include "probctl/models.hpp"
#include "probctl/network.hpp"
#include "probctl/scg.hpp"

namespace probctl {

/// Comparison controller: a deterministic MLP forward model trained on squared
/// error and a point controller trained by classical indirect adaptive control
/// (squared tracking error plus control energy, chained through the frozen
/// forward model).
struct BaselinePair {
    Network forward_net;    // (z, u) -> y_hat
    Network controller_net; // (z, y_d) -> u
    double control_weight = 1e-3; // Q of the training error
};

inline BaselinePair make_baseline(int n_lags, int m_lags, const std::vector<int>& hidden,
                                  double control_weight, Rng& rng) {
    std::vector<int> sizes;
    sizes.push_back(n_lags + m_lags + 1);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    Network fwd = Network::random_init(sizes, rng);
    Network ctrl = Network::random_init(sizes, rng);
    return BaselinePair{std::move(fwd), std::move(ctrl), control_weight};
}

/// Mean squared prediction error over the batch.
inline Objective baseline_forward_objective(BaselinePair& bp, std::span<const Sample> batch) {
    return [&bp, batch](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
        bp.forward_net.params() = p;
        double loss = 0.0;
        if (grad) grad->setZero(p.size());
        Eigen::VectorXd dl(1);
        for (const Sample& s : batch) {
            Eigen::VectorXd x(s.z.size() + 1);
            x << s.z, s.u;
            const double resid = bp.forward_net.forward(x)[0] - s.y;
            loss += resid * resid;
            if (grad) {
                dl[0] = 2.0 * resid;
                *grad += bp.forward_net.grad_params(x, dl);
            }
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        if (grad) *grad *= inv;
        return loss * inv;
    };
}

inline double baseline_train_forward(BaselinePair& bp, ScgState& st, std::span<const Sample> batch,
                                     int max_iterations = 1) {
    if (batch.empty()) throw std::invalid_argument("baseline_train_forward: empty batch");
    Eigen::VectorXd p = bp.forward_net.params();
    const ScgResult r = scg_minimize(p, baseline_forward_objective(bp, batch), st, max_iterations);
    bp.forward_net.params() = p;
    return r.final_loss;
}

struct BaselineCtrlSample {
    Eigen::VectorXd z;
    double y_d = 0.0;
};

/// Mean of e^t = (y_hat - y_d)^2 + Q u^2 over the batch, with u produced by
/// the controller and y_hat by the frozen forward model. The gradient reaches
/// the controller parameters through de^t/du = 2 (y_hat - y_d) dy_hat/du + 2 Q u.
inline Objective baseline_controller_objective(BaselinePair& bp,
                                               std::span<const BaselineCtrlSample> batch) {
    return [&bp, batch](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
        bp.controller_net.params() = p;
        double loss = 0.0;
        if (grad) grad->setZero(p.size());
        const Eigen::VectorXd unit = Eigen::VectorXd::Ones(1);
        Eigen::VectorXd dl(1);
        for (const BaselineCtrlSample& s : batch) {
            Eigen::VectorXd xc(s.z.size() + 1);
            xc << s.z, s.y_d;
            const double u = bp.controller_net.forward(xc)[0];
            Eigen::VectorXd xf(s.z.size() + 1);
            xf << s.z, u;
            const double y_hat = bp.forward_net.forward(xf)[0];
            const double err = y_hat - s.y_d;
            loss += err * err + bp.control_weight * u * u;
            if (grad) {
                const double dy_du = bp.forward_net.grad_input(xf, unit)[xf.size() - 1];
                dl[0] = 2.0 * err * dy_du + 2.0 * bp.control_weight * u;
                *grad += bp.controller_net.grad_params(xc, dl);
            }
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        if (grad) *grad *= inv;
        return loss * inv;
    };
}

inline double baseline_train_controller(BaselinePair& bp, ScgState& st,
                                        std::span<const BaselineCtrlSample> batch,
                                        int max_iterations = 1) {
    if (batch.empty()) throw std::invalid_argument("baseline_train_controller: empty batch");
    Eigen::VectorXd p = bp.controller_net.params();
    const ScgResult r = scg_minimize(p, baseline_controller_objective(bp, batch), st, max_iterations);
    bp.controller_net.params() = p;
    return r.final_loss;
}

/// Single forward pass of the controller network, saturated to the bounds.
inline double baseline_control(const BaselinePair& bp, const StateVector& z, double y_d,
                               double u_lo, double u_hi) {
    Eigen::VectorXd x(z.n() + z.m() + 1);
    x << z.y_lags, z.u_lags, y_d;
    return std::clamp(bp.controller_net.forward(x)[0], u_lo, u_hi);
}

} // namespace probctl
