#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

namespace probctl {

/// Loss functional: returns the loss at p and, when grad != nullptr, writes
/// the gradient there. Must be deterministic for a fixed p.
using Objective = std::function<double(const Eigen::VectorXd& p, Eigen::VectorXd* grad)>;

/// Optimizer state that survives across calls, so repeated short calls
/// (one step per control cycle) keep the accumulated scale estimate.
struct ScgState {
    double lambda = 1e-6;
    long long total_iterations = 0;
};

struct ScgResult {
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;     // iterations attempted (accepted or not)
    int accepted = 0;       // parameter updates actually taken
    bool diverged = false;  // non-finite loss/gradient encountered; params restored
    bool converged = false; // gradient norm vanished
};

/// Scaled conjugate gradient minimization (Moller's formulation, sigma = 1e-4).
/// Accepted steps never increase the loss. On a non-finite loss or gradient the
/// step is aborted, the previous parameters are restored, and the result is
/// flagged as diverged. The conjugate direction is restarted at every call;
/// lambda carries over through `state`.
inline ScgResult scg_minimize(Eigen::VectorXd& p, const Objective& f, ScgState& state,
                              int max_iterations) {
    constexpr double sigma0 = 1e-4;
    constexpr double grad_tol = 1e-12;
    constexpr double lambda_max = 1e20;

    ScgResult res;
    const Eigen::Index n = p.size();

    Eigen::VectorXd grad(n);
    double loss = f(p, &grad);
    if (!std::isfinite(loss) || !grad.allFinite()) {
        res.diverged = true;
        return res;
    }
    res.final_loss = loss;

    double lambda = state.lambda;
    double lambda_bar = 0.0;
    Eigen::VectorXd r = -grad;        // steepest descent residual
    Eigen::VectorXd dir = r;          // search direction
    bool recompute_curvature = true;
    double delta_raw = 0.0;           // dir' H dir estimate, unscaled
    Eigen::VectorXd step_grad(n), probe_grad(n);

    for (int k = 0; k < max_iterations; ++k) {
        const double rnorm = r.norm();
        if (rnorm < grad_tol) {
            res.converged = true;
            break;
        }
        double pnorm2 = dir.squaredNorm();
        if (pnorm2 == 0.0) {
            res.converged = true;
            break;
        }

        double mu = dir.dot(r);
        if (mu <= 0.0) { // stale direction, restart on steepest descent
            dir = r;
            mu = r.squaredNorm();
            pnorm2 = mu;
            recompute_curvature = true;
        }

        ++res.iterations;
        ++state.total_iterations;

        if (recompute_curvature) {
            // second-order information along the direction
            const double sigma = sigma0 / std::sqrt(pnorm2);
            Eigen::VectorXd probe = p + sigma * dir;
            const double probe_loss = f(probe, &probe_grad);
            if (!std::isfinite(probe_loss) || !probe_grad.allFinite()) {
                res.diverged = true;
                break;
            }
            delta_raw = dir.dot(probe_grad - grad) / sigma;
        }

        double delta = delta_raw + (lambda - lambda_bar) * pnorm2;
        if (delta <= 0.0) { // make the scaled Hessian positive definite
            lambda_bar = 2.0 * (lambda - delta / pnorm2);
            delta = -delta + lambda * pnorm2;
            lambda = lambda_bar;
        }

        const double alpha = mu / delta;
        Eigen::VectorXd cand = p + alpha * dir;
        const double cand_loss = f(cand, &step_grad);
        if (!std::isfinite(cand_loss) || !step_grad.allFinite()) {
            res.diverged = true;
            break;
        }
        const double comparison = 2.0 * delta * (loss - cand_loss) / (mu * mu);

        if (comparison >= 0.0) {
            // accepted: loss did not increase
            p = cand;
            loss = cand_loss;
            const Eigen::VectorXd r_new = -step_grad;
            lambda_bar = 0.0;
            recompute_curvature = true;
            ++res.accepted;
            if ((res.accepted % static_cast<int>(std::max<Eigen::Index>(n, 1))) == 0) {
                dir = r_new; // periodic restart
            } else {
                const double beta = (r_new.squaredNorm() - r_new.dot(r)) / mu;
                dir = r_new + beta * dir;
            }
            r = r_new;
            grad = step_grad;
            if (comparison >= 0.75) lambda *= 0.25;
        } else {
            lambda_bar = lambda;
            recompute_curvature = false; // retry same direction with larger lambda
        }
        if (comparison < 0.25) lambda += delta * (1.0 - comparison) / pnorm2;
        if (lambda > lambda_max) break; // no further progress possible
    }

    res.final_loss = loss;
    state.lambda = std::min(std::max(lambda, 1e-15), lambda_max);
    return res;
}

} // namespace probctl
