#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "probctl/rng.hpp"

namespace probctl {

/// Feedforward network with tanh hidden layers and a linear output layer.
/// All weights and biases live in one flat parameter vector so optimizers
/// and snapshots can treat the model as a point in R^P.
///
/// Layout per layer l (sizes s_l -> s_{l+1}): the weight matrix
/// (s_{l+1} x s_l, column-major) followed by the bias vector.
class Network {
public:
    Network() = default;

    explicit Network(std::vector<int> layer_sizes)
        : sizes_(std::move(layer_sizes)) {
        if (sizes_.size() < 2)
            throw std::invalid_argument("Network: need at least input and output layer");
        for (int s : sizes_)
            if (s <= 0) throw std::invalid_argument("Network: layer sizes must be positive");
        Eigen::Index p = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
            p += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
        params_ = Eigen::VectorXd::Zero(p);
    }

    /// Zero biases, weights uniform in [-0.5, 0.5]/sqrt(fan_in).
    static Network random_init(std::vector<int> layer_sizes, Rng& rng) {
        Network net(std::move(layer_sizes));
        Eigen::Index off = 0;
        for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
            const int in = net.sizes_[l];
            const int out = net.sizes_[l + 1];
            const double scale = 0.5 / std::sqrt(static_cast<double>(in));
            for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(in) * out; ++i)
                net.params_[off + i] = rng.uniform(-scale, scale);
            off += static_cast<Eigen::Index>(in) * out + out; // biases stay zero
        }
        return net;
    }

    const std::vector<int>& layer_sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
    Eigen::Index num_params() const { return params_.size(); }

    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
        check_input(x);
        Eigen::VectorXd a = x;
        Eigen::Index off = 0;
        for (int l = 0; l < num_layers(); ++l) {
            a = affine(l, off, a);
            if (l + 1 < num_layers()) a = a.array().tanh().matrix();
            off += layer_param_count(l);
        }
        return a;
    }

    /// dL/dparams for a scalar loss L with given dL/doutput.
    Eigen::VectorXd grad_params(const Eigen::VectorXd& x, const Eigen::VectorXd& dl_dout) const {
        Eigen::VectorXd gp;
        backward(x, dl_dout, &gp, nullptr);
        return gp;
    }

    /// dL/dx for a scalar loss L with given dL/doutput.
    Eigen::VectorXd grad_input(const Eigen::VectorXd& x, const Eigen::VectorXd& dl_dout) const {
        Eigen::VectorXd gx;
        backward(x, dl_dout, nullptr, &gx);
        return gx;
    }

private:
    Eigen::Index layer_param_count(int l) const {
        return static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }

    Eigen::VectorXd affine(int l, Eigen::Index off, const Eigen::VectorXd& a) const {
        const int in = sizes_[l];
        const int out = sizes_[l + 1];
        Eigen::Map<const Eigen::MatrixXd> w(params_.data() + off, out, in);
        Eigen::Map<const Eigen::VectorXd> b(params_.data() + off + static_cast<Eigen::Index>(in) * out, out);
        return w * a + b;
    }

    void check_input(const Eigen::VectorXd& x) const {
        if (x.size() != input_size())
            throw std::invalid_argument("Network: input dimension " + std::to_string(x.size()) +
                                        " != " + std::to_string(input_size()));
    }

    void backward(const Eigen::VectorXd& x, const Eigen::VectorXd& dl_dout,
                  Eigen::VectorXd* gparams, Eigen::VectorXd* ginput) const {
        check_input(x);
        if (dl_dout.size() != output_size())
            throw std::invalid_argument("Network: dL/dout dimension " + std::to_string(dl_dout.size()) +
                                        " != " + std::to_string(output_size()));
        const int nl = num_layers();
        // forward, caching post-activation values per layer
        std::vector<Eigen::VectorXd> act(nl + 1);
        std::vector<Eigen::Index> offs(nl);
        act[0] = x;
        Eigen::Index off = 0;
        for (int l = 0; l < nl; ++l) {
            offs[l] = off;
            act[l + 1] = affine(l, off, act[l]);
            if (l + 1 < nl) act[l + 1] = act[l + 1].array().tanh().matrix();
            off += layer_param_count(l);
        }
        if (gparams) *gparams = Eigen::VectorXd::Zero(params_.size());
        Eigen::VectorXd delta = dl_dout; // identity output activation
        for (int l = nl - 1; l >= 0; --l) {
            const int in = sizes_[l];
            const int out = sizes_[l + 1];
            if (gparams) {
                Eigen::Map<Eigen::MatrixXd> gw(gparams->data() + offs[l], out, in);
                Eigen::Map<Eigen::VectorXd> gb(gparams->data() + offs[l] + static_cast<Eigen::Index>(in) * out, out);
                gw = delta * act[l].transpose();
                gb = delta;
            }
            if (l == 0 && !ginput) break;
            Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offs[l], out, in);
            delta = w.transpose() * delta;
            if (l > 0) // tanh' = 1 - tanh^2, input layer has no activation
                delta = delta.cwiseProduct((1.0 - act[l].array().square()).matrix());
        }
        if (ginput) *ginput = delta;
    }

    std::vector<int> sizes_;
    Eigen::VectorXd params_;
};

} // namespace probctl
