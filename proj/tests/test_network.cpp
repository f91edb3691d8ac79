#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "probctl/network.hpp"
#include "probctl/rng.hpp"
#include "support/oracles.hpp"

using probctl::Network;
using probctl::Rng;

namespace {

Eigen::VectorXd random_vec(int n, Rng& rng, double scale = 1.0) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
    return v;
}

Network random_net(const std::vector<int>& sizes, Rng& rng) {
    Network net(sizes);
    for (Eigen::Index i = 0; i < net.num_params(); ++i) net.params()[i] = rng.uniform(-1.0, 1.0);
    return net;
}

} // namespace

TEST_CASE("zero parameters annihilate any input") {
    Network net({3, 5, 2});
    const Eigen::VectorXd out = net.forward(Eigen::Vector3d(1.0, -2.0, 0.5));
    REQUIRE(out.size() == 2);
    REQUIRE(out.isZero(0.0));
}

TEST_CASE("single linear layer is an affine map") {
    Network net({1, 1});
    net.params()[0] = 1.0; // weight
    net.params()[1] = 0.0; // bias
    Eigen::VectorXd x(1);
    x << 2.0;
    REQUIRE(net.forward(x)[0] == 2.0);
}

TEST_CASE("forward matches a hand layer-by-layer evaluation") {
    Rng rng(11);
    Network net = random_net({2, 3, 2}, rng);
    const Eigen::VectorXd x = random_vec(2, rng);

    // direct matrix arithmetic recomputation from the flat layout
    const Eigen::VectorXd& p = net.params();
    Eigen::Map<const Eigen::MatrixXd> w1(p.data(), 3, 2);
    Eigen::Map<const Eigen::VectorXd> b1(p.data() + 6, 3);
    Eigen::Map<const Eigen::MatrixXd> w2(p.data() + 9, 2, 3);
    Eigen::Map<const Eigen::VectorXd> b2(p.data() + 15, 2);
    const Eigen::VectorXd hidden = (w1 * x + b1).array().tanh().matrix();
    const Eigen::VectorXd expected = w2 * hidden + b2;

    REQUIRE((net.forward(x) - expected).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("forward is pure") {
    Rng rng(12);
    Network net = random_net({3, 4, 4, 1}, rng);
    const Eigen::VectorXd x = random_vec(3, rng);
    const Eigen::VectorXd a = net.forward(x);
    const Eigen::VectorXd b = net.forward(x);
    REQUIRE(a == b); // bitwise
}

TEST_CASE("dimension mismatch raises") {
    Network net({3, 2});
    REQUIRE_THROWS_AS(net.forward(Eigen::Vector2d(1.0, 2.0)), std::invalid_argument);
    REQUIRE_THROWS_AS(net.grad_params(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)),
                      std::invalid_argument);
}

TEST_CASE("parameter count invariant") {
    Network net({4, 7, 3, 2});
    REQUIRE(net.num_params() == 4 * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2);
}

TEST_CASE("zero upstream gradient gives zero parameter gradient") {
    Rng rng(13);
    Network net = random_net({2, 4, 2}, rng);
    const Eigen::VectorXd g = net.grad_params(random_vec(2, rng), Eigen::Vector2d::Zero());
    REQUIRE(g.isZero(0.0));
}

TEST_CASE("linear layer gradients have the closed form") {
    Network net({1, 1});
    net.params()[0] = 0.7;
    net.params()[1] = 0.1;
    Eigen::VectorXd x(1), dl(1);
    x << 3.0;
    dl << 1.0;
    const Eigen::VectorXd gp = net.grad_params(x, dl);
    REQUIRE(gp[0] == 3.0); // weight gradient = x
    REQUIRE(gp[1] == 1.0); // bias gradient = 1
    REQUIRE(net.grad_input(x, dl)[0] == 0.7); // w^T dl
    REQUIRE(net.grad_input(x, dl).size() == 1);
}

TEST_CASE("zero weights give zero input gradient") {
    Network net({3, 4, 2});
    const Eigen::VectorXd g = net.grad_input(Eigen::Vector3d(1, 2, 3), Eigen::Vector2d(1, 1));
    REQUIRE(g.isZero(0.0));
}

TEST_CASE("gradients match central finite differences on random nets") {
    Rng rng(101);
    const std::vector<std::vector<int>> shapes = {{2, 4, 3}, {3, 5, 5, 2}, {1, 3, 1}, {4, 2}};
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto& shape = shapes[static_cast<std::size_t>(trial) % shapes.size()];
        Network net = random_net(shape, rng);
        const Eigen::VectorXd x = random_vec(shape.front(), rng);
        const Eigen::VectorXd dl = random_vec(shape.back(), rng);

        const auto loss_of_params = [&](const Eigen::VectorXd& p) {
            Network probe = net;
            probe.params() = p;
            return dl.dot(probe.forward(x));
        };
        const auto loss_of_input = [&](const Eigen::VectorXd& xi) { return dl.dot(net.forward(xi)); };

        REQUIRE(oracle::grad_close(net.grad_params(x, dl), oracle::grad_fd(loss_of_params, net.params()),
                                   1e-5));
        REQUIRE(oracle::grad_close(net.grad_input(x, dl), oracle::grad_fd(loss_of_input, x), 1e-5));
        ++checked;
    }
    REQUIRE(checked == 100);
}

TEST_CASE("random_init leaves biases zero and scales weights by fan-in") {
    Rng rng(7);
    Network net = Network::random_init({4, 8, 2}, rng);
    // first layer weights within [-0.25, 0.25] (fan_in 4), biases zero
    const double w_bound = 0.5 / 2.0;
    for (int i = 0; i < 32; ++i) REQUIRE(std::abs(net.params()[i]) <= w_bound);
    for (int i = 32; i < 40; ++i) REQUIRE(net.params()[i] == 0.0);
}
