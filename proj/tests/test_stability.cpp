#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "probctl/harness.hpp"
#include "probctl/models.hpp"
#include "probctl/plants.hpp"
#include "probctl/rng.hpp"
#include "probctl/scg.hpp"
#include "probctl/stability.hpp"
#include "support/oracles.hpp"

using namespace probctl;

namespace {

StateVector state1(double y_prev) {
    StateVector z;
    z.y_lags = Eigen::VectorXd::Constant(1, y_prev);
    z.u_lags.resize(0);
    return z;
}

/// Expands the closed-loop polynomial by dense convolution, independently of
/// the library's coefficient bookkeeping.
Eigen::VectorXd poly_oracle(const Linearization& lin, const Eigen::VectorXd& b_row) {
    const int n = static_cast<int>(lin.df_dy.size());
    const int m = static_cast<int>(lin.df_du.size()) - 1;
    std::vector<double> fy(n + 1, 0.0), bu(m + 1, 0.0), fu(m + 1, 0.0), by(n + 1, 0.0);
    for (int i = 1; i <= n; ++i) fy[i] = lin.df_dy[i - 1];
    for (int j = 1; j <= m; ++j) bu[j] = b_row[n + j - 1];
    for (int j = 0; j <= m; ++j) fu[j] = lin.df_du[j];
    for (int i = 1; i <= n; ++i) by[i] = b_row[i - 1];

    std::vector<double> poly{1.0};
    poly = oracle::poly_add(poly, oracle::poly_scale(bu, -1.0));
    poly = oracle::poly_add(poly, oracle::poly_scale(fy, -1.0));
    poly = oracle::poly_add(poly, oracle::poly_mul(fy, bu));
    poly = oracle::poly_add(poly, oracle::poly_scale(oracle::poly_mul(fu, by), -1.0));
    poly.resize(n + m + 1, 0.0);
    Eigen::VectorXd a(n + m);
    for (int i = 1; i <= n + m; ++i) a[i - 1] = -poly[static_cast<std::size_t>(i)];
    return a;
}

} // namespace

TEST_CASE("b_row arithmetic and guard") {
    SECTION("zero numerator gives the zero row") {
        const auto b = compute_b_row(Eigen::Vector2d::Zero(), 0.3, 0.5);
        REQUIRE(b);
        REQUIRE(b->isZero(0.0));
    }
    SECTION("hand case") {
        const auto b = compute_b_row(Eigen::Vector2d(1.0, 0.0), 0.0, 0.5);
        REQUIRE(b);
        REQUIRE((*b)[0] == -1.0);
        REQUIRE((*b)[1] == 0.0);
    }
    SECTION("guard fires near a vanishing denominator") {
        REQUIRE_FALSE(compute_b_row(Eigen::Vector2d(1.0, 0.0), -1.0, 0.5));
    }
}

TEST_CASE("control increment identity: row-vector form equals the component sum") {
    Rng rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.raw() % 3);
        const int m = static_cast<int>(rng.raw() % 3);
        Eigen::VectorXd b(n + m + 1), dchi(n + m + 1);
        for (int i = 0; i < n + m + 1; ++i) {
            b[i] = rng.uniform(-2, 2);
            dchi[i] = rng.uniform(-2, 2);
        }
        double component_sum = 0.0;
        for (int i = 1; i <= n; ++i) component_sum += b[i - 1] * dchi[i - 1];
        for (int j = 1; j <= m; ++j) component_sum += b[n + j - 1] * dchi[n + j - 1];
        component_sum += b[n + m] * dchi[n + m];
        REQUIRE(b.dot(dchi) == Catch::Approx(component_sum).margin(1e-12));
    }
}

TEST_CASE("closed-loop polynomial") {
    SECTION("static plant with zero feedback collapses to N = 1") {
        Linearization lin;
        lin.df_dy = Eigen::Vector2d::Zero();
        lin.df_du = Eigen::Vector2d::Zero(); // n = 2, m = 1
        const Eigen::VectorXd a = closed_loop_poly(lin, Eigen::VectorXd::Zero(4));
        REQUIRE(a.size() == 3);
        REQUIRE(a.isZero(0.0));
    }
    SECTION("hand expansion for n = 1, m = 0") {
        Rng rng(62);
        for (int trial = 0; trial < 20; ++trial) {
            Linearization lin;
            lin.df_dy = Eigen::VectorXd::Constant(1, rng.uniform(-1, 1));
            lin.df_du = Eigen::VectorXd::Constant(1, rng.uniform(-1, 1));
            Eigen::VectorXd b(2);
            b << rng.uniform(-2, 2), rng.uniform(-2, 2);
            const Eigen::VectorXd a = closed_loop_poly(lin, b);
            REQUIRE(a.size() == 1);
            REQUIRE(a[0] == lin.df_dy[0] + b[0] * lin.df_du[0]);
        }
    }
    SECTION("matches the convolution oracle on random small orders") {
        Rng rng(63);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 1 + static_cast<int>(rng.raw() % 3);
            const int m = static_cast<int>(rng.raw() % 4);
            Linearization lin;
            lin.df_dy.resize(n);
            lin.df_du.resize(m + 1);
            for (int i = 0; i < n; ++i) lin.df_dy[i] = rng.uniform(-1, 1);
            for (int j = 0; j <= m; ++j) lin.df_du[j] = rng.uniform(-1, 1);
            Eigen::VectorXd b(n + m + 1);
            for (int i = 0; i < n + m + 1; ++i) b[i] = rng.uniform(-2, 2);
            const Eigen::VectorXd a = closed_loop_poly(lin, b);
            const Eigen::VectorXd expected = poly_oracle(lin, b);
            REQUIRE((a - expected).lpNorm<Eigen::Infinity>() < 1e-12);
        }
    }
}

TEST_CASE("companion matrix layout and norm condition") {
    SECTION("hand case") {
        Eigen::VectorXd a(2);
        a << 0.5, 0.0;
        const StabilityReport rep = stability_check(a);
        Eigen::MatrixXd expected(2, 2);
        expected << 0, 1, 0, 0.5;
        REQUIRE(rep.companion == expected);
        REQUIRE(rep.spectral_radius == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("nilpotent when all coefficients vanish") {
        const StabilityReport rep = stability_check(Eigen::VectorXd::Zero(3));
        REQUIRE(rep.spectral_radius == Catch::Approx(0.0).margin(1e-12));
        // the shift matrix has spectral norm exactly 1: radius-stable, not norm-stable
        REQUIRE(rep.spectral_norm == Catch::Approx(1.0).margin(1e-12));
        REQUIRE_FALSE(rep.stable);
    }
    SECTION("radius never exceeds norm") {
        Rng rng(64);
        for (int trial = 0; trial < 100; ++trial) {
            const int d = 1 + static_cast<int>(rng.raw() % 6);
            Eigen::VectorXd a(d);
            for (int i = 0; i < d; ++i) a[i] = rng.uniform(-1, 1);
            const StabilityReport rep = stability_check(a);
            REQUIRE(rep.spectral_radius <= rep.spectral_norm + 1e-12);
        }
    }
    SECTION("companion eigenvalues equal the polynomial roots") {
        Rng rng(65);
        for (int trial = 0; trial < 100; ++trial) {
            const int d = 1 + static_cast<int>(rng.raw() % 6);
            Eigen::VectorXd a(d);
            for (int i = 0; i < d; ++i) a[i] = rng.uniform(-1, 1);
            const StabilityReport rep = stability_check(a);
            std::vector<std::complex<double>> eig(rep.eigenvalues.size());
            for (Eigen::Index i = 0; i < rep.eigenvalues.size(); ++i) eig[i] = rep.eigenvalues[i];
            const auto roots = oracle::durand_kerner(a);
            REQUIRE(oracle::max_pair_distance(eig, roots) < 1e-8);
        }
    }
}

TEST_CASE("linearize") {
    SECTION("constant-output model has zero derivatives") {
        ForwardModel fm;
        fm.net = Network({2, 6});
        fm.head = MdnHead{2, 1e-6};
        const Linearization lin = linearize(fm, state1(0.4), 0.2);
        REQUIRE(lin.df_dy.isZero(0.0));
        REQUIRE(lin.df_du.isZero(0.0));
    }
    SECTION("recovers the coefficients of a linear plant it was trained on") {
        Rng rng(66);
        ForwardModel fm = make_forward_model(1, 0, {12}, 2, 1e-6, rng);
        ScgState st;
        Rng noise(67);
        std::vector<Sample> data;
        double y = 0.0;
        for (int k = 0; k < 1500; ++k) {
            const double u = noise.uniform(-2.0, 2.0);
            const double y_next = 0.5 * y + 0.2 * u + noise.normal(0.0, 0.05);
            data.push_back({Eigen::VectorXd::Constant(1, y), u, y_next});
            y = y_next;
        }
        train_forward(fm, st, data, 200);
        const Linearization lin = linearize(fm, state1(0.0), 0.0);
        REQUIRE(std::abs(lin.df_dy[0] - 0.5) < 0.05);
        REQUIRE(std::abs(lin.df_du[0] - 0.2) < 0.05);
    }
    SECTION("derivatives vary smoothly with the operating point") {
        Rng rng(68);
        ForwardModel fm = make_forward_model(1, 0, {8}, 2, 1e-6, rng);
        const Linearization a = linearize(fm, state1(0.3), 0.1);
        const double delta = 1e-3;
        const Linearization b = linearize(fm, state1(0.3 + delta), 0.1);
        REQUIRE(std::abs(a.df_dy[0] - b.df_dy[0]) < 100.0 * delta);
        REQUIRE(std::abs(a.df_du[0] - b.df_du[0]) < 100.0 * delta);
    }
}

TEST_CASE("monitor is read-only and assembles a coherent report") {
    Rng rng(69);
    ForwardModel fm = make_forward_model(1, 0, {8}, 2, 1e-6, rng);
    const Eigen::VectorXd before = fm.net.params();
    const CostWeights w{0.4, 1.0, 0.001};
    const StabilityReport rep = monitor(fm, state1(0.2), 0.1, 0.5, w);
    REQUIRE(fm.net.params() == before);
    if (!rep.indeterminate) {
        REQUIRE(rep.b_row.size() == 2);
        REQUIRE(rep.poly_coeffs.size() == 1);
        REQUIRE(std::isfinite(rep.spectral_norm));
        REQUIRE(rep.spectral_radius <= rep.spectral_norm + 1e-12);
    }
}
