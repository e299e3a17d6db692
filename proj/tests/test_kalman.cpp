#include "doctest.h"
#include "oracles.hpp"

#include "opf/kalman.hpp"

#include <chrono>
#include <cmath>
#include <random>

using namespace opf;

// Frozen values for a = 0.5, c = 1, q = 1, r = 1.
constexpr double kScalarP = 1.1327822185373186;
constexpr double kScalarL = 0.2655644370746374;
constexpr double kScalarRbar = 2.1327822185373186;
constexpr double kScalarMarkovLag1 = 0.06225774829854965;

TEST_CASE("scalar DARE matches the closed-form root") {
    const auto start = std::chrono::steady_clock::now();
    const auto f = solve_dare(oracle::scalar_model(0.5, 1, 1, 1));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(std::abs(f.P(0, 0) - (0.25 + std::sqrt(4.0625)) / 2) < 1e-8);
    CHECK(f.P(0, 0) == doctest::Approx(kScalarP).epsilon(1e-12));
    CHECK(f.L(0, 0) == doctest::Approx(kScalarL).epsilon(1e-12));
    CHECK(f.Rbar(0, 0) == doctest::Approx(kScalarRbar).epsilon(1e-12));
    CHECK(f.residual < 1e-12);
    CHECK(secs < 1.0);
}

TEST_CASE("a = 0 returns P = Q and L = 0 exactly") {
    const auto f = solve_dare(oracle::scalar_model(0.0, 1.0, 2.5, 0.7));
    CHECK(f.P(0, 0) == 2.5);
    CHECK(f.L(0, 0) == 0.0);

    SystemModel m;
    m.A = Matrix::Zero(2, 2);
    m.C = Matrix::Identity(2, 2);
    m.Q = Matrix{{2.0, 0.3}, {0.3, 1.0}};
    m.R = Matrix::Identity(2, 2);
    const auto g = solve_dare(m);
    CHECK(g.P == m.Q);
    CHECK(g.L.isZero(0.0));
}

TEST_CASE("random scalar systems agree with the quadratic root") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> ua(-0.99, 0.99), uc(0.2, 3.0), uq(0.1, 5.0), ur(0.1, 5.0);
    for (int i = 0; i < 50; ++i) {
        const double a = ua(rng), c = uc(rng), q = uq(rng), r = ur(rng);
        const auto f = solve_dare(oracle::scalar_model(a, c, q, r));
        const double P = oracle::scalar_dare(a, c, q, r);
        CHECK(f.P(0, 0) == doctest::Approx(P).epsilon(1e-9));
        CHECK(f.L(0, 0) == doctest::Approx(a * P * c / (c * c * P + r)).epsilon(1e-9));
    }
}

TEST_CASE("DARE fixed point on the tracking system") {
    const auto model = oracle::tracking_model();
    const auto f = solve_dare(model);
    CHECK((riccati_step(model, f.P) - f.P).norm() < 1e-10);
    CHECK((f.P - f.P.transpose()).norm() == 0.0);
    CHECK(spectral_radius(model.A - f.L * model.C) < 1.0);
    const Matrix Rbar = model.C * f.P * model.C.transpose() + model.R;
    CHECK((f.Rbar - Rbar).norm() < 1e-12);
}

TEST_CASE("non-detectable systems report divergence") {
    // The unit mode is never observed, so P grows without bound.
    CHECK_THROWS_AS(solve_dare(oracle::scalar_model(1.0, 0.0, 1.0, 1.0), 1e-12, 2000), NumericalError);
}

TEST_CASE("steady predictor recursion") {
    const auto model = oracle::scalar_model(0.5, 1, 1, 1);
    const auto f = solve_dare(model);
    const auto tr = simulate(model, 30, 9);
    const auto out = run_steady_predictor(f, model, tr);
    double xhat = 0.0;
    for (std::size_t k = 0; k <= 30; ++k) {
        const double y = tr.observations[k](0);
        CHECK(out.predictions[k](0) == doctest::Approx(xhat).epsilon(1e-14));
        CHECK(out.innovations[k](0) == doctest::Approx(y - xhat).epsilon(1e-14));
        xhat = 0.5 * xhat + kScalarL * (y - xhat);
    }
}

TEST_CASE("Markov parameters of the scalar example") {
    const auto model = oracle::scalar_model(0.5, 1, 1, 1);
    const auto mp = markov_params(model, solve_dare(model), 2);
    REQUIRE(mp.blocks.size() == 2);
    CHECK(mp.blocks[0](0, 0) == doctest::Approx(kScalarMarkovLag1).epsilon(1e-10));
    CHECK(mp.blocks[1](0, 0) == doctest::Approx(kScalarL).epsilon(1e-10));
    const Matrix G = mp.stacked();
    CHECK(G.rows() == 1);
    CHECK(G.cols() == 2);
    CHECK(G(0, 1) == mp.blocks[1](0, 0));
    CHECK_THROWS_AS(markov_params(model, solve_dare(model), 0), ParameterError);
}

TEST_CASE("Markov block norms decay at the closed-loop rate") {
    const auto model = oracle::tracking_model();
    const auto f = solve_dare(model);
    const double rho = spectral_radius(model.A - f.L * model.C);
    const auto norms = markov_params(model, f, 22).block_norms_by_lag();
    REQUIRE(norms.size() == 22);
    // Least-squares slope of log ||block_t|| against t.
    double st = 0, sl = 0, stt = 0, stl = 0;
    const int n = static_cast<int>(norms.size());
    for (int t = 0; t < n; ++t) {
        const double l = std::log(norms[t]);
        st += t; sl += l; stt += double(t) * t; stl += t * l;
    }
    const double slope = (n * stl - st * sl) / (n * stt - st * st);
    CHECK(std::exp(slope) == doctest::Approx(rho).epsilon(0.15));
    const auto mp = markov_params(model, f, 22);
    const double M = mp.fitted_decay_constant(rho);
    for (int t = 0; t < n; ++t) CHECK(norms[t] <= M * std::pow(rho, t) * (1 + 1e-12));
}
