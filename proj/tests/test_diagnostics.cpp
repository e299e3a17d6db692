#include "doctest.h"
#include "oracles.hpp"

#include "opf/diagnostics.hpp"

#include <cmath>

using namespace opf;

namespace {

Series scalars(std::initializer_list<double> v) {
    Series out;
    for (double x : v) out.push_back(Vector::Constant(1, x));
    return out;
}

}  // namespace

TEST_CASE("regret of a three-step toy") {
    const auto rec = regret_series(scalars({1, 2, 3}), scalars({0, 0, 0}), scalars({1, 1, 1}), 5);
    CHECK(rec.final_regret() == doctest::Approx(9.0));
    CHECK(rec.first_step == 5);
    CHECK(rec.last_step() == 7);
    CHECK(rec.regret_at(6) == doctest::Approx(4.0 - 1.0 + 1.0));
    CHECK(rec.identity_defect() < 1e-14);
}

TEST_CASE("regret edge cases") {
    const auto y = oracle::random_series(100, 2, 1);
    const auto yhat = oracle::random_series(100, 2, 2);
    const auto same = regret_series(y, yhat, yhat);
    for (double r : same.cum_regret) CHECK(r == 0.0);
    const auto hindsight = regret_series(y, y, yhat);
    double e2 = 0;
    for (std::size_t k = 0; k < y.size(); ++k) e2 += (y[k] - yhat[k]).squaredNorm();
    CHECK(hindsight.final_regret() == doctest::Approx(-e2));
    CHECK_THROWS_AS(regret_series(y, Series(y.begin(), y.end() - 1), yhat), StructuralError);
}

TEST_CASE("regret identity on random predictors") {
    for (int s = 0; s < 10; ++s) {
        const auto y = oracle::random_series(500, 3, 100 + s, 5.0);
        const auto a = oracle::random_series(500, 3, 200 + s);
        const auto b = oracle::random_series(500, 3, 300 + s);
        const auto rec = regret_series(y, a, b);
        CHECK_NOTHROW(check_regret_identity(rec, 1e-8));
        for (std::size_t i = 0; i < rec.size(); ++i)
            CHECK(rec.cum_regret[i] == doctest::Approx(rec.cum_gap[i] + 2 * rec.cum_martingale[i]).epsilon(1e-9));
    }
    auto rec = regret_series(scalars({1, 2, 3}), scalars({0, 0, 0}), scalars({1, 1, 1}));
    rec.cum_regret.back() += 1.0;
    CHECK_THROWS_AS(check_regret_identity(rec), NumericalError);
}

TEST_CASE("truncation bias") {
    const auto model = oracle::tracking_model();
    const auto f = solve_dare(model);
    const Series zeros(200, Vector::Zero(3));
    const auto quiet = run_steady_predictor(f, model, zeros);
    const auto b0 = truncation_bias(model, f, quiet, 5);
    for (const auto& v : b0.values) CHECK(v.isZero(0.0));

    const auto tr = simulate(model, 400, 3);
    const auto kal = run_steady_predictor(f, model, tr);
    const auto b = truncation_bias(model, f, kal, 60);
    CHECK(b.values.size() == 401 - 60);
    double worst = 0;
    for (const auto& v : b.values) worst = std::max(worst, v.norm());
    CHECK(worst < 1e-6);

    // Direct definition at one step.
    const auto b3 = truncation_bias(model, f, kal, 3);
    const Matrix F = model.A - f.L * model.C;
    const Vector expected = model.C * F * F * F * kal.states[97];
    CHECK((b3.at(100) - expected).norm() < 1e-12);
}

TEST_CASE("error decomposition against dense formulas") {
    const auto model = oracle::tracking_model();
    const auto f = solve_dare(model);
    const auto tr = simulate(model, 300, 4);
    const auto kal = run_steady_predictor(f, model, tr);
    const int p = 4;
    const auto D = scaling_matrix(p, 0.7, 3);
    const auto bias = truncation_bias(model, f, kal, p);
    const auto in = decomposition_inputs(tr.observations, kal, bias, 250, D, 1.0);
    CHECK(in.Zbar.cols() == 250 - p + 1);
    const auto G = markov_params(model, f, p);
    const Vector znext = regressor(tr.observations, 251, p);
    const auto rep = error_decomposition(in, G, D, 1.0, znext);

    const Matrix Vinv = in.Vbar.inverse();
    const Matrix Dm2 = D.inverse_squared().asDiagonal();
    auto sq_norm = [&](const Matrix& X) {
        return Eigen::SelfAdjointEigenSolver<Matrix>(X * Vinv * X.transpose()).eigenvalues().maxCoeff();
    };
    CHECK(rep.regularization == doctest::Approx(sq_norm(1.0 * G.stacked() * Dm2)).epsilon(1e-8));
    CHECK(rep.regression == doctest::Approx(sq_norm(in.E * in.Zbar.transpose())).epsilon(1e-8));
    CHECK(rep.bias == doctest::Approx(sq_norm(in.B * in.Zbar.transpose())).epsilon(1e-8));
    CHECK(rep.accumulation == doctest::Approx(znext.dot(Vinv * znext)).epsilon(1e-8));
    Matrix Vt = Matrix::Identity(3 * p, 3 * p);
    for (Eigen::Index j = 0; j < in.Zbar.cols(); ++j) {
        const Vector z = D.apply(in.Zbar.col(j));
        Vt += z * z.transpose();
    }
    const Matrix Lt = Vt.llt().matrixL();
    CHECK(rep.logdet_V == doctest::Approx(2 * Lt.diagonal().array().log().sum()).epsilon(1e-6));
    CHECK(rep.trace_term == doctest::Approx((in.Zbar.transpose() * Vinv * in.Zbar).trace()).epsilon(1e-8));

    // Sample-wise split of the estimation error: G_hat Z - G Z decomposes into the three parts.
    const Matrix Ghat = in.S * Vinv;
    const Matrix lhs = (Ghat - G.stacked()) * znext;
    const Matrix rhs = (in.E * in.Zbar.transpose() + in.B * in.Zbar.transpose() - G.stacked() * Dm2) * Vinv * znext;
    CHECK((lhs - rhs).norm() < 1e-6 * (1 + lhs.norm()));
}

TEST_CASE("decomposition degenerate inputs") {
    const int p = 2;
    const auto D = scaling_matrix(p, 1.0, 1);
    DecompositionInputs in;
    in.Zbar = oracle::random_series(1, 40, 3)[0].reshaped(2, 20);
    in.E = Matrix::Zero(1, 20);
    in.B = Matrix::Zero(1, 20);
    in.S = Matrix::Zero(1, 2);
    MarkovParams G;
    G.p = p;
    G.blocks = {Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 0.7)};
    const Vector z = Vector::Ones(2);
    double last = 1e300;
    for (double lambda : {1.0, 1e-3, 1e-6}) {
        in.Vbar = lambda * Matrix::Identity(2, 2) + in.Zbar * in.Zbar.transpose();
        const auto rep = error_decomposition(in, G, D, lambda, z);
        CHECK(rep.regression == 0.0);
        CHECK(rep.bias == 0.0);
        CHECK(rep.regularization < last);
        last = rep.regularization;
    }
    CHECK(last < 1e-10);
}

TEST_CASE("decompose_run reconstructs the prediction gap") {
    const auto model = oracle::tracking_model();
    const auto f = solve_dare(model);
    OpfParams params;
    params.T_init = 60;
    params.N_E = 3;
    params.gamma = 0.5;
    const auto sched = epoch_schedule(params);
    const auto tr = simulate(model, sched.last_step(), 6);
    const auto kal = run_steady_predictor(f, model, tr);
    const auto run = run_opf(tr.observations, params);
    const auto dec = decompose_run(model, f, tr.observations, kal, sched, 0.5, 1.0, run, RowPolicy{40});
    CHECK(dec.steps.size() == run.predictions.size());
    CHECK(dec.max_gap_defect < 1e-6);
    std::size_t ends = 0;
    for (const auto& row : dec.rows)
        for (const auto& e : sched.epochs) ends += row.k == e.last_step();
    CHECK(ends == sched.epochs.size());
    for (std::size_t i = 1; i < dec.rows.size(); ++i) CHECK(dec.rows[i].k > dec.rows[i - 1].k);
    for (const auto& s : dec.steps) {
        CHECK(s.accumulation_normalized >= 0.0);
        CHECK(s.accumulation_normalized <= 1.0 + 1e-12);
    }
}

TEST_CASE("persistent excitation ratio") {
    const auto iid = oracle::random_series(4001, 3, 9);
    const auto ok = persistent_excitation_ratio(iid, 10, {4000}, 1.0);
    CHECK(ok[0] >= 1.0);
    const Series flat(2001, Vector::Constant(3, 1.5));
    const auto bad = persistent_excitation_ratio(flat, 10, {2000}, 1.0);
    CHECK(bad[0] < 1e-8);
    CHECK_THROWS_AS(persistent_excitation_ratio(iid, 10, {5000}, 1.0), ParameterError);
}

TEST_CASE("persistent excitation over seeds of white noise") {
    int pass = 0;
    for (int s = 0; s < 20; ++s) pass += persistent_excitation_ratio(oracle::random_series(3001, 2, 40 + s), 8, {3000}, 1.0)[0] >= 1.0;
    CHECK(pass == 20);
}

TEST_CASE("regret order ratios") {
    RegretRecord zero;
    zero.first_step = 10;
    zero.cum_regret.assign(100, 0.0);
    zero.online_loss.assign(100, 0.0);
    const auto z = regret_order_ratio(zero, {1, 2, 3}, {50, 109});
    for (const auto& row : z)
        for (double v : row) CHECK(v == 0.0);

    RegretRecord sq = zero;
    for (std::size_t i = 0; i < 100; ++i) sq.cum_regret[i] = std::pow(std::log(double(10 + i)), 2);
    const auto r = regret_order_ratio(sq, {2}, {20, 50, 109});
    for (const auto& row : r) CHECK(row[0] == doctest::Approx(1.0));
    CHECK_THROWS_AS(regret_order_ratio(sq, {1}, {2}), ParameterError);
}

TEST_CASE("whiteness check") {
    const auto iid = oracle::random_series(5000, 3, 31);
    const auto w = whiteness_check(iid);
    CHECK(w.normalized.size() == 5);
    CHECK(w.threshold == doctest::Approx(4.0 / std::sqrt(5000.0)));
    CHECK(w.pass);

    const Series flat(500, Vector::Constant(2, 3.0));
    const auto c = whiteness_check(flat);
    for (double v : c.normalized) CHECK(v == doctest::Approx(1.0));
    CHECK_FALSE(c.pass);

    const auto model = oracle::tracking_model();
    const auto f = solve_dare(model);
    const auto tr = simulate(model, 7680, 1);
    const auto kal = run_steady_predictor(f, model, tr);
    const Series innov(kal.innovations.begin() + 61, kal.innovations.end());
    CHECK(whiteness_check(innov).pass);
    const Series raw(tr.observations.begin() + 61, tr.observations.end());
    CHECK_FALSE(whiteness_check(raw).pass);
}
