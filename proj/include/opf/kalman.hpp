#pragma once

#include "opf/common.hpp"
#include "opf/sysmodel.hpp"

namespace opf {

/// Steady-state Kalman predictor.
struct SteadyFilter {
    Matrix P;     // steady Riccati solution
    Matrix L;     // steady gain A P C^T (C P C^T + R)^{-1}
    Matrix Rbar;  // innovation covariance C P C^T + R
    int iterations = 0;
    double residual = 0.0;  // ||P - riccati_step(P)||_F
};

struct FilterOutput {
    Series predictions;  // yhat_k = C xhat_k
    Series innovations;  // e_k = y_k - yhat_k
    Series states;       // xhat_k, xhat_0 = 0
};

/// Closed-loop Markov parameters [C(A-LC)^{p-1}L, ..., CL], oldest lag first.
struct MarkovParams {
    int p = 0;
    std::vector<Matrix> blocks;

    /// Blocks side by side as an m x mp matrix (the G_p of the regression model).
    Matrix stacked() const;
    /// ||C(A-LC)^t L||_2 for t = 0..p-1 (t = 0 is the newest lag).
    std::vector<double> block_norms_by_lag() const;
    /// Smallest M with ||C(A-LC)^t L||_2 <= M rho^t over the computed lags.
    double fitted_decay_constant(double rho) const;
};

/// One step of the Riccati recursion, symmetrized.
Matrix riccati_step(const SystemModel& model, const Matrix& P);

inline constexpr double kDareTolerance = 1e-12;
inline constexpr int kDareMaxIterations = 100000;

/// Fixed-point iteration of riccati_step from P = Q. Throws NumericalError when
/// max_iter is exhausted (detectability violation suspected) or when the
/// resulting closed loop A - LC is not stable.
SteadyFilter solve_dare(const SystemModel& model, double tol = kDareTolerance, int max_iter = kDareMaxIterations);

/// Runs xhat_{k+1} = A xhat_k + L e_k from xhat_0 = 0 over the observations.
FilterOutput run_steady_predictor(const SteadyFilter& filter, const SystemModel& model, const Series& observations);
FilterOutput run_steady_predictor(const SteadyFilter& filter, const SystemModel& model, const Trajectory& traj);

MarkovParams markov_params(const SystemModel& model, const SteadyFilter& filter, int p);

}  // namespace opf
