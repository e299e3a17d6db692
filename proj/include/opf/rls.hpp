#pragma once

#include "opf/common.hpp"

#include <cstddef>

namespace opf {

/// Diagonal re-weighting diag(g^{p-1}, ..., g, 1) (x) I_m, stored as its diagonal.
struct ScalingMatrix {
    int p = 0;
    double gamma = 1.0;
    Vector diag;  // length m*p, oldest lag first

    Eigen::Index dim() const { return diag.size(); }
    Vector apply(const Vector& z) const { return diag.cwiseProduct(z); }
    /// Diagonal of D^{-2}.
    Vector inverse_squared() const { return diag.cwiseAbs2().cwiseInverse(); }
};

ScalingMatrix scaling_matrix(int p, double gamma, Eigen::Index m);

/// Z_{k,p} = [y_{k-p}; ...; y_{k-1}], oldest observation on top.
Vector regressor(const Series& observations, std::size_t k, int p);

inline constexpr int kDefaultRefactorPeriod = 512;

/// Recursive least-squares state for the scaled regression y = G~ Z~ + noise.
struct RlsState {
    Matrix Gtilde;      // m x mp
    Matrix Vtilde;      // lambda I + sum Z~ Z~^T
    Matrix Vtilde_inv;  // maintained by rank-one updates
    int steps_since_refactor = 0;
    int refactor_period = kDefaultRefactorPeriod;
    std::size_t samples = 0;

    RlsState() = default;
    RlsState(Eigen::Index m, Eigen::Index dim, double lambda, int refactor_period = kDefaultRefactorPeriod);

    Eigen::Index output_dim() const { return Gtilde.rows(); }
    Eigen::Index regressor_dim() const { return Gtilde.cols(); }
};

/// ytilde = G~ Z~.
Vector predict(const RlsState& state, const Vector& Ztilde);

/// Adds one sample (y_k, Z~_k):
///   V~ <- V~ + Z~ Z~^T,  G~ <- G~ + (y_k - G~ Z~) Z~^T V~^{-1}.
/// The inverse follows the rank-one inverse update and is rebuilt from a
/// Cholesky factorization of V~ every refactor_period samples.
void rls_update(RlsState& state, const Vector& y, const Vector& Ztilde);

/// Rebuilds Vtilde_inv from Vtilde and checks the residual ||V V^{-1} - I||.
/// Throws NumericalError with a state summary on failure.
void refactor(RlsState& state);

/// Estimate over the samples t = p..k of the observation series (y_0..y_k must
/// be present), built by sequential rank-one updates starting from lambda I.
RlsState batch_fit(const Series& observations, std::size_t k, const ScalingMatrix& D, double lambda,
                   int refactor_period = kDefaultRefactorPeriod);

/// The same estimate from the closed form: the Gram matrix and cross term are
/// summed and G~ = S~ V~^{-1} is formed with one explicit inverse. Numerically
/// fragile on long, strongly correlated histories.
RlsState direct_fit(const Series& observations, std::size_t k, const ScalingMatrix& D, double lambda,
                    int refactor_period = kDefaultRefactorPeriod);

/// Generalized ridge solution on unscaled regressors,
///   G = (sum y_t Z_t^T) (lambda D^{-2} + sum Z_t Z_t^T)^{-1},  t = p..k.
/// Reference path for the balanced estimator: G~ = G D^{-1}, so G~ Z~ = G Z.
Matrix ridge_solution(const Series& observations, std::size_t k, const ScalingMatrix& D, double lambda);

}  // namespace opf
