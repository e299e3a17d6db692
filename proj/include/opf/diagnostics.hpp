#pragma once

#include "opf/common.hpp"
#include "opf/kalman.hpp"
#include "opf/predictor.hpp"
#include "opf/rls.hpp"

#include <cstddef>
#include <vector>

namespace opf {

/// Per-step losses of the online and Kalman predictors and the split
///   R_k = L_k + 2 * sum e^T (yhat - ytilde),   L_k = sum ||yhat - ytilde||^2.
struct RegretRecord {
    std::size_t first_step = 0;
    std::vector<double> online_loss;
    std::vector<double> kalman_loss;
    std::vector<double> cum_regret;
    std::vector<double> cum_gap;
    std::vector<double> cum_martingale;

    std::size_t size() const { return online_loss.size(); }
    std::size_t last_step() const { return first_step + size() - 1; }
    double final_regret() const { return cum_regret.back(); }
    double regret_at(std::size_t k) const { return cum_regret.at(k - first_step); }
    /// Largest |R_k - L_k - 2 M_k| relative to the accumulated loss scale.
    double identity_defect() const;
};

/// The three series are aligned: element i belongs to step first_step + i.
RegretRecord regret_series(const Series& y, const Series& y_online, const Series& y_kalman,
                           std::size_t first_step = 0);

/// Builds the record over the steps covered by an online run.
RegretRecord regret_series(const Series& observations, const OpfRun& run, const FilterOutput& kalman);

/// Throws NumericalError if identity_defect() exceeds tol.
void check_regret_identity(const RegretRecord& record, double tol = 1e-8);

/// b_{k,p} = C (A - LC)^p xhat_{k-p}, defined for k >= p.
struct TruncationBias {
    int p = 0;
    Series values;  // values[k - p]

    const Vector& at(std::size_t k) const { return values.at(k - p); }
};

TruncationBias truncation_bias(const SystemModel& model, const SteadyFilter& filter, const FilterOutput& kalman, int p);

/// Stacked quantities for samples t = p..k of one epoch.
struct DecompositionInputs {
    Matrix B;     // m x (k-p+1), truncation biases
    Matrix E;     // m x (k-p+1), innovations
    Matrix Zbar;  // mp x (k-p+1), unscaled regressors
    Matrix Vbar;  // lambda D^{-2} + Zbar Zbar^T
    Matrix S;     // sum y_t Z_t^T
};

DecompositionInputs decomposition_inputs(const Series& observations, const FilterOutput& kalman,
                                         const TruncationBias& bias, std::size_t k, const ScalingMatrix& D,
                                         double lambda);

struct FactorReport {
    double regularization = 0.0;  // ||lambda G_p D^{-2} Vbar^{-1/2}||_2^2
    double regression = 0.0;      // ||E Zbar^T Vbar^{-1/2}||_2^2
    double bias = 0.0;            // ||B Zbar^T Vbar^{-1/2}||_2^2
    double accumulation = 0.0;    // ||Vbar^{-1/2} Z_next||_2^2
    double logdet_V = 0.0;        // log det V~ = log det Vbar + 2 log det D
    double trace_term = 0.0;      // tr(Zbar^T Vbar^{-1} Zbar)
};

/// All factors for one step; Vbar^{-1/2} acts through its Cholesky factor.
FactorReport error_decomposition(const DecompositionInputs& inputs, const MarkovParams& G, const ScalingMatrix& D,
                                 double lambda, const Vector& next_regressor);

/// Per-step output of decompose_run, keyed by the predicted step k.
struct DecompositionStep {
    std::size_t k = 0;
    int p = 0;
    double accumulation = 0.0;             // ||Vbar_{k-1}^{-1/2} Z_k||^2
    double accumulation_normalized = 0.0;  // ||Vbar_k^{-1/2} Z_k||^2, lies in [0, 1]
    double accumulation_sum = 0.0;
    double bias_norm = 0.0;           // ||b_k||
    double canceled_bias_norm = 0.0;  // ||sum b_l Z_l^T Vbar^{-1} Z_k - b_k||
    double gap_defect = 0.0;          // relative mismatch of the reconstructed ytilde - yhat
};

struct DecompositionRow {
    std::size_t k = 0;
    int epoch = 0;
    int p = 0;
    FactorReport factors;
    double accumulation_sum = 0.0;
};

struct DecompositionSeries {
    std::vector<DecompositionStep> steps;
    std::vector<DecompositionRow> rows;
    double max_gap_defect = 0.0;
};

/// Which steps get a full factor row; epoch ends are always included.
struct RowPolicy {
    std::size_t stride = 0;  // 0: epoch ends only
};

/// Streams the decomposition over a balanced-forgetting run with parameter
/// gamma. Model-known diagnostic: consumes the Kalman states and Markov
/// parameters of the true system, never feeds back into the predictor.
DecompositionSeries decompose_run(const SystemModel& model, const SteadyFilter& filter, const Series& observations,
                                  const FilterOutput& kalman, const EpochSchedule& schedule, double gamma,
                                  double lambda, const OpfRun& run, RowPolicy policy = {});

/// lambda_min(sum_{t=p..k} Z_t Z_t^T) / (sigma_R k / 4) at each requested k.
std::vector<double> persistent_excitation_ratio(const Series& observations, int p,
                                                const std::vector<std::size_t>& steps, double sigma_R);

/// R_N / ln^i N for each sample step N (rows) and order i (columns).
std::vector<std::vector<double>> regret_order_ratio(const RegretRecord& record, const std::vector<int>& orders,
                                                    const std::vector<std::size_t>& steps);

struct WhitenessReport {
    std::vector<double> normalized;  // ||Gamma_tau||_F / ||Gamma_0||_F, tau = 1..max_lag
    double threshold = 0.0;          // 4 / sqrt(N)
    bool pass = false;

    double worst() const;
};

WhitenessReport whiteness_check(const Series& innovations, int max_lag = 5);

}  // namespace opf
