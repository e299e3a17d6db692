#pragma once

#include "opf/common.hpp"
#include "opf/rls.hpp"
#include "opf/sysmodel.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace opf {

/// How each epoch's estimator is seeded from the recorded history.
enum class EpochInit {
    Iterative,  // sequential rank-one updates (default)
    Direct,     // closed form with one explicit inverse
};

struct OpfParams {
    double beta = 2.5;
    double lambda = 1.0;
    double gamma = 1.0;
    std::size_t T_init = 60;
    int N_E = 7;
    int refactor_period = kDefaultRefactorPeriod;
    EpochInit init = EpochInit::Iterative;
};

struct Epoch {
    int index = 0;      // l, starting at 1
    std::size_t T = 0;  // first prediction step, 2^{l-1} T_init + 1
    int p = 0;          // ceil(beta ln T), clamped to T - 1

    std::size_t first_step() const { return T; }
    std::size_t last_step() const { return 2 * T - 2; }
};

struct EpochSchedule {
    std::vector<Epoch> epochs;

    std::size_t first_step() const { return epochs.front().first_step(); }
    std::size_t last_step() const { return epochs.back().last_step(); }
    /// Observations y_0..y_{last_step} are needed.
    std::size_t required_length() const { return last_step() + 1; }
    const Epoch& epoch_at(std::size_t k) const;
};

/// Past horizon ceil(beta ln T), clamped so that Z_{p,p} exists (p <= T - 1).
int horizon_for(double beta, std::size_t T);

void validate(const OpfParams& params);

EpochSchedule epoch_schedule(const OpfParams& params);

/// (2 kappa + 1) / ln(1 / rho(A - LC)); needs the ground-truth model.
double compute_beta(const SpectralInfo& info);

/// Which forgetting scheme the session applies.
struct Forgetting {
    enum class Kind { Balanced, Uniform };
    Kind kind = Kind::Balanced;
    double factor = 1.0;  // gamma for Balanced, alpha for Uniform

    static Forgetting balanced(double gamma) { return {Kind::Balanced, gamma}; }
    static Forgetting uniform(double alpha) { return {Kind::Uniform, alpha}; }
};

/// Online predictor driven one observation at a time. After the warm-up
/// (observations y_0..y_{T_init}), every step is predict() followed by
/// observe(); breaking that order throws UsageError.
class OpfSession {
public:
    /// Balanced forgetting with params.gamma.
    OpfSession(const OpfParams& params, Eigen::Index output_dim);
    OpfSession(const OpfParams& params, Eigen::Index output_dim, Forgetting forgetting);

    Vector predict();
    void observe(const Vector& y);

    /// Index of the next observation to be received.
    std::size_t step() const { return history_.size(); }
    bool in_warmup() const { return step() <= params_.T_init; }
    bool finished() const { return step() > schedule_.last_step(); }
    const EpochSchedule& schedule() const { return schedule_; }
    /// Current epoch's estimator; empty before the first prediction.
    const RlsState& state() const { return rls_; }
    int current_epoch() const { return epoch_; }

private:
    void start_epoch(const Epoch& epoch);
    Vector current_regressor() const;
    void refresh_uniform_factor();
    Vector uniform_solve(const Vector& z) const;

    OpfParams params_;
    Eigen::Index m_;
    Forgetting forgetting_;
    EpochSchedule schedule_;
    Series history_;
    int epoch_ = 0;
    bool pending_ = false;
    Vector last_prediction_;

    // balanced (and uniform with alpha = 1)
    ScalingMatrix scaling_;
    RlsState rls_;

    // uniform with alpha < 1: V = lambda I + W, W <- alpha W + Z Z^T, S <- alpha S + y Z^T
    bool uniform_path_ = false;
    Matrix weighted_gram_;
    Matrix weighted_cross_;
    Eigen::LDLT<Matrix> uniform_factor_;
    // Used instead of the LDLT when lambda I + W is singular to working precision.
    Eigen::CompleteOrthogonalDecomposition<Matrix> uniform_rank_revealing_;
    bool uniform_singular_ = false;
};

struct EpochSnapshot {
    Epoch epoch;
    Matrix Gtilde_end;   // estimate after the last update of the epoch
    std::size_t samples = 0;
};

struct OpfRun {
    std::size_t first_step = 0;  // k of predictions[0]
    Series predictions;          // ytilde_k for k = first_step..last_step
    std::vector<int> horizon;    // p used at each prediction step
    std::vector<EpochSnapshot> epochs;

    const Vector& at(std::size_t k) const { return predictions.at(k - first_step); }
};

/// Algorithm driver: warm-up on y_0..y_{T_init}, then predict/observe through
/// every epoch. Needs observations.size() >= 2 T_{N_E} - 1.
OpfRun run_opf(const Series& observations, const OpfParams& params);

/// Same epoch structure with classical exponential down-weighting of samples
/// (weight alpha^{k-t}, unscaled regressors, lambda I not decayed).
OpfRun run_uniform_forgetting(const Series& observations, const OpfParams& params, double alpha);

OpfRun run_session(const Series& observations, const OpfParams& params, Forgetting forgetting);

}  // namespace opf
