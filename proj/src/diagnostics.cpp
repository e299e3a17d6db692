#include "opf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace opf {

namespace {

// ||X Vbar^{-1/2}||_2^2 = lambda_max((L^{-1} X^T)^T (L^{-1} X^T)) with Vbar = L L^T.
double whitened_norm_sq(const Eigen::LLT<Matrix>& llt, const Matrix& X) {
    const Matrix Y = llt.matrixL().solve(X.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(Y.transpose() * Y, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().maxCoeff());
}

double log_det(const Eigen::LLT<Matrix>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::LLT<Matrix> factor(const Matrix& V, const char* what) {
    Eigen::LLT<Matrix> llt(V);
    if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + " is not positive definite");
    return llt;
}

}  // namespace

double RegretRecord::identity_defect() const {
    double scale = 1.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        scale = std::max(scale, std::abs(cum_gap[i]) + 2.0 * std::abs(cum_martingale[i]) + std::abs(cum_regret[i]));
        worst = std::max(worst, std::abs(cum_regret[i] - cum_gap[i] - 2.0 * cum_martingale[i]));
    }
    return worst / scale;
}

RegretRecord regret_series(const Series& y, const Series& y_online, const Series& y_kalman, std::size_t first_step) {
    if (y.size() != y_online.size() || y.size() != y_kalman.size())
        throw StructuralError("regret_series needs equally long series");
    RegretRecord r;
    r.first_step = first_step;
    const auto n = y.size();
    r.online_loss.resize(n);
    r.kalman_loss.resize(n);
    r.cum_regret.resize(n);
    r.cum_gap.resize(n);
    r.cum_martingale.resize(n);
    double regret = 0.0, gap = 0.0, mart = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vector online_err = y[i] - y_online[i];
        const Vector innovation = y[i] - y_kalman[i];
        const Vector diff = y_kalman[i] - y_online[i];
        r.online_loss[i] = online_err.squaredNorm();
        r.kalman_loss[i] = innovation.squaredNorm();
        regret += r.online_loss[i] - r.kalman_loss[i];
        gap += diff.squaredNorm();
        mart += innovation.dot(diff);
        r.cum_regret[i] = regret;
        r.cum_gap[i] = gap;
        r.cum_martingale[i] = mart;
    }
    return r;
}

RegretRecord regret_series(const Series& observations, const OpfRun& run, const FilterOutput& kalman) {
    const auto first = run.first_step;
    const auto count = run.predictions.size();
    if (observations.size() < first + count || kalman.predictions.size() < first + count)
        throw StructuralError("run extends past the observations or the Kalman predictions");
    Series y(observations.begin() + first, observations.begin() + first + count);
    Series yk(kalman.predictions.begin() + first, kalman.predictions.begin() + first + count);
    return regret_series(y, run.predictions, yk, first);
}

void check_regret_identity(const RegretRecord& record, double tol) {
    const double defect = record.identity_defect();
    if (!(defect <= tol)) {
        std::ostringstream os;
        os << "regret decomposition identity violated: relative defect " << defect << " > " << tol;
        throw NumericalError(os.str());
    }
}

TruncationBias truncation_bias(const SystemModel& model, const SteadyFilter& filter, const FilterOutput& kalman,
                               int p) {
    if (p < 0) throw ParameterError("truncation bias needs p >= 0");
    const Matrix closed = model.A - filter.L * model.C;
    Matrix power = Matrix::Identity(closed.rows(), closed.cols());
    for (int i = 0; i < p; ++i) power = closed * power;
    const Matrix map = model.C * power;

    TruncationBias b;
    b.p = p;
    const auto n = kalman.states.size();
    if (n > static_cast<std::size_t>(p)) {
        b.values.reserve(n - p);
        for (std::size_t k = p; k < n; ++k) b.values.push_back(map * kalman.states[k - p]);
    }
    return b;
}

DecompositionInputs decomposition_inputs(const Series& observations, const FilterOutput& kalman,
                                         const TruncationBias& bias, std::size_t k, const ScalingMatrix& D,
                                         double lambda) {
    const int p = D.p;
    if (bias.p != p) throw StructuralError("bias series was computed for a different p");
    if (k < static_cast<std::size_t>(p)) throw ParameterError("decomposition needs k >= p");
    const auto m = observations.front().size();
    const auto cols = static_cast<Eigen::Index>(k - p + 1);
    DecompositionInputs in;
    in.B.resize(m, cols);
    in.E.resize(m, cols);
    in.Zbar.resize(D.dim(), cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        const std::size_t t = p + j;
        in.B.col(j) = bias.at(t);
        in.E.col(j) = kalman.innovations.at(t);
        in.Zbar.col(j) = regressor(observations, t, p);
    }
    in.Vbar = Matrix(lambda * D.inverse_squared().asDiagonal());
    in.Vbar.noalias() += in.Zbar * in.Zbar.transpose();
    in.S = Matrix::Zero(m, D.dim());
    for (Eigen::Index j = 0; j < cols; ++j) in.S.noalias() += observations[p + j] * in.Zbar.col(j).transpose();
    return in;
}

FactorReport error_decomposition(const DecompositionInputs& inputs, const MarkovParams& G, const ScalingMatrix& D,
                                 double lambda, const Vector& next_regressor) {
    if (inputs.B.cols() != inputs.E.cols() || inputs.E.cols() != inputs.Zbar.cols())
        throw StructuralError("decomposition inputs have inconsistent column counts");
    const auto llt = factor(inputs.Vbar, "Vbar");
    const Matrix Gp = G.stacked();
    if (Gp.cols() != D.dim()) throw StructuralError("Markov parameters do not match the scaling matrix");

    FactorReport r;
    r.regularization = whitened_norm_sq(llt, lambda * Gp * D.inverse_squared().asDiagonal());
    r.regression = whitened_norm_sq(llt, inputs.E * inputs.Zbar.transpose());
    r.bias = whitened_norm_sq(llt, inputs.B * inputs.Zbar.transpose());
    r.accumulation = llt.matrixL().solve(next_regressor).squaredNorm();
    r.logdet_V = log_det(llt) + 2.0 * D.diag.array().log().sum();
    r.trace_term = llt.matrixL().solve(inputs.Zbar).squaredNorm();
    return r;
}

DecompositionSeries decompose_run(const SystemModel& model, const SteadyFilter& filter, const Series& observations,
                                  const FilterOutput& kalman, const EpochSchedule& schedule, double gamma,
                                  double lambda, const OpfRun& run, RowPolicy policy) {
    const auto m = model.output_dim();
    DecompositionSeries out;
    out.steps.reserve(run.predictions.size());
    double accum = 0.0;

    for (const auto& epoch : schedule.epochs) {
        const int p = epoch.p;
        const ScalingMatrix D = scaling_matrix(p, gamma, m);
        const Vector dinv2 = D.inverse_squared();
        const Matrix Gp = markov_params(model, filter, p).stacked();
        const Matrix reg_map = lambda * Gp * dinv2.asDiagonal();
        const TruncationBias bias = truncation_bias(model, filter, kalman, p);
        const auto d = D.dim();

        Eigen::LLT<Matrix> llt = factor(Matrix(lambda * dinv2.asDiagonal()), "Vbar");
        Matrix EZ = Matrix::Zero(m, d);
        Matrix BZ = Matrix::Zero(m, d);
        auto absorb = [&](std::size_t t, const Vector& z) {
            llt.rankUpdate(z);
            EZ.noalias() += kalman.innovations[t] * z.transpose();
            BZ.noalias() += bias.at(t) * z.transpose();
        };
        for (std::size_t t = p; t < epoch.T; ++t) absorb(t, regressor(observations, t, p));

        for (std::size_t k = epoch.first_step(); k <= epoch.last_step(); ++k) {
            const Vector z = regressor(observations, k, p);
            const Vector w = llt.matrixL().solve(z);
            const Vector v = llt.matrixU().solve(w);  // Vbar_{k-1}^{-1} Z_k

            DecompositionStep s;
            s.k = k;
            s.p = p;
            s.accumulation = w.squaredNorm();
            accum += s.accumulation;
            s.accumulation_sum = accum;
            const Vector& b = bias.at(k);
            const Vector canceled = BZ * v - b;
            s.bias_norm = b.norm();
            s.canceled_bias_norm = canceled.norm();

            const Vector rebuilt = canceled + EZ * v - reg_map * v;
            const Vector actual = run.at(k) - kalman.predictions[k];
            s.gap_defect = (rebuilt - actual).norm() / std::max(actual.norm(), 1e-12);
            out.max_gap_defect = std::max(out.max_gap_defect, s.gap_defect);

            absorb(k, z);
            s.accumulation_normalized = llt.matrixL().solve(z).squaredNorm();
            out.steps.push_back(s);

            const bool epoch_end = k == epoch.last_step();
            const bool strided = policy.stride > 0 && (k - schedule.first_step()) % policy.stride == 0;
            if (!epoch_end && !strided) continue;

            DecompositionRow row;
            row.k = k;
            row.epoch = epoch.index;
            row.p = p;
            row.accumulation_sum = accum;
            row.factors.accumulation = s.accumulation;
            row.factors.regularization = whitened_norm_sq(llt, reg_map);
            row.factors.regression = whitened_norm_sq(llt, EZ);
            row.factors.bias = whitened_norm_sq(llt, BZ);
            row.factors.logdet_V = log_det(llt) + 2.0 * D.diag.array().log().sum();
            // tr(Zbar^T Vbar^{-1} Zbar) = d - lambda tr(Vbar^{-1} D^{-2})
            const Matrix Linv = llt.matrixL().solve(Matrix::Identity(d, d));
            const double reg_trace = (Linv.cwiseAbs2().colwise().sum().transpose().array() * dinv2.array()).sum();
            row.factors.trace_term = static_cast<double>(d) - lambda * reg_trace;
            out.rows.push_back(row);
        }
    }
    return out;
}

std::vector<double> persistent_excitation_ratio(const Series& observations, int p,
                                                const std::vector<std::size_t>& steps, double sigma_R) {
    if (!(sigma_R > 0.0)) throw ParameterError("sigma_R must be positive");
    if (steps.empty()) return {};
    std::vector<std::size_t> order(steps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return steps[a] < steps[b]; });

    const auto d = observations.front().size() * p;
    Matrix gram = Matrix::Zero(d, d);
    std::size_t t = p;
    std::vector<double> ratios(steps.size());
    for (auto idx : order) {
        const std::size_t k = steps[idx];
        if (k < static_cast<std::size_t>(p) || k >= observations.size())
            throw ParameterError("excitation step outside the observation range");
        for (; t <= k; ++t) {
            const Vector z = regressor(observations, t, p);
            gram.selfadjointView<Eigen::Lower>().rankUpdate(z);
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);  // reads the lower triangle
        ratios[idx] = es.eigenvalues()(0) / (sigma_R * static_cast<double>(k) / 4.0);
    }
    return ratios;
}

std::vector<std::vector<double>> regret_order_ratio(const RegretRecord& record, const std::vector<int>& orders,
                                                    const std::vector<std::size_t>& steps) {
    std::vector<std::vector<double>> out;
    out.reserve(steps.size());
    for (auto N : steps) {
        const double ln = std::log(static_cast<double>(N));
        if (!(ln > 1.0)) throw ParameterError("regret_order_ratio needs N > e");
        const double R = record.regret_at(N);
        std::vector<double> row;
        row.reserve(orders.size());
        for (int i : orders) row.push_back(R / std::pow(ln, i));
        out.push_back(std::move(row));
    }
    return out;
}

double WhitenessReport::worst() const {
    return normalized.empty() ? 0.0 : *std::max_element(normalized.begin(), normalized.end());
}

WhitenessReport whiteness_check(const Series& innovations, int max_lag) {
    const auto N = innovations.size();
    if (max_lag < 1 || N <= static_cast<std::size_t>(max_lag)) throw ParameterError("whiteness check needs N > max_lag >= 1");
    const auto m = innovations.front().size();
    auto autocov = [&](std::size_t lag) {
        Matrix G = Matrix::Zero(m, m);
        for (std::size_t k = 0; k + lag < N; ++k) G.noalias() += innovations[k + lag] * innovations[k].transpose();
        return Matrix(G / static_cast<double>(N - lag));
    };
    WhitenessReport r;
    const double base = autocov(0).norm();
    for (int lag = 1; lag <= max_lag; ++lag) r.normalized.push_back(base > 0.0 ? autocov(lag).norm() / base : 0.0);
    r.threshold = 4.0 / std::sqrt(static_cast<double>(N));
    r.pass = r.worst() < r.threshold;
    return r;
}

}  // namespace opf
