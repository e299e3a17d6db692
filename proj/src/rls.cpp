#include "opf/rls.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace opf {

ScalingMatrix scaling_matrix(int p, double gamma, Eigen::Index m) {
    if (p < 1) throw ParameterError("scaling matrix needs p >= 1");
    if (m < 1) throw ParameterError("scaling matrix needs m >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("forgetting factor gamma must lie in (0, 1]");
    ScalingMatrix D;
    D.p = p;
    D.gamma = gamma;
    D.diag.resize(p * m);
    double w = 1.0;
    for (int lag = p - 1; lag >= 0; --lag) {
        D.diag.segment(lag * m, m).setConstant(w);
        w *= gamma;
    }
    return D;
}

Vector regressor(const Series& observations, std::size_t k, int p) {
    if (p < 1 || k < static_cast<std::size_t>(p)) throw ParameterError("regressor Z_{k,p} needs k >= p >= 1");
    if (k > observations.size()) throw StructuralError("regressor window extends past the recorded history");
    const auto m = observations[k - 1].size();
    Vector z(m * p);
    for (int i = 0; i < p; ++i) z.segment(i * m, m) = observations[k - p + i];
    return z;
}

RlsState::RlsState(Eigen::Index m, Eigen::Index dim, double lambda, int period)
    : Gtilde(Matrix::Zero(m, dim)),
      Vtilde(lambda * Matrix::Identity(dim, dim)),
      Vtilde_inv(Matrix::Identity(dim, dim) / lambda),
      refactor_period(period) {
    if (!(lambda > 0.0)) throw ParameterError("regularization lambda must be positive");
    if (period < 1) throw ParameterError("refactor period must be positive");
}

Vector predict(const RlsState& state, const Vector& Ztilde) {
    if (Ztilde.size() != state.regressor_dim()) throw StructuralError("regressor dimension does not match the state");
    return state.Gtilde * Ztilde;
}

void rls_update(RlsState& state, const Vector& y, const Vector& Ztilde) {
    if (Ztilde.size() != state.regressor_dim() || y.size() != state.output_dim())
        throw StructuralError("sample dimensions do not match the state");

    const Vector u = state.Vtilde_inv * Ztilde;
    const double denom = 1.0 + Ztilde.dot(u);
    // V_new^{-1} z = u / (1 + z^T u)
    const Vector gain = u / denom;
    state.Vtilde.selfadjointView<Eigen::Lower>().rankUpdate(Ztilde);
    state.Vtilde.triangularView<Eigen::StrictlyUpper>() = state.Vtilde.transpose();
    state.Vtilde_inv.noalias() -= gain * u.transpose();
    state.Vtilde_inv = 0.5 * (state.Vtilde_inv + state.Vtilde_inv.transpose()).eval();

    const Vector residual = y - state.Gtilde * Ztilde;
    state.Gtilde.noalias() += residual * gain.transpose();
    ++state.samples;

    if (++state.steps_since_refactor >= state.refactor_period) refactor(state);
}

void refactor(RlsState& state) {
    const auto d = state.regressor_dim();
    Eigen::LLT<Matrix> llt(state.Vtilde);
    auto dump = [&](const std::string& what) {
        std::ostringstream os;
        os << what << " [dim=" << d << " samples=" << state.samples << " ||V||_F=" << state.Vtilde.norm()
           << " ||Vinv||_F=" << state.Vtilde_inv.norm() << " ||G||_F=" << state.Gtilde.norm() << "]";
        return os.str();
    };
    if (llt.info() != Eigen::Success) throw NumericalError(dump("Gram matrix lost positive definiteness"));
    Matrix inv = llt.solve(Matrix::Identity(d, d));
    inv = 0.5 * (inv + inv.transpose()).eval();

    // Residual bound: max(1e-6, d * eps * cond_1(V)).
    const double cond = state.Vtilde.cwiseAbs().colwise().sum().maxCoeff() * inv.cwiseAbs().colwise().sum().maxCoeff();
    const double tol = std::max(1e-6, static_cast<double>(d) * std::numeric_limits<double>::epsilon() * cond);
    const double resid = (state.Vtilde * inv - Matrix::Identity(d, d)).norm() / std::sqrt(static_cast<double>(d));
    if (!(resid <= tol)) {
        std::ostringstream os;
        os << "Gram inverse inconsistent: residual " << resid << " > " << tol;
        throw NumericalError(dump(os.str()));
    }
    state.Vtilde_inv = std::move(inv);
    state.steps_since_refactor = 0;
}

RlsState batch_fit(const Series& observations, std::size_t k, const ScalingMatrix& D, double lambda,
                   int refactor_period) {
    if (observations.empty()) throw StructuralError("empty observation series");
    const auto m = observations.front().size();
    if (D.dim() % m != 0 || D.dim() / m != D.p) throw StructuralError("scaling matrix does not match the output dimension");
    if (k >= observations.size()) throw StructuralError("batch_fit index past the end of the series");
    RlsState state(m, D.dim(), lambda, refactor_period);
    for (std::size_t t = D.p; t <= k; ++t) rls_update(state, observations[t], D.apply(regressor(observations, t, D.p)));
    return state;
}

RlsState direct_fit(const Series& observations, std::size_t k, const ScalingMatrix& D, double lambda,
                    int refactor_period) {
    if (observations.empty()) throw StructuralError("empty observation series");
    const auto m = observations.front().size();
    if (k >= observations.size()) throw StructuralError("direct_fit index past the end of the series");
    RlsState state(m, D.dim(), lambda, refactor_period);
    Matrix S = Matrix::Zero(m, D.dim());
    for (std::size_t t = D.p; t <= k; ++t) {
        const Vector z = D.apply(regressor(observations, t, D.p));
        state.Vtilde.selfadjointView<Eigen::Lower>().rankUpdate(z);
        S.noalias() += observations[t] * z.transpose();
        ++state.samples;
    }
    state.Vtilde.triangularView<Eigen::StrictlyUpper>() = state.Vtilde.transpose();
    state.Vtilde_inv = state.Vtilde.inverse();
    state.Gtilde = S * state.Vtilde_inv;
    return state;
}

Matrix ridge_solution(const Series& observations, std::size_t k, const ScalingMatrix& D, double lambda) {
    if (observations.empty()) throw StructuralError("empty observation series");
    if (!(lambda > 0.0)) throw ParameterError("regularization lambda must be positive");
    const auto m = observations.front().size();
    const auto d = D.dim();
    Matrix V = Matrix(lambda * D.inverse_squared().asDiagonal());
    Matrix S = Matrix::Zero(m, d);
    for (std::size_t t = D.p; t <= k; ++t) {
        const Vector z = regressor(observations, t, D.p);
        V.noalias() += z * z.transpose();
        S.noalias() += observations[t] * z.transpose();
    }
    Eigen::LLT<Matrix> llt(V);
    if (llt.info() != Eigen::Success) throw NumericalError("ridge normal matrix is not positive definite");
    return llt.solve(S.transpose()).transpose();
}

}  // namespace opf
