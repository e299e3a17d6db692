#include "opf/kalman.hpp"

#include <cmath>
#include <sstream>

namespace opf {

namespace {

Eigen::LLT<Matrix> factor_innovation(const Matrix& S) {
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) throw NumericalError("innovation covariance is not positive definite");
    return llt;
}

}  // namespace

Matrix MarkovParams::stacked() const {
    if (blocks.empty()) return {};
    const auto m = blocks.front().rows();
    Matrix G(m, m * p);
    for (int i = 0; i < p; ++i) G.middleCols(i * m, m) = blocks[i];
    return G;
}

std::vector<double> MarkovParams::block_norms_by_lag() const {
    std::vector<double> norms(blocks.size());
    for (std::size_t t = 0; t < blocks.size(); ++t) norms[t] = spectral_norm(blocks[blocks.size() - 1 - t]);
    return norms;
}

double MarkovParams::fitted_decay_constant(double rho) const {
    double M = 0.0;
    const auto norms = block_norms_by_lag();
    for (std::size_t t = 0; t < norms.size(); ++t) M = std::max(M, norms[t] / std::pow(rho, static_cast<double>(t)));
    return M;
}

Matrix riccati_step(const SystemModel& model, const Matrix& P) {
    const Matrix& A = model.A;
    const Matrix& C = model.C;
    const Matrix APCt = A * P * C.transpose();
    const auto llt = factor_innovation(C * P * C.transpose() + model.R);
    Matrix next = A * P * A.transpose() + model.Q - APCt * llt.solve(APCt.transpose());
    return 0.5 * (next + next.transpose());
}

SteadyFilter solve_dare(const SystemModel& model, double tol, int max_iter) {
    require_valid(model);
    SteadyFilter f;
    Matrix P = model.Q;
    bool converged = false;
    for (int it = 1; it <= max_iter; ++it) {
        Matrix next = riccati_step(model, P);
        const double delta = (next - P).norm();
        P = std::move(next);
        f.iterations = it;
        if (delta < tol) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream os;
        os << "Riccati iteration did not converge in " << max_iter << " steps: detectability-violation suspected";
        throw NumericalError(os.str());
    }
    const Matrix& C = model.C;
    f.P = P;
    f.Rbar = C * P * C.transpose() + model.R;
    const auto llt = factor_innovation(f.Rbar);
    f.L = llt.solve((model.A * P * C.transpose()).transpose()).transpose();
    f.residual = (riccati_step(model, P) - P).norm();

    const double rho = spectral_radius(model.A - f.L * C);
    if (!(rho < 1.0)) {
        std::ostringstream os;
        os << "closed loop A - LC is not stable (spectral radius " << rho << ")";
        throw NumericalError(os.str());
    }
    return f;
}

FilterOutput run_steady_predictor(const SteadyFilter& filter, const SystemModel& model, const Series& observations) {
    FilterOutput out;
    out.predictions.reserve(observations.size());
    out.innovations.reserve(observations.size());
    out.states.reserve(observations.size());
    Vector x = Vector::Zero(model.state_dim());
    for (const auto& y : observations) {
        if (y.size() != model.output_dim()) throw StructuralError("observation has the wrong dimension");
        Vector yhat = model.C * x;
        Vector e = y - yhat;
        out.states.push_back(x);
        x = model.A * x + filter.L * e;
        out.predictions.push_back(std::move(yhat));
        out.innovations.push_back(std::move(e));
    }
    return out;
}

FilterOutput run_steady_predictor(const SteadyFilter& filter, const SystemModel& model, const Trajectory& traj) {
    return run_steady_predictor(filter, model, traj.observations);
}

MarkovParams markov_params(const SystemModel& model, const SteadyFilter& filter, int p) {
    if (p < 1) throw ParameterError("Markov horizon p must be at least 1");
    const Matrix closed = model.A - filter.L * model.C;
    MarkovParams mp;
    mp.p = p;
    mp.blocks.resize(p);
    Matrix acc = filter.L;  // (A-LC)^t L
    for (int t = 0; t < p; ++t) {
        mp.blocks[p - 1 - t] = model.C * acc;
        acc = closed * acc;
    }
    return mp;
}

}  // namespace opf
