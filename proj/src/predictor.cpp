#include "opf/predictor.hpp"

#include <cmath>
#include <sstream>

namespace opf {

const Epoch& EpochSchedule::epoch_at(std::size_t k) const {
    for (const auto& e : epochs)
        if (k >= e.first_step() && k <= e.last_step()) return e;
    throw ParameterError("step " + std::to_string(k) + " is outside the prediction schedule");
}

int horizon_for(double beta, std::size_t T) {
    const int p = static_cast<int>(std::ceil(beta * std::log(static_cast<double>(T))));
    return std::clamp(p, 1, static_cast<int>(T) - 1);
}

void validate(const OpfParams& params) {
    if (!(params.beta > 0.0)) throw ParameterError("beta must be positive");
    if (!(params.lambda > 0.0)) throw ParameterError("lambda must be positive");
    if (!(params.gamma > 0.0 && params.gamma <= 1.0)) throw ParameterError("gamma must lie in (0, 1]");
    if (params.N_E < 1) throw ParameterError("N_E must be at least 1");
    if (params.T_init < 1) throw ParameterError("T_init must be at least 1");
    if (params.refactor_period < 1) throw ParameterError("refactor_period must be positive");
    const double p1 = std::ceil(params.beta * std::log(static_cast<double>(params.T_init + 1)));
    if (static_cast<double>(params.T_init) < p1) {
        std::ostringstream os;
        os << "T_init = " << params.T_init << " is shorter than the first past horizon p_1 = " << p1;
        throw ParameterError(os.str());
    }
}

EpochSchedule epoch_schedule(const OpfParams& params) {
    validate(params);
    EpochSchedule s;
    s.epochs.reserve(params.N_E);
    for (int l = 1; l <= params.N_E; ++l) {
        Epoch e;
        e.index = l;
        e.T = (std::size_t{1} << (l - 1)) * params.T_init + 1;
        e.p = horizon_for(params.beta, e.T);
        s.epochs.push_back(e);
    }
    return s;
}

double compute_beta(const SpectralInfo& info) {
    if (!(info.rho_closed > 0.0 && info.rho_closed < 1.0))
        throw ParameterError("compute_beta needs rho(A - LC) in (0, 1)");
    return (2.0 * info.kappa + 1.0) / std::log(1.0 / info.rho_closed);
}

OpfSession::OpfSession(const OpfParams& params, Eigen::Index output_dim)
    : OpfSession(params, output_dim, Forgetting::balanced(params.gamma)) {}

OpfSession::OpfSession(const OpfParams& params, Eigen::Index output_dim, Forgetting forgetting)
    : params_(params), m_(output_dim), forgetting_(forgetting), schedule_(epoch_schedule(params)) {
    if (m_ < 1) throw ParameterError("output dimension must be at least 1");
    if (!(forgetting.factor > 0.0 && forgetting.factor <= 1.0))
        throw ParameterError("forgetting factor must lie in (0, 1]");
    // alpha = 1 runs through the balanced code path with gamma = 1.
    uniform_path_ = forgetting.kind == Forgetting::Kind::Uniform && forgetting.factor < 1.0;
    history_.reserve(schedule_.required_length());
}

Vector OpfSession::current_regressor() const {
    const Vector z = regressor(history_, step(), scaling_.p);
    return uniform_path_ ? z : scaling_.apply(z);
}

void OpfSession::start_epoch(const Epoch& epoch) {
    epoch_ = epoch.index;
    const double gamma = forgetting_.kind == Forgetting::Kind::Balanced ? forgetting_.factor : 1.0;
    scaling_ = scaling_matrix(epoch.p, gamma, m_);
    const std::size_t last_sample = epoch.T - 1;

    if (!uniform_path_) {
        rls_ = params_.init == EpochInit::Direct
                   ? direct_fit(history_, last_sample, scaling_, params_.lambda, params_.refactor_period)
                   : batch_fit(history_, last_sample, scaling_, params_.lambda, params_.refactor_period);
        return;
    }
    const double alpha = forgetting_.factor;
    const auto d = scaling_.dim();
    weighted_gram_ = Matrix::Zero(d, d);
    weighted_cross_ = Matrix::Zero(m_, d);
    for (std::size_t t = epoch.p; t <= last_sample; ++t) {
        const Vector z = regressor(history_, t, epoch.p);
        weighted_gram_ *= alpha;
        weighted_gram_.noalias() += z * z.transpose();
        weighted_cross_ *= alpha;
        weighted_cross_.noalias() += history_[t] * z.transpose();
    }
    refresh_uniform_factor();
}

void OpfSession::refresh_uniform_factor() {
    const auto d = weighted_gram_.rows();
    const Matrix V = params_.lambda * Matrix::Identity(d, d) + weighted_gram_;
    uniform_factor_.compute(V);
    uniform_singular_ = uniform_factor_.info() != Eigen::Success;
    if (uniform_singular_) {
        uniform_rank_revealing_.compute(V);
        if (!V.allFinite()) throw NumericalError("uniform-forgetting Gram matrix is not finite");
    }
}

Vector OpfSession::uniform_solve(const Vector& z) const {
    return uniform_singular_ ? Vector(uniform_rank_revealing_.solve(z)) : Vector(uniform_factor_.solve(z));
}

Vector OpfSession::predict() {
    if (in_warmup()) throw UsageError("predict() during warm-up: observe y_0..y_T_init first");
    if (finished()) throw UsageError("predict() after the last scheduled step");
    if (pending_) throw UsageError("predict() called twice without observe()");

    const std::size_t k = step();
    if (epoch_ == 0 || k > schedule_.epochs[epoch_ - 1].last_step()) start_epoch(schedule_.epochs[epoch_]);

    const Vector z = current_regressor();
    last_prediction_ = uniform_path_ ? Vector(weighted_cross_ * uniform_solve(z)) : opf::predict(rls_, z);
    pending_ = true;
    return last_prediction_;
}

void OpfSession::observe(const Vector& y) {
    if (y.size() != m_) throw StructuralError("observation has the wrong dimension");
    if (in_warmup()) {
        history_.push_back(y);
        return;
    }
    if (finished()) throw UsageError("observe() after the last scheduled step");
    if (!pending_) throw UsageError("observe() without a preceding predict()");

    const Vector z = current_regressor();
    if (uniform_path_) {
        const double alpha = forgetting_.factor;
        weighted_gram_ *= alpha;
        weighted_gram_.noalias() += z * z.transpose();
        weighted_cross_ *= alpha;
        weighted_cross_.noalias() += y * z.transpose();
        refresh_uniform_factor();
    } else {
        rls_update(rls_, y, z);
    }
    history_.push_back(y);
    pending_ = false;
}

OpfRun run_session(const Series& observations, const OpfParams& params, Forgetting forgetting) {
    if (observations.empty()) throw StructuralError("empty observation stream");
    OpfSession session(params, observations.front().size(), forgetting);
    const auto& schedule = session.schedule();
    if (observations.size() < schedule.required_length()) {
        std::ostringstream os;
        os << "observation stream too short: need " << schedule.required_length() << ", got " << observations.size();
        throw ParameterError(os.str());
    }

    OpfRun run;
    run.first_step = schedule.first_step();
    run.predictions.reserve(schedule.last_step() - schedule.first_step() + 1);
    run.horizon.reserve(run.predictions.capacity());
    for (std::size_t k = 0; k <= params.T_init; ++k) session.observe(observations[k]);
    for (std::size_t k = schedule.first_step(); k <= schedule.last_step(); ++k) {
        run.predictions.push_back(session.predict());
        const Epoch& epoch = schedule.epochs[session.current_epoch() - 1];
        run.horizon.push_back(epoch.p);
        session.observe(observations[k]);
        if (k == epoch.last_step()) run.epochs.push_back({epoch, session.state().Gtilde, session.state().samples});
    }
    return run;
}

OpfRun run_opf(const Series& observations, const OpfParams& params) {
    return run_session(observations, params, Forgetting::balanced(params.gamma));
}

OpfRun run_uniform_forgetting(const Series& observations, const OpfParams& params, double alpha) {
    return run_session(observations, params, Forgetting::uniform(alpha));
}

}  // namespace opf
