#include "opf/sysmodel.hpp"

#include "opf/kalman.hpp"

#include <cmath>
#include <sstream>

namespace opf {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kExplosiveTol = 1e-9;

bool is_symmetric(const Matrix& M) {
    return (M - M.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * std::max(1.0, M.cwiseAbs().maxCoeff());
}

double min_eigenvalue(const Matrix& M) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

// Symmetric square-root factor F with F F^T = S for a PSD matrix S.
Matrix psd_factor(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
    Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

int numerical_rank(const Matrix& M) {
    if (M.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(M);
    const auto& s = svd.singularValues();
    const double tol = std::max(M.rows(), M.cols()) * 1e-9 * std::max(1.0, s(0));
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) ++r;
    return r;
}

}  // namespace

std::string ValidationReport::summary() const {
    if (ok()) return "pass";
    std::ostringstream os;
    for (std::size_t i = 0; i < failures.size(); ++i) os << (i ? "; " : "") << failures[i];
    return os.str();
}

ValidationReport validate_model(const SystemModel& model) {
    const auto n = model.A.rows();
    const auto m = model.C.rows();
    if (n == 0 || model.A.cols() != n) throw StructuralError("A must be square and non-empty");
    if (m == 0 || model.C.cols() != n) throw StructuralError("C must be m x n with n = dim(A)");
    if (model.Q.rows() != n || model.Q.cols() != n) throw StructuralError("Q must be n x n");
    if (model.R.rows() != m || model.R.cols() != m) throw StructuralError("R must be m x m");

    ValidationReport report;
    if (!is_symmetric(model.Q)) report.failures.emplace_back("Q not symmetric");
    if (!is_symmetric(model.R)) report.failures.emplace_back("R not symmetric");
    if (!(min_eigenvalue(model.Q) > 0.0)) report.failures.emplace_back("Q not positive definite");
    if (!(min_eigenvalue(model.R) > 0.0)) report.failures.emplace_back("R not positive definite");
    const double rho = spectral_radius(model.A);
    if (rho > 1.0 + kExplosiveTol) {
        std::ostringstream os;
        os << "A is explosive (spectral radius " << rho << " > 1)";
        report.failures.push_back(os.str());
    }
    return report;
}

void require_valid(const SystemModel& model) {
    auto report = validate_model(model);
    if (!report.ok()) throw ParameterError("invalid model: " + report.summary());
}

std::mt19937_64 make_noise_stream(std::uint64_t seed, std::uint64_t replicate) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
    return std::mt19937_64(seq);
}

Trajectory simulate(const SystemModel& model, std::size_t horizon, std::uint64_t seed,
                    const std::optional<Vector>& x0, std::uint64_t replicate) {
    const auto n = model.state_dim();
    const auto m = model.output_dim();
    if (model.C.cols() != n || model.Q.rows() != n || model.R.rows() != m)
        throw StructuralError("model dimensions are inconsistent");
    if (horizon < 1) throw ParameterError("horizon must be at least 1");
    if (x0 && x0->size() != n) throw StructuralError("x0 has the wrong dimension");

    const Matrix Fq = psd_factor(model.Q);
    const Matrix Fr = psd_factor(model.R);
    auto rng = make_noise_stream(seed, replicate);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Eigen::Index d) {
        Vector z(d);
        for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(rng);
        return z;
    };

    Trajectory traj;
    traj.seed = seed;
    traj.states.reserve(horizon + 1);
    traj.observations.reserve(horizon + 1);
    Vector x = x0 ? *x0 : Vector::Zero(n);
    for (std::size_t k = 0; k <= horizon; ++k) {
        // Draw order per step: v_k, then w_k.
        Vector v = Fr * draw(m);
        Vector w = Fq * draw(n);
        traj.states.push_back(x);
        traj.observations.push_back(model.C * x + v);
        x = model.A * x + w;
    }
    return traj;
}

int jordan_order_at_one(const Matrix& A) {
    const auto n = A.rows();
    Eigen::EigenSolver<Matrix> es(A, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
    int multiplicity = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0)) < kUnitEigenvalueTol) ++multiplicity;
    if (multiplicity == 0) return 1;

    // rank((A-I)^j) decreases strictly until j reaches the largest block size.
    const Matrix shifted = A - Matrix::Identity(n, n);
    Matrix power = shifted;
    int previous = numerical_rank(power);
    int order = 1;
    for (int j = 2; j <= multiplicity; ++j) {
        power = power * shifted;
        const int r = numerical_rank(power);
        if (r == previous) break;
        previous = r;
        order = j;
    }
    return order;
}

SpectralInfo spectral_info(const SystemModel& model, const SteadyFilter& filter) {
    SpectralInfo info;
    info.rho_A = spectral_radius(model.A);
    info.rho_closed = spectral_radius(model.A - filter.L * model.C);
    info.kappa = jordan_order_at_one(model.A);
    info.sigma_R = min_eigenvalue(model.R);
    Eigen::SelfAdjointEigenSolver<Matrix> es(filter.Rbar, Eigen::EigenvaluesOnly);
    info.sigma_Rbar = es.eigenvalues().maxCoeff();
    return info;
}

}  // namespace opf
