#pragma once

#include "opf/common.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace opf {

struct SteadyFilter;

/// Partially observed linear Gaussian system
///   x_{k+1} = A x_k + w_k,  w_k ~ N(0, Q)
///   y_k     = C x_k + v_k,  v_k ~ N(0, R)
struct SystemModel {
    Matrix A;
    Matrix C;
    Matrix Q;
    Matrix R;

    Eigen::Index state_dim() const { return A.rows(); }
    Eigen::Index output_dim() const { return C.rows(); }
};

struct ValidationReport {
    std::vector<std::string> failures;

    bool ok() const { return failures.empty(); }
    std::string summary() const;
};

/// Checks the invariants of a SystemModel. Shape mismatches throw
/// StructuralError; semantic violations are collected into the report.
ValidationReport validate_model(const SystemModel& model);

/// Like validate_model, but throws ParameterError listing every failure.
void require_valid(const SystemModel& model);

struct Trajectory {
    std::uint64_t seed = 0;
    Series states;        // x_0 .. x_N
    Series observations;  // y_0 .. y_N

    std::size_t horizon() const { return observations.empty() ? 0 : observations.size() - 1; }
};

/// The generator behind every simulation. A trajectory with (seed, replicate)
/// always draws from the same substream; results are reproducible bit for bit
/// within one build.
std::mt19937_64 make_noise_stream(std::uint64_t seed, std::uint64_t replicate = 0);

/// Draws x_0..x_N and y_0..y_N. Q and R may be only positive semidefinite
/// (a zero covariance produces a noiseless component); x0 defaults to zero.
Trajectory simulate(const SystemModel& model, std::size_t horizon, std::uint64_t seed,
                    const std::optional<Vector>& x0 = std::nullopt, std::uint64_t replicate = 0);

struct SpectralInfo {
    double rho_A = 0.0;
    double rho_closed = 0.0;
    int kappa = 1;          // largest Jordan block of A at eigenvalue 1 (1 if none)
    double sigma_R = 0.0;   // min eigenvalue of R
    double sigma_Rbar = 0.0;  // max eigenvalue of Rbar
};

/// Eigenvalues within this distance of 1 count as "at 1".
inline constexpr double kUnitEigenvalueTol = 1e-6;

/// Order of the largest Jordan block of A for the eigenvalue 1, read off the
/// numerical ranks of (A - I)^j. Returns 1 when 1 is not an eigenvalue.
int jordan_order_at_one(const Matrix& A);

SpectralInfo spectral_info(const SystemModel& model, const SteadyFilter& filter);

}  // namespace opf
