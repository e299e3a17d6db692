#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace opf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A time series of equally sized vectors, index 0 first.
using Series = std::vector<Vector>;

// Error hierarchy. Every error thrown by the library derives from opf::Error
// so callers (CLI, bindings) can map them to exit codes uniformly.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// Inconsistent shapes between the matrices of a model or an API call.
class StructuralError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "structural"; }
};

/// A tuning parameter is outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parameter"; }
};

/// Factorization, convergence or consistency-check failure.
class NumericalError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "numerical"; }
};

/// API misuse, e.g. breaking the predict/observe alternation.
class UsageError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "usage"; }
};

/// Experiment configuration could not be parsed or validated.
class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config"; }
};

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Matrix& M);

/// Largest singular value.
double spectral_norm(const Matrix& M);

}  // namespace opf
