#pragma once

#include "opf/common.hpp"
#include "opf/predictor.hpp"
#include "opf/sysmodel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace opf::harness {

/// One entry of an experiment's algorithm grid.
struct MethodSpec {
    enum class Kind { Opf, Uniform, Kalman };

    Kind kind = Kind::Opf;
    bool gamma_auto = false;  // resolve gamma to rho(A - LC) of the true model
    double gamma = 1.0;
    double alpha = 1.0;
    std::optional<double> beta;    // overrides the experiment default
    std::optional<double> lambda;  // overrides the experiment default
    EpochInit init = EpochInit::Iterative;

    /// Stable identifier, e.g. "opf:gamma=auto", "uniform:alpha=0.99", "kalman".
    std::string label() const;
};

/// Parses "opf gamma=0.9 beta=3", "uniform alpha=0.99", "kalman".
MethodSpec parse_method(const std::string& text);

enum class DecompositionMode { None, EpochEnds, Strided };

struct ExperimentConfig {
    std::string name;
    SystemModel model;
    std::optional<Vector> x0;
    std::size_t T_init = 60;
    int N_E = 7;
    double beta = 2.5;
    double lambda = 1.0;
    int refactor_period = kDefaultRefactorPeriod;
    std::vector<MethodSpec> grid;
    int seeds = 20;
    std::uint64_t base_seed = 1;
    std::string out = "results";
    int workers = 1;
    std::size_t regret_stride = 1;
    DecompositionMode decomposition = DecompositionMode::None;
    std::size_t decomposition_stride = 0;

    OpfParams params_for(const MethodSpec& method, double gamma) const;
    /// Last observation index 2 T_{N_E} - 2; trajectories hold y_0..y_N.
    std::size_t horizon() const;
};

/// Flat "key = value" text, '#' starts a comment. Matrix-valued keys (A, C,
/// Q, R, x0) take matrix expressions; 'method' may repeat and appends to the
/// grid. Errors carry the source name, line number and key.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");

/// Loads a builtin by name, otherwise reads the file at path_or_name.
ExperimentConfig load_config(const std::string& path_or_name);

/// Checks grid, forgetting factors and model. Throws ConfigError.
void validate_config(const ExperimentConfig& config);

/// Canonical text; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& config);

/// FNV-1a over the canonical text without run-only fields (out, workers).
std::uint64_t config_hash(const ExperimentConfig& config);
std::string hash_hex(std::uint64_t hash);

std::vector<std::string> builtin_names();
std::string builtin_text(const std::string& name);
ExperimentConfig builtin_config(const std::string& name);

}  // namespace opf::harness
