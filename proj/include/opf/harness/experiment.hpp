#pragma once

#include "opf/diagnostics.hpp"
#include "opf/harness/config.hpp"
#include "opf/kalman.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace opf::harness {

struct RunResult {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::size_t method_index = 0;
    MethodSpec method;
    std::string label;
    double factor = 1.0;  // resolved gamma (opf), alpha (uniform), 1 for kalman
    double beta = 0.0;
    double lambda = 0.0;
    std::string status = "ok";

    RegretRecord regret;
    std::vector<std::size_t> epoch_ends;
    std::vector<int> epoch_p;
    double identity_defect = 0.0;
    double boundary_spike = 0.0;  // worst loss / trailing-median ratio at an epoch start

    bool has_decomposition = false;
    DecompositionSeries decomposition;

    // Per-trajectory checks, filled on the kalman row of each seed.
    double whiteness_worst = 0.0;
    double whiteness_threshold = 0.0;
    double pe_ratio = 0.0;

    double wall_seconds = 0.0;

    bool ok() const { return status == "ok"; }
};

struct ExperimentResult {
    ExperimentConfig config;
    std::uint64_t hash = 0;
    SteadyFilter filter;
    SpectralInfo spectral;
    double gamma_auto = 1.0;
    EpochSchedule schedule;  // with the experiment-level beta
    std::vector<RunResult> runs;  // ordered by (seed, grid position)

    std::vector<const RunResult*> runs_for(const std::string& label) const;
};

/// Replaces the grid entries a swept parameter applies to. gamma rewrites the
/// opf entries, alpha the uniform entries, beta every learning entry. Values
/// are numbers ("auto" is accepted for gamma).
ExperimentConfig sweep_config(const ExperimentConfig& config, const std::string& parameter,
                              const std::vector<std::string>& values);

/// Simulates one trajectory per seed, runs every grid method on it and
/// collects regret and diagnostics. Per-run failures are recorded in
/// RunResult::status; other runs proceed.
ExperimentResult run_experiment(const ExperimentConfig& config);

ExperimentResult sweep(const ExperimentConfig& config, const std::string& parameter,
                       const std::vector<std::string>& values);

/// Writes regret.csv, decomposition.csv, summary.csv and run_meta.json.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

/// Largest ratio loss(T_l) / median(loss over the window steps before T_l)
/// over the epoch starts l >= 2.
double epoch_boundary_spike(const RegretRecord& record, const EpochSchedule& schedule, std::size_t window = 50);

}  // namespace opf::harness
