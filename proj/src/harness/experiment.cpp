#include "opf/harness/experiment.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <thread>

namespace opf::harness {

namespace {

constexpr double kIdentityTolerance = 1e-8;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    return 0.5 * (hi + v[mid - 1]);
}

struct SeedContext {
    std::uint64_t seed;
    Trajectory traj;
    FilterOutput kalman;
};

RunResult run_method(const ExperimentConfig& config, const ExperimentResult& shared, const SeedContext& ctx,
                     std::size_t index) {
    const auto& method = config.grid[index];
    RunResult r;
    r.config_hash = shared.hash;
    r.seed = ctx.seed;
    r.method_index = index;
    r.method = method;
    r.label = method.label();
    r.beta = method.beta.value_or(config.beta);
    r.lambda = method.lambda.value_or(config.lambda);
    const auto start = std::chrono::steady_clock::now();
    const Series& y = ctx.traj.observations;

    try {
        const double gamma = method.gamma_auto ? shared.gamma_auto : method.gamma;
        const OpfParams params = config.params_for(method, method.kind == MethodSpec::Kind::Opf ? gamma : 1.0);
        const EpochSchedule schedule = epoch_schedule(params);
        for (const auto& e : schedule.epochs) {
            r.epoch_ends.push_back(e.last_step());
            r.epoch_p.push_back(e.p);
        }

        switch (method.kind) {
            case MethodSpec::Kind::Kalman: {
                r.factor = 1.0;
                const auto first = schedule.first_step();
                const auto count = schedule.last_step() - first + 1;
                Series obs(y.begin() + first, y.begin() + first + count);
                Series yk(ctx.kalman.predictions.begin() + first, ctx.kalman.predictions.begin() + first + count);
                r.regret = regret_series(obs, yk, yk, first);
                break;
            }
            case MethodSpec::Kind::Opf: {
                r.factor = gamma;
                const OpfRun run = run_opf(y, params);
                r.regret = regret_series(y, run, ctx.kalman);
                if (config.decomposition != DecompositionMode::None) {
                    RowPolicy policy;
                    if (config.decomposition == DecompositionMode::Strided) policy.stride = config.decomposition_stride;
                    r.decomposition = decompose_run(config.model, shared.filter, y, ctx.kalman, schedule, gamma,
                                                    params.lambda, run, policy);
                    r.has_decomposition = true;
                }
                break;
            }
            case MethodSpec::Kind::Uniform: {
                r.factor = method.alpha;
                const OpfRun run = run_uniform_forgetting(y, params, method.alpha);
                r.regret = regret_series(y, run, ctx.kalman);
                break;
            }
        }
        r.identity_defect = r.regret.identity_defect();
        check_regret_identity(r.regret, kIdentityTolerance);
        r.boundary_spike = epoch_boundary_spike(r.regret, schedule);
    } catch (const std::exception& e) {
        r.status = std::string("error: ") + e.what();
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::vector<RunResult> run_seed(const ExperimentConfig& config, const ExperimentResult& shared, std::size_t replicate) {
    const std::uint64_t seed = config.base_seed + replicate;
    std::vector<RunResult> out;
    SeedContext ctx{seed, {}, {}};
    try {
        ctx.traj = simulate(config.model, config.horizon(), seed, config.x0);
        ctx.kalman = run_steady_predictor(shared.filter, config.model, ctx.traj);
    } catch (const std::exception& e) {
        for (std::size_t i = 0; i < config.grid.size(); ++i) {
            RunResult r;
            r.config_hash = shared.hash;
            r.seed = seed;
            r.method_index = i;
            r.method = config.grid[i];
            r.label = r.method.label();
            r.status = std::string("error: ") + e.what();
            out.push_back(std::move(r));
        }
        return out;
    }

    for (std::size_t i = 0; i < config.grid.size(); ++i) {
        out.push_back(run_method(config, shared, ctx, i));
        auto& r = out.back();
        if (r.method.kind != MethodSpec::Kind::Kalman || !r.ok()) continue;
        try {
            const auto first = shared.schedule.first_step();
            Series innov(ctx.kalman.innovations.begin() + first, ctx.kalman.innovations.end());
            const auto white = whiteness_check(innov);
            r.whiteness_worst = white.worst();
            r.whiteness_threshold = white.threshold;
            const int p = shared.schedule.epochs.back().p;
            r.pe_ratio = persistent_excitation_ratio(ctx.traj.observations, p, {config.horizon()},
                                                     shared.spectral.sigma_R)[0];
        } catch (const std::exception& e) {
            r.status = std::string("error: ") + e.what();
        }
    }
    return out;
}

}  // namespace

std::vector<const RunResult*> ExperimentResult::runs_for(const std::string& label) const {
    std::vector<const RunResult*> out;
    for (const auto& r : runs)
        if (r.label == label) out.push_back(&r);
    return out;
}

double epoch_boundary_spike(const RegretRecord& record, const EpochSchedule& schedule, std::size_t window) {
    double worst = 0.0;
    for (std::size_t l = 1; l < schedule.epochs.size(); ++l) {
        const std::size_t k = schedule.epochs[l].first_step();
        if (k < record.first_step + window || k > record.last_step()) continue;
        const std::size_t i = k - record.first_step;
        std::vector<double> trailing(record.online_loss.begin() + (i - window), record.online_loss.begin() + i);
        const double med = median(std::move(trailing));
        if (med > 0.0) worst = std::max(worst, record.online_loss[i] / med);
    }
    return worst;
}

ExperimentConfig sweep_config(const ExperimentConfig& config, const std::string& parameter,
                              const std::vector<std::string>& values) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    using Kind = MethodSpec::Kind;
    auto applies = [&](const MethodSpec& m) {
        if (parameter == "gamma") return m.kind == Kind::Opf;
        if (parameter == "alpha") return m.kind == Kind::Uniform;
        if (parameter == "beta") return m.kind != Kind::Kalman;
        throw ConfigError("unknown sweep parameter '" + parameter + "' (expected gamma, alpha or beta)");
    };
    auto parse_value = [&](const std::string& v, MethodSpec& m) {
        if (parameter == "gamma" && v == "auto") {
            m.gamma_auto = true;
            return;
        }
        double x = 0.0;
        try {
            std::size_t used = 0;
            x = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw ConfigError("sweep value '" + v + "' is not a number");
        }
        if (parameter == "gamma") {
            m.gamma_auto = false;
            m.gamma = x;
        } else if (parameter == "alpha") {
            m.alpha = x;
        } else {
            m.beta = x;
        }
    };

    ExperimentConfig out = config;
    out.grid.clear();
    bool any = false;
    bool emitted = false;
    for (const auto& m : config.grid) {
        if (!applies(m)) {
            out.grid.push_back(m);
            continue;
        }
        any = true;
        // gamma and alpha sweeps collapse all matching entries onto the first one.
        if (parameter != "beta" && emitted) continue;
        for (const auto& v : values) {
            MethodSpec copy = m;
            parse_value(v, copy);
            out.grid.push_back(copy);
        }
        emitted = true;
    }
    if (!any) throw ConfigError("parameter '" + parameter + "' applies to no method in the grid of " + config.name);
    validate_config(out);
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    validate_config(config);
    ExperimentResult result;
    result.config = config;
    result.hash = config_hash(config);
    result.filter = solve_dare(config.model);
    result.spectral = spectral_info(config.model, result.filter);
    result.gamma_auto = result.spectral.rho_closed;
    result.schedule = epoch_schedule(config.params_for(MethodSpec{}, 1.0));

    const auto seeds = static_cast<std::size_t>(config.seeds);
    std::vector<std::vector<RunResult>> per_seed(seeds);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < seeds; i = next++) per_seed[i] = run_seed(config, result, i);
    };
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(config.workers), seeds);
    if (count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& group : per_seed)
        for (auto& r : group) result.runs.push_back(std::move(r));
    return result;
}

ExperimentResult sweep(const ExperimentConfig& config, const std::string& parameter,
                       const std::vector<std::string>& values) {
    return run_experiment(sweep_config(config, parameter, values));
}

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& config = result.config;
    const std::string hash = hash_hex(result.hash);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw Error("cannot write " + (dir / name).string());
        return f;
    };

    {
        auto f = open("regret.csv");
        f << "k,seed,method,gamma_or_alpha,online_loss,kalman_loss,cum_regret\n";
        for (const auto& r : result.runs) {
            if (!r.ok()) continue;
            const auto& rec = r.regret;
            for (std::size_t i = 0; i < rec.size(); ++i) {
                const std::size_t k = rec.first_step + i;
                const bool epoch_end = std::find(r.epoch_ends.begin(), r.epoch_ends.end(), k) != r.epoch_ends.end();
                if (i % config.regret_stride != 0 && !epoch_end) continue;
                f << k << ',' << r.seed << ',' << r.label << ',' << num(r.factor) << ',' << num(rec.online_loss[i])
                  << ',' << num(rec.kalman_loss[i]) << ',' << num(rec.cum_regret[i]) << '\n';
            }
        }
    }
    {
        auto f = open("decomposition.csv");
        f << "k,seed,method,reg_factor,regress_factor,bias_factor,accum_sum,logdet_V,trace_term\n";
        for (const auto& r : result.runs) {
            if (!r.ok() || !r.has_decomposition) continue;
            for (const auto& row : r.decomposition.rows) {
                f << row.k << ',' << r.seed << ',' << r.label << ',' << num(row.factors.regularization) << ','
                  << num(row.factors.regression) << ',' << num(row.factors.bias) << ',' << num(row.accumulation_sum)
                  << ',' << num(row.factors.logdet_V) << ',' << num(row.factors.trace_term) << '\n';
            }
        }
    }
    {
        auto f = open("summary.csv");
        const int ne = config.N_E;
        f << "config_hash,seed,method,gamma_or_alpha,beta,lambda,status,final_regret";
        for (int l = 1; l <= ne; ++l) f << ",k_e" << l << ",regret_e" << l;
        for (int i = 1; i <= 3; ++i)
            for (int l = 1; l <= ne; ++l) f << ",ratio" << i << "_e" << l;
        f << ",identity_defect,boundary_spike,accum_sum_N,regress_factor_N,reg_factor_N,bias_factor_N"
             ",bias_mean_last_epoch,canceled_bias_mean_last_epoch,max_gap_defect"
             ",whiteness_worst,whiteness_threshold,pe_ratio\n";
        for (const auto& r : result.runs) {
            f << hash << ',' << r.seed << ',' << r.label << ',' << num(r.factor) << ',' << num(r.beta) << ','
              << num(r.lambda) << ',';
            std::string status = r.status;
            std::replace(status.begin(), status.end(), ',', ';');
            std::replace(status.begin(), status.end(), '\n', ' ');
            f << status << ',';
            if (!r.ok()) {
                f << std::string(static_cast<std::size_t>(12 + 5 * ne), ',') << '\n';
                continue;
            }
            f << num(r.regret.final_regret());
            for (auto k : r.epoch_ends) f << ',' << k << ',' << num(r.regret.regret_at(k));
            const auto ratios = regret_order_ratio(r.regret, {1, 2, 3}, r.epoch_ends);
            for (int i = 0; i < 3; ++i)
                for (const auto& row : ratios) f << ',' << num(row[i]);
            f << ',' << num(r.identity_defect) << ',' << num(r.boundary_spike);
            if (r.has_decomposition && !r.decomposition.rows.empty()) {
                const auto& last = r.decomposition.rows.back();
                double bias = 0.0, canceled = 0.0;
                std::size_t n = 0;
                const std::size_t start = r.epoch_ends.size() > 1 ? r.epoch_ends[r.epoch_ends.size() - 2] + 1 : 0;
                for (const auto& s : r.decomposition.steps) {
                    if (s.k < start) continue;
                    bias += s.bias_norm;
                    canceled += s.canceled_bias_norm;
                    ++n;
                }
                f << ',' << num(last.accumulation_sum) << ',' << num(last.factors.regression) << ','
                  << num(last.factors.regularization) << ',' << num(last.factors.bias) << ',' << num(bias / n) << ','
                  << num(canceled / n) << ',' << num(r.decomposition.max_gap_defect);
            } else {
                f << ",,,,,,,";
            }
            if (r.method.kind == MethodSpec::Kind::Kalman)
                f << ',' << num(r.whiteness_worst) << ',' << num(r.whiteness_threshold) << ',' << num(r.pe_ratio);
            else
                f << ",,,";
            f << '\n';
        }
    }
    {
        nlohmann::json meta;
        meta["name"] = config.name;
        meta["config_hash"] = hash;
        meta["config"] = to_text(config);
        meta["horizon"] = config.horizon();
        meta["filter"] = {{"riccati_residual", result.filter.residual},
                          {"riccati_iterations", result.filter.iterations},
                          {"rho_closed", result.spectral.rho_closed},
                          {"rho_A", result.spectral.rho_A},
                          {"kappa", result.spectral.kappa},
                          {"sigma_R", result.spectral.sigma_R},
                          {"sigma_Rbar", result.spectral.sigma_Rbar}};
        Eigen::SelfAdjointEigenSolver<Matrix> es(result.filter.Rbar, Eigen::EigenvaluesOnly);
        meta["filter"]["Rbar_eigenvalues"] = std::vector<double>(es.eigenvalues().data(),
                                                                 es.eigenvalues().data() + es.eigenvalues().size());
        meta["gamma_auto"] = result.gamma_auto;
        meta["generated_at"] = static_cast<long long>(std::time(nullptr));
        auto& runs = meta["runs"] = nlohmann::json::array();
        for (const auto& r : result.runs)
            runs.push_back({{"seed", r.seed}, {"method", r.label}, {"status", r.status}, {"wall_seconds", r.wall_seconds}});
        auto f = open("run_meta.json");
        f << meta.dump(2) << '\n';
    }
}

}  // namespace opf::harness
