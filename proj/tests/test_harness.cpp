#include "doctest.h"
#include "oracles.hpp"

#include "opf/harness/config.hpp"
#include "opf/harness/experiment.hpp"
#include "opf/harness/matrix_expr.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace opf;
using namespace opf::harness;

namespace {

const char* kSmall = R"(# two-output toy
name = toy
A = [0.9, 0.2; 0, 0.5]
C = eye(2)
Q = eye(2)
R = 0.5 * eye(2)
T_init = 20
N_E = 3
beta = 1.5
seeds = 3
regret_stride = 7
decomposition = epoch_ends
method = kalman
method = opf gamma=auto
method = opf gamma=1
method = uniform alpha=0.95
)";

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("opf_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("matrix expressions") {
    CHECK(parse_matrix_expr("[1, 2; 3 4]") == Matrix{{1, 2}, {3, 4}});
    CHECK(parse_matrix_expr("[[1, 2], [3, 4]]") == Matrix{{1, 2}, {3, 4}});
    CHECK(parse_matrix_expr("2 * eye(2) - ones(2)") == Matrix{{1, -1}, {-1, 1}});
    CHECK(parse_matrix_expr("kron(eye(2), [1 1; 0 1])") ==
          Matrix{{1, 1, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 0, 1}});
    CHECK(parse_matrix_expr("diag([1, 2])") == Matrix{{1, 0}, {0, 2}});
    CHECK(parse_matrix_expr("[1 2] * [3; 4]") == Matrix{{11}});
    CHECK(parse_matrix_expr("-(zeros(1, 2) + 1e-1)") == Matrix{{-0.1, -0.1}});
    CHECK_THROWS_AS(parse_matrix_expr("[1, 2; 3]"), ConfigError);
    CHECK_THROWS_AS(parse_matrix_expr("eye(2) + ones(3)"), ConfigError);
    try {
        parse_matrix_expr("eye(2) $");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("column 8") != std::string::npos);
    }
    const Matrix M = Matrix::Random(3, 4) * 1e3;
    CHECK(parse_matrix_expr(format_matrix(M)) == M);
}

TEST_CASE("method specs") {
    CHECK(parse_method("kalman").label() == "kalman");
    CHECK(parse_method("opf gamma=auto").label() == "opf:gamma=auto");
    CHECK(parse_method("opf gamma=0.9 beta=3").label() == "opf:gamma=0.9:beta=3");
    CHECK(parse_method("uniform alpha=0.9999").label() == "uniform:alpha=0.9999");
    CHECK(parse_method("opf gamma=1 init=direct").init == EpochInit::Direct);
    CHECK_THROWS_AS(parse_method("lasso"), ConfigError);
    CHECK_THROWS_AS(parse_method("uniform gamma=0.5"), ConfigError);
    CHECK_THROWS_AS(parse_method("opf gamma"), ConfigError);
}

TEST_CASE("config parsing, round trip and hashing") {
    const auto c = parse_config(kSmall, "toy.cfg");
    CHECK(c.name == "toy");
    CHECK(c.grid.size() == 4);
    CHECK(c.horizon() == 160);
    CHECK(c.model.R == 0.5 * Matrix::Identity(2, 2));
    CHECK(c.decomposition == DecompositionMode::EpochEnds);

    const auto again = parse_config(to_text(c));
    CHECK(to_text(again) == to_text(c));
    CHECK(config_hash(again) == config_hash(c));

    auto moved = c;
    moved.out = "/elsewhere";
    moved.workers = 8;
    CHECK(config_hash(moved) == config_hash(c));
    moved.seeds = 4;
    CHECK(config_hash(moved) != config_hash(c));
    CHECK(hash_hex(0xabcULL) == "0000000000000abc");
}

TEST_CASE("config errors name the line and key") {
    auto expect = [](const std::string& text, const std::string& fragment) {
        try {
            parse_config(text, "bad.cfg");
            FAIL("expected ConfigError for: " << text);
        } catch (const ConfigError& e) {
            CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
        }
    };
    expect("A = [1]\nC = [1]\nQ = [1]\nR = [1]\nseeds = many\nmethod = kalman\n", "bad.cfg:5 (seeds)");
    expect("A = [1]\nC = [1]\nQ = [1]\nR = [1]\nfoo = 1\n", "bad.cfg:5 (foo)");
    expect("A = [1]\nC = [1]\nQ = [1]\nmethod = kalman\n", "missing required key R");
    expect("A = [1]\nC = [1]\nQ = [1]\nR = [1]\n", "grid is empty");
    expect("A = [1]\nC = [1]\nQ = [1]\nR = [1]\nmethod = opf gamma=1.5\n", "gamma");
    expect("A = [0.5]\nC = [1]\nQ = [1]\nR = [[1]\nmethod = kalman\n", "bad.cfg:4 (R)");
    CHECK_THROWS_AS(parse_config("A = [1, 0]\nC = [1]\nQ = [1]\nR = [1]\nmethod = kalman\n"), Error);
}

TEST_CASE("builtin experiments") {
    const auto names = builtin_names();
    CHECK(std::set<std::string>(names.begin(), names.end()) ==
          std::set<std::string>{"paper-main", "paper-illcond", "paper-order", "paper-tradeoff", "paper-stability"});
    for (const auto& n : names) CHECK_NOTHROW(validate_config(builtin_config(n)));

    const auto main = builtin_config("paper-main");
    CHECK(main.horizon() == 7680);
    CHECK(main.seeds == 20);
    CHECK(main.T_init == 60);
    CHECK(main.beta == 2.5);
    CHECK((main.model.A - oracle::tracking_model().A).norm() == 0.0);
    CHECK((main.model.Q - oracle::tracking_model().Q).norm() == 0.0);

    const auto ill = builtin_config("paper-illcond");
    CHECK((ill.model.A - oracle::illcond_model().A).norm() == 0.0);
    const auto f = solve_dare(ill.model);
    CHECK(spectral_info(ill.model, f).rho_closed == doctest::Approx(0.78).epsilon(0.01 / 0.78));

    try {
        builtin_config("paper-nope");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        for (const auto& n : names) CHECK(msg.find(n) != std::string::npos);
    }
    CHECK(load_config("paper-main").name == "paper-main");
}

TEST_CASE("sweep grid rewriting") {
    const auto c = parse_config(kSmall);
    const auto g = sweep_config(c, "gamma", {"1.0"});
    std::vector<std::string> labels;
    for (const auto& m : g.grid) labels.push_back(m.label());
    CHECK(labels == std::vector<std::string>{"kalman", "opf:gamma=1", "uniform:alpha=0.95"});

    const auto g2 = sweep_config(c, "gamma", {"auto", "0.7", "0.8"});
    CHECK(g2.grid.size() == 5);
    const auto a = sweep_config(c, "alpha", {"0.99", "0.9999", "1"});
    CHECK(a.grid.size() == 6);
    const auto b = sweep_config(c, "beta", {"1.5", "2.5"});
    for (const auto& m : b.grid)
        if (m.kind != MethodSpec::Kind::Kalman) CHECK(m.beta.has_value());
    CHECK_THROWS_AS(sweep_config(c, "gamma", {}), ConfigError);
    CHECK_THROWS_AS(sweep_config(c, "delta", {"1"}), ConfigError);
    CHECK_THROWS_AS(sweep_config(c, "gamma", {"x"}), ConfigError);
    auto kal = c;
    kal.grid = {parse_method("kalman")};
    CHECK_THROWS_AS(sweep_config(kal, "alpha", {"0.9"}), ConfigError);
}

TEST_CASE("kalman-only grid has zero regret") {
    auto c = parse_config(kSmall);
    c.grid = {parse_method("kalman")};
    const auto res = run_experiment(c);
    REQUIRE(res.runs.size() == 3);
    for (const auto& r : res.runs) {
        CHECK(r.ok());
        for (double v : r.regret.cum_regret) CHECK(v == 0.0);
    }
}

TEST_CASE("experiment outputs are deterministic and well formed") {
    auto c = parse_config(kSmall);
    const auto d1 = scratch("det1");
    const auto d2 = scratch("det2");
    const auto r1 = run_experiment(c);
    c.workers = 3;
    const auto r2 = run_experiment(c);
    write_outputs(r1, d1);
    write_outputs(r2, d2);
    for (const char* f : {"regret.csv", "decomposition.csv", "summary.csv"}) CHECK(slurp(d1 / f) == slurp(d2 / f));
    CHECK(std::filesystem::exists(d1 / "run_meta.json"));

    CHECK(r1.runs.size() == 12);
    for (const auto& r : r1.runs) {
        CHECK_MESSAGE(r.ok(), r.status);
        CHECK(r.identity_defect < 1e-8);
    }
    CHECK(r1.gamma_auto == doctest::Approx(r1.spectral.rho_closed));

    const auto regret = lines(slurp(d1 / "regret.csv"));
    CHECK(regret.front() == "k,seed,method,gamma_or_alpha,online_loss,kalman_loss,cum_regret");
    const auto decomp = lines(slurp(d1 / "decomposition.csv"));
    CHECK(decomp.front() == "k,seed,method,reg_factor,regress_factor,bias_factor,accum_sum,logdet_V,trace_term");
    CHECK(decomp.size() == 1 + 3 * 2 * 3);  // seeds x balanced methods x epochs

    // k increases within each (seed, method) block and epoch ends are present.
    std::map<std::string, long> last;
    std::set<std::string> ends;
    for (std::size_t i = 1; i < regret.size(); ++i) {
        std::stringstream ss(regret[i]);
        std::string k, seed, method;
        std::getline(ss, k, ',');
        std::getline(ss, seed, ',');
        std::getline(ss, method, ',');
        const std::string key = seed + "/" + method;
        const long kv = std::stol(k);
        if (last.count(key)) CHECK(kv > last[key]);
        last[key] = kv;
        if (kv == 40 || kv == 80 || kv == 160) ends.insert(key + "@" + k);
    }
    CHECK(ends.size() == 3 * 4 * 3);

    const auto summary = lines(slurp(d1 / "summary.csv"));
    REQUIRE(summary.size() == 13);
    const auto cols = std::count(summary[0].begin(), summary[0].end(), ',');
    for (const auto& row : summary) CHECK(std::count(row.begin(), row.end(), ',') == cols);
    CHECK(summary[0].rfind("config_hash,seed,method,gamma_or_alpha,beta,lambda,status,final_regret,k_e1,regret_e1", 0) == 0);
    CHECK(summary[0].find("ratio2_e3") != std::string::npos);
}

TEST_CASE("paired seeds share one trajectory") {
    auto c = parse_config(kSmall);
    c.seeds = 2;
    c.base_seed = 40;
    const auto res = run_experiment(c);
    std::map<std::uint64_t, std::vector<double>> kalman_losses;
    for (const auto& r : res.runs) {
        CHECK(r.seed >= 40);
        CHECK(r.seed <= 41);
        if (kalman_losses.count(r.seed))
            CHECK(kalman_losses[r.seed] == r.regret.kalman_loss);
        else
            kalman_losses[r.seed] = r.regret.kalman_loss;
    }
}

TEST_CASE("infeasible methods are rejected before any run") {
    auto c = parse_config(kSmall);
    c.grid = {parse_method("kalman"), parse_method("opf gamma=1 beta=40")};
    CHECK_THROWS_AS(run_experiment(c), ConfigError);
}

TEST_CASE("failed runs keep the summary rectangular") {
    auto c = parse_config(kSmall);
    c.seeds = 1;
    auto res = run_experiment(c);
    res.runs[1].status = "numerical: injected, with comma";
    const auto dir = scratch("fail");
    write_outputs(res, dir);
    const auto summary = lines(slurp(dir / "summary.csv"));
    const auto cols = std::count(summary[0].begin(), summary[0].end(), ',');
    for (const auto& row : summary) CHECK(std::count(row.begin(), row.end(), ',') == cols);
    const auto regret = slurp(dir / "regret.csv");
    CHECK(regret.find(res.runs[1].label + ",") == std::string::npos);
    CHECK(regret.find(res.runs[2].label + ",") != std::string::npos);
}

TEST_CASE("epoch boundary spike") {
    RegretRecord rec;
    rec.first_step = 21;
    rec.online_loss.assign(140, 1.0);
    rec.kalman_loss.assign(140, 1.0);
    OpfParams p;
    p.T_init = 20;
    p.N_E = 3;
    p.beta = 1.0;
    const auto sched = epoch_schedule(p);
    CHECK(epoch_boundary_spike(rec, sched) == doctest::Approx(1.0));
    rec.online_loss[81 - 21] = 30.0;
    CHECK(epoch_boundary_spike(rec, sched) == doctest::Approx(30.0));
}
