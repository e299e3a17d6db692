#include "opf/harness/config.hpp"

#include "opf/harness/matrix_expr.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace opf::harness {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Shortest text that reads back to the same double.
std::string exact_num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double to_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(what + ": expected a number, got '" + s + "'");
    return v;
}

template <class Int>
Int to_int(const std::string& s, const std::string& what) {
    Int v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ConfigError(what + ": expected an integer, got '" + s + "'");
    return v;
}

const std::map<std::string, std::string>& builtins() {
    static const std::string tracking_model =
        "A = kron(eye(3), [1, 1, 0; 0, 1, 1; 0, 0, 0.9])\n"
        "C = kron(eye(3), [1, 0, 0])\n"
        "Q = kron([1, 0.2, 0.2; 0.2, 1, 0.2; 0.2, 0.2, 1], eye(3))\n"
        "R = eye(3)\n";
    static const std::map<std::string, std::string> table = {
        {"paper-main",
         "# Marginally stable 3-D tracking system; balanced vs uniform forgetting.\n"
         "name = paper-main\n" + tracking_model +
             "T_init = 60\nN_E = 7\nbeta = 2.5\nlambda = 1\nseeds = 20\nbase_seed = 1\nregret_stride = 10\n"
             "method = kalman\n"
             "method = opf gamma=auto\nmethod = opf gamma=0.9\nmethod = opf gamma=1\n"
             "method = uniform alpha=0.99\nmethod = uniform alpha=0.9999\nmethod = uniform alpha=1\n"},
        {"paper-illcond",
         "# Slowly mixing filter, rho(A - LC) close to 0.78.\n"
         "name = paper-illcond\n"
         "A = [0.98, 0.8, 0; 0, 0.98, 0.8; 0, 0, 0.9]\nC = eye(3)\nQ = eye(3)\nR = 100 * eye(3)\n"
         "T_init = 500\nN_E = 3\nbeta = 6\nlambda = 1\nseeds = 20\nbase_seed = 1\nregret_stride = 10\n"
         "method = kalman\nmethod = opf gamma=auto\nmethod = opf gamma=1\n"},
        {"paper-order",
         "# Regret growth against powers of log N over one extra epoch.\n"
         "name = paper-order\n" + tracking_model +
             "T_init = 60\nN_E = 8\nbeta = 2.5\nlambda = 1\nseeds = 10\nbase_seed = 1\nregret_stride = 20\n"
             "method = kalman\nmethod = opf gamma=auto\nmethod = opf gamma=1\n"},
        {"paper-tradeoff",
         "# Regression / regularization / accumulation factors across gamma.\n"
         "name = paper-tradeoff\n" + tracking_model +
             "T_init = 60\nN_E = 7\nbeta = 2.5\nlambda = 1\nseeds = 20\nbase_seed = 1\nregret_stride = 10\n"
             "decomposition = epoch_ends\n"
             "method = kalman\nmethod = opf gamma=auto\nmethod = opf gamma=0.6\nmethod = opf gamma=0.7\n"
             "method = opf gamma=0.8\nmethod = opf gamma=0.9\nmethod = opf gamma=1\n"},
        {"paper-stability",
         "# Epoch initialization: closed form with an explicit inverse vs sequential updates.\n"
         "name = paper-stability\n" + tracking_model +
             "T_init = 60\nN_E = 7\nbeta = 2.5\nlambda = 1\nseeds = 10\nbase_seed = 1\nregret_stride = 1\n"
             "method = kalman\nmethod = opf gamma=1\nmethod = opf gamma=1 init=direct\n"
             "method = opf gamma=auto\nmethod = opf gamma=auto init=direct\n"},
    };
    return table;
}

}  // namespace

std::string MethodSpec::label() const {
    std::string s;
    switch (kind) {
        case Kind::Kalman: return "kalman";
        case Kind::Opf: s = "opf:gamma=" + (gamma_auto ? std::string("auto") : exact_num(gamma)); break;
        case Kind::Uniform: s = "uniform:alpha=" + exact_num(alpha); break;
    }
    if (beta) s += ":beta=" + exact_num(*beta);
    if (lambda) s += ":lambda=" + exact_num(*lambda);
    if (init == EpochInit::Direct) s += ":init=direct";
    return s;
}

MethodSpec parse_method(const std::string& text) {
    std::istringstream is(text);
    std::string kind;
    is >> kind;
    MethodSpec m;
    if (kind == "opf") m.kind = MethodSpec::Kind::Opf;
    else if (kind == "uniform") m.kind = MethodSpec::Kind::Uniform;
    else if (kind == "kalman") m.kind = MethodSpec::Kind::Kalman;
    else throw ConfigError("method: unknown kind '" + kind + "' (expected opf, uniform or kalman)");

    std::string token;
    while (is >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw ConfigError("method: expected key=value, got '" + token + "'");
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "gamma" && m.kind == MethodSpec::Kind::Opf) {
            if (value == "auto") m.gamma_auto = true;
            else m.gamma = to_double(value, "method gamma");
        } else if (key == "alpha" && m.kind == MethodSpec::Kind::Uniform) {
            m.alpha = to_double(value, "method alpha");
        } else if (key == "beta" && m.kind != MethodSpec::Kind::Kalman) {
            m.beta = to_double(value, "method beta");
        } else if (key == "lambda" && m.kind != MethodSpec::Kind::Kalman) {
            m.lambda = to_double(value, "method lambda");
        } else if (key == "init" && m.kind == MethodSpec::Kind::Opf) {
            if (value == "direct") m.init = EpochInit::Direct;
            else if (value == "iterative") m.init = EpochInit::Iterative;
            else throw ConfigError("method init: expected iterative or direct, got '" + value + "'");
        } else {
            throw ConfigError("method: key '" + key + "' does not apply to " + kind);
        }
    }
    return m;
}

OpfParams ExperimentConfig::params_for(const MethodSpec& method, double gamma) const {
    OpfParams p;
    p.beta = method.beta.value_or(beta);
    p.lambda = method.lambda.value_or(lambda);
    p.gamma = gamma;
    p.T_init = T_init;
    p.N_E = N_E;
    p.refactor_period = refactor_period;
    p.init = method.init;
    return p;
}

std::size_t ExperimentConfig::horizon() const {
    return (std::size_t{1} << N_E) * T_init;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    ExperimentConfig c;
    c.grid.clear();
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    bool have[4] = {false, false, false, false};
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        auto where = [&](const std::string& key) {
            return source + ":" + std::to_string(lineno) + (key.empty() ? "" : " (" + key + ")") + ": ";
        };
        if (eq == std::string::npos) throw ConfigError(where("") + "expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        try {
            if (key == "name") c.name = value;
            else if (key == "A") { c.model.A = parse_matrix_expr(value); have[0] = true; }
            else if (key == "C") { c.model.C = parse_matrix_expr(value); have[1] = true; }
            else if (key == "Q") { c.model.Q = parse_matrix_expr(value); have[2] = true; }
            else if (key == "R") { c.model.R = parse_matrix_expr(value); have[3] = true; }
            else if (key == "x0") {
                const Matrix v = parse_matrix_expr(value);
                if (v.rows() != 1 && v.cols() != 1) throw ConfigError("x0 must be a vector");
                c.x0 = Vector(Eigen::Map<const Vector>(v.data(), v.size()));
            }
            else if (key == "T_init") c.T_init = to_int<std::size_t>(value, key);
            else if (key == "N_E") c.N_E = to_int<int>(value, key);
            else if (key == "beta") c.beta = to_double(value, key);
            else if (key == "lambda") c.lambda = to_double(value, key);
            else if (key == "refactor_period") c.refactor_period = to_int<int>(value, key);
            else if (key == "seeds") c.seeds = to_int<int>(value, key);
            else if (key == "base_seed") c.base_seed = to_int<std::uint64_t>(value, key);
            else if (key == "out") c.out = value;
            else if (key == "workers") c.workers = to_int<int>(value, key);
            else if (key == "regret_stride") c.regret_stride = to_int<std::size_t>(value, key);
            else if (key == "decomposition") {
                if (value == "none") c.decomposition = DecompositionMode::None;
                else if (value == "epoch_ends") c.decomposition = DecompositionMode::EpochEnds;
                else if (value.rfind("every", 0) == 0) {
                    c.decomposition = DecompositionMode::Strided;
                    const auto rest = trim(std::string_view(value).substr(5));
                    c.decomposition_stride = rest.empty() ? 1 : to_int<std::size_t>(rest, key);
                } else throw ConfigError("expected none, epoch_ends or 'every [stride]'");
            }
            else if (key == "method") c.grid.push_back(parse_method(value));
            else throw ConfigError("unknown key");
        } catch (const ConfigError& e) {
            throw ConfigError(where(key) + e.what());
        }
    }
    const char* names[4] = {"A", "C", "Q", "R"};
    for (int i = 0; i < 4; ++i)
        if (!have[i]) throw ConfigError(source + ": missing required key " + names[i]);
    if (c.name.empty()) c.name = source;
    validate_config(c);
    return c;
}

void validate_config(const ExperimentConfig& c) {
    if (c.grid.empty()) throw ConfigError(c.name + ": the algorithm grid is empty (add 'method = ...' lines)");
    for (const auto& m : c.grid) {
        if (m.kind == MethodSpec::Kind::Opf && !m.gamma_auto && !(m.gamma > 0.0 && m.gamma <= 1.0))
            throw ConfigError(c.name + ": gamma must lie in (0, 1] or be auto (" + m.label() + ")");
        if (m.kind == MethodSpec::Kind::Uniform && !(m.alpha > 0.0 && m.alpha <= 1.0))
            throw ConfigError(c.name + ": alpha must lie in (0, 1] (" + m.label() + ")");
    }
    if (c.seeds < 1) throw ConfigError(c.name + ": seeds must be at least 1");
    if (c.workers < 1) throw ConfigError(c.name + ": workers must be at least 1");
    if (c.regret_stride < 1) throw ConfigError(c.name + ": regret_stride must be at least 1");
    if (c.N_E < 1 || c.N_E > 24) throw ConfigError(c.name + ": N_E must lie in [1, 24]");
    try {
        require_valid(c.model);
        if (c.x0 && c.x0->size() != c.model.state_dim()) throw StructuralError("x0 has the wrong dimension");
        for (const auto& m : c.grid)
            if (m.kind != MethodSpec::Kind::Kalman) validate(c.params_for(m, 1.0));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(c.name + ": " + e.what());
    }
}

std::string to_text(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "name = " << c.name << "\n";
    os << "A = " << format_matrix(c.model.A) << "\n";
    os << "C = " << format_matrix(c.model.C) << "\n";
    os << "Q = " << format_matrix(c.model.Q) << "\n";
    os << "R = " << format_matrix(c.model.R) << "\n";
    if (c.x0) os << "x0 = " << format_matrix(c.x0->transpose()) << "\n";
    os << "T_init = " << c.T_init << "\nN_E = " << c.N_E << "\n";
    os << "beta = " << exact_num(c.beta) << "\nlambda = " << exact_num(c.lambda) << "\n";
    os << "refactor_period = " << c.refactor_period << "\n";
    os << "seeds = " << c.seeds << "\nbase_seed = " << c.base_seed << "\n";
    os << "regret_stride = " << c.regret_stride << "\n";
    os << "decomposition = ";
    switch (c.decomposition) {
        case DecompositionMode::None: os << "none"; break;
        case DecompositionMode::EpochEnds: os << "epoch_ends"; break;
        case DecompositionMode::Strided: os << "every " << c.decomposition_stride; break;
    }
    os << "\n";
    for (const auto& m : c.grid) {
        os << "method = ";
        switch (m.kind) {
            case MethodSpec::Kind::Kalman: os << "kalman"; break;
            case MethodSpec::Kind::Opf: os << "opf gamma=" << (m.gamma_auto ? std::string("auto") : exact_num(m.gamma)); break;
            case MethodSpec::Kind::Uniform: os << "uniform alpha=" << exact_num(m.alpha); break;
        }
        if (m.beta) os << " beta=" << exact_num(*m.beta);
        if (m.lambda) os << " lambda=" << exact_num(*m.lambda);
        if (m.init == EpochInit::Direct) os << " init=direct";
        os << "\n";
    }
    return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : to_text(c)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t hash) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::vector<std::string> builtin_names() {
    std::vector<std::string> names;
    for (const auto& [name, text] : builtins()) names.push_back(name);
    return names;
}

std::string builtin_text(const std::string& name) {
    const auto& table = builtins();
    const auto it = table.find(name);
    if (it == table.end()) {
        std::string list;
        for (const auto& [n, t] : table) list += (list.empty() ? "" : ", ") + n;
        throw ConfigError("unknown builtin experiment '" + name + "'; available: " + list);
    }
    return it->second;
}

ExperimentConfig builtin_config(const std::string& name) {
    return parse_config(builtin_text(name), name);
}

ExperimentConfig load_config(const std::string& path_or_name) {
    const auto& table = builtins();
    if (table.count(path_or_name)) return builtin_config(path_or_name);
    std::ifstream in(path_or_name);
    if (!in) {
        std::string list;
        for (const auto& [n, t] : table) list += (list.empty() ? "" : ", ") + n;
        throw ConfigError("'" + path_or_name + "' is neither a readable config file nor a builtin (" + list + ")");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path_or_name);
}

}  // namespace opf::harness
