#include "toruslab/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tlab {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
        throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
    return x;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
    Int x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
    return x;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> m = {
        {"n", [](auto& c, auto& k, auto& v) { c.n = to_int<int>(k, v); }},
        {"N", [](auto& c, auto& k, auto& v) { c.N = to_int<int>(k, v); }},
        {"c", [](auto& c, auto& k, auto& v) { c.c = to_list(k, v); }},
        {"offdiag", [](auto& c, auto& k, auto& v) { c.offdiag = to_double(k, v); }},
        {"dirichlet_C", [](auto& c, auto& k, auto& v) { c.dirichlet_C = to_double(k, v); }},
        {"threshold_C", [](auto& c, auto& k, auto& v) { c.threshold_C = to_double(k, v); }},
        {"eps", [](auto& c, auto& k, auto& v) { c.eps = to_double(k, v); }},
        {"eps0_fraction", [](auto& c, auto& k, auto& v) { c.eps0_fraction = to_double(k, v); }},
        {"g_disc", [](auto& c, auto& k, auto& v) { c.g_disc = to_double(k, v); }},
        {"C_delta", [](auto& c, auto& k, auto& v) { c.C_delta = to_double(k, v); }},
        {"delta", [](auto& c, auto& k, auto& v) { c.delta = to_double(k, v); }},
        {"C_X", [](auto& c, auto& k, auto& v) { c.C_X = to_double(k, v); }},
        {"slack", [](auto& c, auto& k, auto& v) { c.slack = to_double(k, v); }},
        {"r_ball", [](auto& c, auto& k, auto& v) { c.r_ball = to_double(k, v); }},
        {"r1", [](auto& c, auto& k, auto& v) { c.r1 = to_double(k, v); }},
        {"r2", [](auto& c, auto& k, auto& v) { c.r2 = to_double(k, v); }},
        {"k_max", [](auto& c, auto& k, auto& v) { c.k_max = to_int<long>(k, v); }},
        {"centers", [](auto& c, auto& k, auto& v) { c.centers = to_int<int>(k, v); }},
        {"pairs", [](auto& c, auto& k, auto& v) { c.pairs = to_int<int>(k, v); }},
        {"sites", [](auto& c, auto& k, auto& v) { c.sites = to_int<int>(k, v); }},
        {"solver_tol", [](auto& c, auto& k, auto& v) { c.solver_tol = to_double(k, v); }},
        {"workers", [](auto& c, auto& k, auto& v) { c.workers = to_int<int>(k, v); }},
        {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_int<std::uint64_t>(k, v); }},
        {"output", [](auto& c, auto&, auto& v) { c.output = v; }},
    };
    return m;
}

std::string body(const ExperimentConfig& c, bool with_runtime) {
    std::ostringstream os;
    os << "n = " << c.n << "\n" << "N = " << c.N << "\n" << "c = ";
    for (std::size_t i = 0; i < c.c.size(); ++i) os << (i ? ", " : "") << g17(c.c[i]);
    os << "\n";
    os << "offdiag = " << g17(c.offdiag) << "\n"
       << "dirichlet_C = " << g17(c.dirichlet_C) << "\n"
       << "threshold_C = " << g17(c.threshold_C) << "\n"
       << "eps = " << g17(c.eps) << "\n"
       << "eps0_fraction = " << g17(c.eps0_fraction) << "\n"
       << "g_disc = " << g17(c.g_disc) << "\n"
       << "C_delta = " << g17(c.C_delta) << "\n"
       << "delta = " << g17(c.delta) << "\n"
       << "C_X = " << g17(c.C_X) << "\n"
       << "slack = " << g17(c.slack) << "\n"
       << "r_ball = " << g17(c.r_ball) << "\n"
       << "r1 = " << g17(c.r1) << "\n"
       << "r2 = " << g17(c.r2) << "\n"
       << "k_max = " << c.k_max << "\n"
       << "centers = " << c.centers << "\n"
       << "pairs = " << c.pairs << "\n"
       << "sites = " << c.sites << "\n"
       << "solver_tol = " << g17(c.solver_tol) << "\n"
       << "seed = " << c.seed << "\n";
    if (with_runtime) os << "workers = " << c.workers << "\n" << "output = " << c.output << "\n";
    return os.str();
}

}  // namespace

HermitianForm ExperimentConfig::alpha() const {
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(n, n);
    for (int j = 0; j < n && j < static_cast<int>(c.size()); ++j) H(j, j) = c[static_cast<std::size_t>(j)];
    if (n == 2) H(0, 1) = H(1, 0) = offdiag;
    return HermitianForm{H};
}

PeakConstants ExperimentConfig::peak_constants() const {
    return PeakConstants{C_delta, delta, C_X, slack, r_ball};
}

PeakParams ExperimentConfig::peak_params() const { return PeakParams{r1, r2, 0.45}; }

ExperimentConfig default_config(int n) {
    ExperimentConfig c;
    c.n = n;
    const auto H = HermitianForm::default_class(n == 2 ? 2 : 1).H;
    c.c.clear();
    for (int j = 0; j < H.rows(); ++j) c.c.push_back(H(j, j).real());
    if (n == 2) {
        c.offdiag = H(0, 1).real();
        c.N = 12;
        c.k_max = 8;
        c.eps = 0.3;
        c.output = "runs/default-n2";
    }
    return c;
}

ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig c = default_config(1);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (!setters().count(key)) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (kv.count(key)) throw ConfigError("config key '" + key + "' given twice");
        kv[key] = val;
    }
    // n first: it selects the defaults the other keys override
    if (kv.count("n")) {
        const int n = to_int<int>("n", kv["n"]);
        if (n == 2) c = default_config(2);
        c.n = n;
    }
    for (const auto& [key, val] : kv)
        if (key != "n") setters().at(key)(c, key, val);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw ConfigError("cannot read config file " + p.string());
    return parse_config(is);
}

void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& key, const std::string& why) { throw ConfigError("config key '" + key + "': " + why); };
    if (c.n != 1 && c.n != 2) fail("n", "must be 1 or 2");
    if (c.N < 8 || c.N % 4 != 0) fail("N", "must be a multiple of 4, at least 8");
    if (static_cast<int>(c.c.size()) != c.n) fail("c", "needs exactly n entries");
    if (c.n == 1 && c.offdiag != 0) fail("offdiag", "only meaningful for n = 2");
    const Eigen::MatrixXcd H = c.alpha().H;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    if (es.eigenvalues().minCoeff() <= 0) fail("c", "alpha is not positive definite");
    const double emax = 2.0 / betti2(c.n);
    if (!(c.eps > 0 && c.eps < emax)) fail("eps", "must lie in (0, 2/b2) = (0, " + g17(emax) + ")");
    if (!(c.dirichlet_C > 0)) fail("dirichlet_C", "must be positive");
    if (!(c.threshold_C > 0)) fail("threshold_C", "must be positive");
    if (!(c.eps0_fraction > 0 && c.eps0_fraction < 1)) fail("eps0_fraction", "must lie in (0, 1)");
    if (!(c.g_disc > 0 && c.g_disc <= 1)) fail("g_disc", "must lie in (0, 1]");
    if (c.C_delta < 0) fail("C_delta", "must be nonnegative");
    if (!(c.delta > 0)) fail("delta", "must be positive");
    if (!(c.C_X > 0)) fail("C_X", "must be positive");
    if (!(c.slack >= 1)) fail("slack", "must be at least 1");
    if (!(c.r_ball > 0)) fail("r_ball", "must be positive");
    if (!(c.r1 > 0 && c.r1 < c.r2 && c.r2 < 0.45)) fail("r2", "need 0 < r1 < r2 < 0.45");
    if (c.k_max < 0) fail("k_max", "must be nonnegative");
    if (c.centers < 1) fail("centers", "must be positive");
    if (c.pairs < 0) fail("pairs", "must be nonnegative");
    if (c.sites < 0) fail("sites", "must be nonnegative");
    if (!(c.solver_tol > 0 && c.solver_tol < 1e-3)) fail("solver_tol", "must lie in (0, 1e-3)");
    if (c.workers < 1) fail("workers", "must be positive");
    if (c.output.empty()) fail("output", "must not be empty");
}

std::string canonical_text(const ExperimentConfig& cfg) { return body(cfg, true); }

std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : body(cfg, false)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::filesystem::path output_directory(const ExperimentConfig& cfg) {
    std::filesystem::path p(cfg.output);
    if (p.is_relative())
        if (const char* root = std::getenv("TORUSLAB_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / p;
    return p;
}

}  // namespace tlab
