#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "toruslab/peaks.hpp"

namespace tlab {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// One experiment. Text form: one `key = value` per line, `#` starts a
// comment, list values are comma separated. Keys are documented in
// docs/config.md.
struct ExperimentConfig {
    int n = 1;
    int N = 64;
    std::vector<double> c;  // diagonal of H
    double offdiag = 0;     // real H_12 (n = 2)
    double dirichlet_C = 1;
    double threshold_C = 1;
    double eps = 1.8;            // H_k threshold exponent, in (0, 2/b2)
    double eps0_fraction = 0.5;  // eps0 = fraction * delta0
    double g_disc = 0.5;
    double C_delta = 0, delta = 1, C_X = 1, slack = 1.25, r_ball = 1;
    double r1 = 0.15, r2 = 0.30;
    long k_max = 40;
    int centers = 10;  // random peak centers
    int pairs = 100;   // separation sample
    int sites = 100;   // immersion sample
    double solver_tol = 1e-10;
    int workers = 1;
    std::uint64_t seed = 1;
    std::string output = "runs/default";

    HermitianForm alpha() const;
    PeakConstants peak_constants() const;
    PeakParams peak_params() const;
};

// The default transcendental class of dimension n with the grid and k range
// used by the acceptance runs (n = 1: N = 64, k_max = 40; n = 2: N = 12,
// k_max = 8).
ExperimentConfig default_config(int n);

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& p);
// Throws ConfigError naming the offending key.
void validate(const ExperimentConfig& cfg);

// Every key in a fixed order with 17 significant digits; parse_config
// round-trips it exactly.
std::string canonical_text(const ExperimentConfig& cfg);
// 16 hex digits of FNV-1a over the canonical text without `output` and
// `workers`, which do not affect results.
std::string config_hash(const ExperimentConfig& cfg);

// Relative output paths are taken under $TORUSLAB_OUTPUT_ROOT when it is set.
std::filesystem::path output_directory(const ExperimentConfig& cfg);

}  // namespace tlab
