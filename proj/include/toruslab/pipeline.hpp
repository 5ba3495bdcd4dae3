#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "toruslab/config.hpp"
#include "toruslab/embedding.hpp"
#include "toruslab/io.hpp"

namespace tlab {

// Number of holomorphic sections of a line bundle with these integer
// periods: the flux for n = 1, the Pfaffian m01 m23 - m02 m13 + m03 m12 for
// n = 2 (faces in coordinate_faces order).
long section_count(int n, const std::vector<long>& periods);

struct PeakStat {
    std::size_t center = 0;
    double snh2 = 0, dbar2 = 0, ratio = 0, bound_leading = 0, bound = 0;
    double value = 0, deviation = 0, eps = 0;
    double norm_sh = 0, lower = 0, upper = 0, ball_c0 = 0, mass_fraction = 0;
    double split_residual = 0, image_orthogonality = 0;
    bool bound_ok = false, bracket_ok = false, ball_ok = false;
};

struct JetStat {
    std::size_t center = 0;
    int axis = 0;  // derivative d/dz_{axis+1}
    double corrected = 0, uncorrected = 0, ratio = 0;
    bool pass = false;
};

// Everything the pipeline keeps about one level k.
struct KRecord {
    long k = 0;
    std::string status = "ok";  // "ok" or "failed"
    std::string stage, error;   // where and why a failed level stopped
    std::string config_hash;

    std::vector<long> periods;
    double err_total = 0, err_02 = 0;
    long m_k = 0;  // section count of the approximant
    double delta0 = 0;

    std::vector<double> mu, residuals;  // converged eigenvalues
    int iterations = 0;
    int dim = 0;
    double threshold = 0;
    bool gap_pass = false;
    double gap_lower = 0, gap_upper = 0, mu_next = 0, gap_ratio = 0;
    std::string gap_note;

    std::vector<PeakStat> peaks;
    std::vector<JetStat> jets;
    std::vector<double> tian_pivots;
    std::string tian_note;

    bool embedding = false;  // the fields below are set
    double B_min = 0, B_max = 0, period_defect = 0;
    DistanceTable dist;
    int pairs = 0, separated = 0, sites = 0, immersive = 0;
    double min_distance = 0, min_singular_ratio = 0;
};

json to_json(const KRecord& r);
KRecord record_from_json(const json& j);

struct RunOptions {
    bool quiet = false;
    std::function<void(const std::string&)> log;  // defaults to stderr
};

struct RunInfo {
    std::filesystem::path dir;
    ExperimentConfig config;
    std::string hash;
    std::vector<long> S;
    std::vector<KRecord> records;  // one per k in S, in order; may be short
    int computed = 0, reused = 0;

    const KRecord* record(long k) const;
    // The last ceil(|S|/2) elements of S.
    std::vector<long> top_half() const;
};

// Deterministic samples drawn from the config seed.
std::vector<std::size_t> sample_centers(const ExperimentConfig& cfg, std::size_t sites);
std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(const ExperimentConfig& cfg, std::size_t sites);
std::vector<std::size_t> sample_sites(const ExperimentConfig& cfg, std::size_t sites);

// All computations for one approximant. Exceptions from a stage end the
// level with status "failed" and the stage name; they do not propagate.
KRecord compute_level(const ExperimentConfig& cfg, const IntegralApproximant& ap);

// Validates cfg (ConfigError before any compute), then runs every k in S.
// Levels already on disk with the same config hash are reused. Throws
// std::runtime_error when the directory holds a run of another config.
RunInfo run_pipeline(const ExperimentConfig& cfg, const RunOptions& opt = {});
RunInfo load_run(const std::filesystem::path& dir);

// Least-squares fit of log v against log k.
struct SlopeFit {
    std::string metric;
    int points = 0;
    double slope = 0, intercept = 0;
    double slope_se = 0, intercept_se = 0;
    double residual = 0;  // rms of the log residuals
};

class ConvergenceSeries {
public:
    // Keys must be strictly increasing in k per metric.
    void add(long k, const std::string& metric, double value);
    std::vector<std::string> metrics() const;
    const std::vector<std::pair<long, double>>& points(const std::string& metric) const;

private:
    std::map<std::string, std::vector<std::pair<long, double>>> data_;
};

// Throws std::invalid_argument with fewer than 4 points or a nonpositive
// value.
SlopeFit fit_loglog(const std::string& metric, const std::vector<std::pair<long, double>>& pts);
// One fit per metric over the k in `keep` (all when empty); metrics with
// fewer than 4 usable points are skipped.
std::vector<SlopeFit> fit_rates(const ConvergenceSeries& s, const std::set<long>& keep = {});

ConvergenceSeries series_of(const RunInfo& run);

struct CriterionResult {
    int id = 0;
    std::string name;
    std::string status;  // pass, fail, incomplete, n/a
    std::string measured;
    json values;
};

// Pinned thresholds of the run-level acceptance criteria.
struct CriteriaThresholds {
    double gap_factor = 0.5;     // mu_{N_k+1} >= gap_factor delta0 k
    double dim_tol = 0.10;       // relative, dimension growth
    double correction = 1.25;    // ratio <= correction * 4/(delta0 k)
    double peak_value = 0.10;    // | |s_h(x)| - 1 |
    double peak_noise = 0.10;    // nonincreasing within 10 %
    double jet_fraction = 0.5;
    double separation = 1e-6;
    double slope_c0 = -0.9, slope_c2 = -0.4, slope_fs = -0.4, slope_purity = -0.4;
};

// Criteria 3, 4, 5, 7, 8, 9 and 10 as far as one run can decide them.
std::vector<CriterionResult> evaluate_run(const RunInfo& run, const CriteriaThresholds& t = {});

// Verdict JSON of a run (no timestamps) and the human summary.
json verdict_json(const RunInfo& run, const std::vector<CriterionResult>& results);
std::string summary_text(const RunInfo& run, const std::vector<CriterionResult>& results);
// 0 all pass, 1 some criterion failed, 2 incomplete run.
int verdict_exit_code(const std::vector<CriterionResult>& results);

// The verbs of the command-line runner, writing their artifacts into the
// run directory.
// fits.csv and fits.json over the top half of S (or all of S).
std::vector<SlopeFit> fit_run(const RunInfo& run, bool top_half_only = true);
// verdict.json and report.txt; returns the exit code.
int report_run(const RunInfo& run, std::ostream& os);
// spectrum_k<k>.dat (index, eigenvalue); returns its text. Throws when the
// level is not on disk.
std::string dump_spectrum(const RunInfo& run, long k);

}  // namespace tlab
