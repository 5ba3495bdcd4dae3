#include "toruslab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace tlab {

namespace fs = std::filesystem;

long section_count(int n, const std::vector<long>& m) {
    if (n == 1) return m.at(0);
    return m.at(0) * m.at(5) - m.at(1) * m.at(4) + m.at(2) * m.at(3);
}

// ---------------------------------------------------------------- records

namespace {

json arr3(const std::array<double, 3>& a) { return json::array({a[0], a[1], a[2]}); }
std::array<double, 3> get3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

std::string level_name(long k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "k%04ld", k);
    return buf;
}

std::string short_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

json to_json(const KRecord& r) {
    json j;
    j["k"] = r.k;
    j["status"] = r.status;
    j["stage"] = r.stage;
    j["error"] = r.error;
    j["config_hash"] = r.config_hash;
    j["periods"] = r.periods;
    j["err_total"] = r.err_total;
    j["err_02"] = r.err_02;
    j["m_k"] = r.m_k;
    j["delta0"] = r.delta0;
    j["mu"] = r.mu;
    j["residuals"] = r.residuals;
    j["iterations"] = r.iterations;
    j["dim"] = r.dim;
    j["threshold"] = r.threshold;
    j["gap"] = {{"pass", r.gap_pass}, {"lower", r.gap_lower}, {"upper", r.gap_upper},
                {"mu_next", r.mu_next}, {"ratio", r.gap_ratio}, {"note", r.gap_note}};
    json peaks = json::array();
    for (const auto& p : r.peaks)
        peaks.push_back({{"center", p.center}, {"snh2", p.snh2}, {"dbar2", p.dbar2}, {"ratio", p.ratio},
                         {"bound_leading", p.bound_leading}, {"bound", p.bound}, {"value", p.value},
                         {"deviation", p.deviation}, {"eps", p.eps}, {"norm_sh", p.norm_sh}, {"lower", p.lower},
                         {"upper", p.upper}, {"ball_c0", p.ball_c0}, {"mass_fraction", p.mass_fraction},
                         {"split_residual", p.split_residual}, {"image_orthogonality", p.image_orthogonality},
                         {"bound_ok", p.bound_ok}, {"bracket_ok", p.bracket_ok}, {"ball_ok", p.ball_ok}});
    j["peaks"] = peaks;
    json jets = json::array();
    for (const auto& q : r.jets)
        jets.push_back({{"center", q.center}, {"axis", q.axis}, {"corrected", q.corrected},
                        {"uncorrected", q.uncorrected}, {"ratio", q.ratio}, {"pass", q.pass}});
    j["jets"] = jets;
    j["tian_pivots"] = r.tian_pivots;
    j["tian_note"] = r.tian_note;
    j["embedding"] = r.embedding;
    if (r.embedding) {
        j["bergman"] = {{"B_min", r.B_min}, {"B_max", r.B_max}, {"period_defect", r.period_defect}};
        j["distances"] = {{"tk_alpha", arr3(r.dist.tk_alpha)}, {"fs_tk", arr3(r.dist.fs_tk)},
                          {"fs_alpha", arr3(r.dist.fs_alpha)}, {"fs02", arr3(r.dist.fs02)},
                          {"fs20", arr3(r.dist.fs20)}};
        j["sampling"] = {{"pairs", r.pairs}, {"separated", r.separated}, {"min_distance", r.min_distance},
                         {"sites", r.sites}, {"immersive", r.immersive},
                         {"min_singular_ratio", r.min_singular_ratio}};
    }
    return j;
}

KRecord record_from_json(const json& j) {
    KRecord r;
    r.k = j.at("k").get<long>();
    r.status = j.at("status").get<std::string>();
    r.stage = j.at("stage").get<std::string>();
    r.error = j.at("error").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.periods = j.at("periods").get<std::vector<long>>();
    r.err_total = j.at("err_total").get<double>();
    r.err_02 = j.at("err_02").get<double>();
    r.m_k = j.at("m_k").get<long>();
    r.delta0 = j.at("delta0").get<double>();
    r.mu = j.at("mu").get<std::vector<double>>();
    r.residuals = j.at("residuals").get<std::vector<double>>();
    r.iterations = j.at("iterations").get<int>();
    r.dim = j.at("dim").get<int>();
    r.threshold = j.at("threshold").get<double>();
    const auto& g = j.at("gap");
    r.gap_pass = g.at("pass").get<bool>();
    r.gap_lower = g.at("lower").get<double>();
    r.gap_upper = g.at("upper").get<double>();
    r.mu_next = g.at("mu_next").get<double>();
    r.gap_ratio = g.at("ratio").get<double>();
    r.gap_note = g.at("note").get<std::string>();
    for (const auto& p : j.at("peaks")) {
        PeakStat s;
        s.center = p.at("center").get<std::size_t>();
        s.snh2 = p.at("snh2").get<double>();
        s.dbar2 = p.at("dbar2").get<double>();
        s.ratio = p.at("ratio").get<double>();
        s.bound_leading = p.at("bound_leading").get<double>();
        s.bound = p.at("bound").get<double>();
        s.value = p.at("value").get<double>();
        s.deviation = p.at("deviation").get<double>();
        s.eps = p.at("eps").get<double>();
        s.norm_sh = p.at("norm_sh").get<double>();
        s.lower = p.at("lower").get<double>();
        s.upper = p.at("upper").get<double>();
        s.ball_c0 = p.at("ball_c0").get<double>();
        s.mass_fraction = p.at("mass_fraction").get<double>();
        s.split_residual = p.at("split_residual").get<double>();
        s.image_orthogonality = p.at("image_orthogonality").get<double>();
        s.bound_ok = p.at("bound_ok").get<bool>();
        s.bracket_ok = p.at("bracket_ok").get<bool>();
        s.ball_ok = p.at("ball_ok").get<bool>();
        r.peaks.push_back(s);
    }
    for (const auto& q : j.at("jets")) {
        JetStat s;
        s.center = q.at("center").get<std::size_t>();
        s.axis = q.at("axis").get<int>();
        s.corrected = q.at("corrected").get<double>();
        s.uncorrected = q.at("uncorrected").get<double>();
        s.ratio = q.at("ratio").get<double>();
        s.pass = q.at("pass").get<bool>();
        r.jets.push_back(s);
    }
    r.tian_pivots = j.at("tian_pivots").get<std::vector<double>>();
    r.tian_note = j.at("tian_note").get<std::string>();
    r.embedding = j.at("embedding").get<bool>();
    if (r.embedding) {
        const auto& b = j.at("bergman");
        r.B_min = b.at("B_min").get<double>();
        r.B_max = b.at("B_max").get<double>();
        r.period_defect = b.at("period_defect").get<double>();
        const auto& d = j.at("distances");
        r.dist.k = r.k;
        r.dist.tk_alpha = get3(d.at("tk_alpha"));
        r.dist.fs_tk = get3(d.at("fs_tk"));
        r.dist.fs_alpha = get3(d.at("fs_alpha"));
        r.dist.fs02 = get3(d.at("fs02"));
        r.dist.fs20 = get3(d.at("fs20"));
        const auto& s = j.at("sampling");
        r.pairs = s.at("pairs").get<int>();
        r.separated = s.at("separated").get<int>();
        r.min_distance = s.at("min_distance").get<double>();
        r.sites = s.at("sites").get<int>();
        r.immersive = s.at("immersive").get<int>();
        r.min_singular_ratio = s.at("min_singular_ratio").get<double>();
    }
    return r;
}

// ---------------------------------------------------------------- samples

std::vector<std::size_t> sample_centers(const ExperimentConfig& cfg, std::size_t sites) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> u(0, sites - 1);
    std::vector<std::size_t> c(static_cast<std::size_t>(cfg.centers));
    for (auto& x : c) x = u(rng);
    return c;
}

std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(const ExperimentConfig& cfg, std::size_t sites) {
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_int_distribution<std::size_t> u(0, sites - 1);
    std::vector<std::pair<std::size_t, std::size_t>> p;
    while (static_cast<int>(p.size()) < cfg.pairs) {
        const std::size_t x = u(rng), y = u(rng);
        if (x != y) p.emplace_back(x, y);
    }
    return p;
}

std::vector<std::size_t> sample_sites(const ExperimentConfig& cfg, std::size_t sites) {
    std::mt19937_64 rng(cfg.seed ^ 0xc2b2ae3d27d4eb4full);
    std::uniform_int_distribution<std::size_t> u(0, sites - 1);
    std::vector<std::size_t> s(static_cast<std::size_t>(cfg.sites));
    for (auto& x : s) x = u(rng);
    return s;
}

// ---------------------------------------------------------------- one level

KRecord compute_level(const ExperimentConfig& cfg, const IntegralApproximant& ap) {
    KRecord r;
    r.k = ap.k;
    r.config_hash = config_hash(cfg);
    r.periods = ap.m;
    r.err_total = ap.err_total;
    r.err_02 = ap.err_02;
    r.m_k = section_count(cfg.n, ap.m);
    const auto alpha = cfg.alpha();
    r.delta0 = delta0(alpha, HermitianForm::identity(cfg.n));
    const long k = ap.k;
    std::string stage = "bundle";
    try {
        auto geom = build_geometry(cfg.n, cfg.N);
        auto b = build_bundle(ap, geom);

        stage = "spectrum";
        const int cluster = static_cast<int>(std::max<long>(r.m_k, predicted_cluster(k, alpha)));
        const int block = cluster + 8;
        auto sl = lowest_eigenpairs(make_operator(OpKind::laplacian_q0, b), block, cfg.solver_tol, cfg.seed,
                                    cluster + 4);
        // Ritz values past the converged prefix are only upper bounds; the
        // prefix uses the acceptance test of lobpcg itself
        std::size_t keep = 0;
        while (keep < sl.mu.size() && sl.residuals[keep] <= 10 * cfg.solver_tol * std::max(1.0, std::abs(sl.mu[keep])))
            ++keep;
        sl.mu.resize(keep);
        sl.residuals.resize(keep);
        sl.fields.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(keep));
        r.mu = sl.mu;
        r.residuals = sl.residuals;
        r.iterations = sl.iterations;

        stage = "hk";
        auto Hk = build_Hk(sl, k, cfg.threshold_C, cfg.eps);
        r.dim = Hk.dim();
        r.threshold = Hk.threshold;
        if (Hk.dim() == 0) throw std::runtime_error("H_k is empty");

        stage = "gap";
        auto gv = spectral_gap_certificate(sl, k, r.delta0, cfg.eps0_fraction * r.delta0, cfg.threshold_C, cfg.eps,
                                           cfg.g_disc);
        r.gap_pass = gv.pass;
        r.gap_lower = gv.lower;
        r.gap_upper = gv.upper;
        r.mu_next = gv.mu_next;
        r.gap_ratio = gv.gap_ratio;
        r.gap_note = gv.note;

        stage = "peaks";
        const auto centers = sample_centers(cfg, geom->sites);
        const auto pc = cfg.peak_constants();
        const auto pp = cfg.peak_params();
        for (std::size_t x : centers) {
            auto ps = peak_section(Hk, alpha, x, r.delta0, pc, pp);
            auto rep = peak_report(ps, r.delta0, pc);
            PeakStat s;
            s.center = x;
            s.snh2 = ps.snh2;
            s.dbar2 = ps.dbar2;
            s.ratio = ps.ratio;
            s.bound_leading = ps.bound_leading;
            s.bound = ps.bound;
            s.bound_ok = ps.bound_ok;
            s.value = ps.value_at_center;
            s.deviation = rep.deviation;
            s.eps = rep.eps;
            s.norm_sh = rep.norm_sh;
            s.lower = rep.lower;
            s.upper = rep.upper;
            s.bracket_ok = rep.bracket_ok;
            s.ball_c0 = rep.ball_c0;
            s.ball_ok = rep.ball_ok;
            s.mass_fraction = rep.mass_fraction;
            s.split_residual = ps.split_residual;
            s.image_orthogonality = ps.image_orthogonality;
            r.peaks.push_back(s);
        }

        stage = "jets";
        for (std::size_t x : centers)
            for (int a = 0; a < cfg.n; ++a) {
                MultiIndex m{0, 0};
                m[static_cast<std::size_t>(a)] = 1;
                auto v = jet_generation_check(Hk, alpha, x, m, 1.0, pp);
                r.jets.push_back(JetStat{x, a, std::abs(v.corrected), std::abs(v.uncorrected), v.ratio, v.pass});
            }

        stage = "tian";
        auto ortho = orthonormal_basis(Hk);
        if (ortho.dim() >= cfg.n + 1) {
            try {
                r.tian_pivots = tian_basis(ortho, centers.front()).pivots;
            } catch (const JetGenerationFailure& e) {
                r.tian_note = e.what();
            }
        } else {
            r.tian_note = "dim H_k <= n";
        }

        stage = "embedding";
        auto km = kodaira_map(ortho);
        auto bm = bergman_field(ortho, alpha, k);
        auto fsp = fs_pullback(km, k);
        r.dist = convergence_norms(bm, fsp, alpha);
        r.B_min = bm.B.minCoeff();
        r.B_max = bm.B.maxCoeff();
        const auto pT = form_periods(bm.T);
        const auto pA = form_periods(constant_form(geom, two_form(alpha)));
        for (std::size_t i = 0; i < pT.size(); ++i) r.period_defect = std::max(r.period_defect, std::abs(pT[i] - pA[i]));
        auto v = separation_and_immersion(km, sample_pairs(cfg, geom->sites), sample_sites(cfg, geom->sites));
        r.pairs = v.pairs;
        r.separated = v.separated;
        r.min_distance = v.min_distance;
        r.sites = v.sites;
        r.immersive = v.immersive;
        r.min_singular_ratio = v.min_singular_ratio;
        r.embedding = true;
    } catch (const std::exception& e) {
        r.status = "failed";
        r.stage = stage;
        r.error = e.what();
    }
    return r;
}

// ---------------------------------------------------------------- runs

const KRecord* RunInfo::record(long k) const {
    for (const auto& r : records)
        if (r.k == k) return &r;
    return nullptr;
}

std::vector<long> RunInfo::top_half() const {
    const std::size_t h = (S.size() + 1) / 2;
    return std::vector<long>(S.end() - static_cast<std::ptrdiff_t>(h), S.end());
}

namespace {

std::optional<KRecord> read_record(const fs::path& p) {
    if (!fs::exists(p)) return std::nullopt;
    try {
        return record_from_json(json::parse(read_file(p)));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void write_spectrum(const fs::path& dir, const KRecord& r) {
    CsvTable t({"index", "eigenvalue", "residual"});
    for (std::size_t i = 0; i < r.mu.size(); ++i) t.row({std::to_string(i), fmt17(r.mu[i]), fmt17(r.residuals[i])});
    write_file_atomic(dir / ("spectrum_" + level_name(r.k) + ".csv"), t.str());
}

void write_tables(const RunInfo& run, const std::vector<IntegralApproximant>& aps) {
    const fs::path& d = run.dir;
    {
        std::ostringstream os;
        write_approximants_csv(os, aps);
        write_file_atomic(d / "approximants.csv", os.str());
    }
    CsvTable hk({"k", "m_k", "dim", "threshold", "mu_last", "mu_next", "gap_lower", "gap_upper", "gap_ratio",
                 "gap_pass", "iterations"});
    CsvTable dimt({"k", "dim", "value", "target", "rel_dev"});
    CsvTable peaks({"k", "x", "snh2", "dbar2", "ratio", "bound", "value", "bound_ok", "value_ok"});
    CsvTable prep({"k", "x", "deviation", "eps", "norm_sh", "lower", "upper", "bracket_ok", "ball_c0", "ball_ok",
                   "mass_fraction", "split_residual", "image_orthogonality"});
    CsvTable jets({"k", "x", "axis", "corrected", "uncorrected", "ratio", "pass"});
    CsvTable emb({"k", "m_k", "pairs", "separated", "min_distance", "sites", "immersive", "min_singular_ratio",
                  "tian_pivot_min", "tian_note"});
    CsvTable dist({"k", "B_min", "B_max", "period_defect", "tk_alpha_c0", "tk_alpha_c1", "tk_alpha_c2", "fs_tk_c0",
                   "fs_tk_c1", "fs_tk_c2", "fs_alpha_c0", "fs_alpha_c1", "fs_alpha_c2", "fs02_c0", "fs02_c1",
                   "fs02_c2", "fs20_c0", "fs20_c1", "fs20_c2"});
    CsvTable fail({"k", "stage", "error"});
    const int n = run.config.n;
    const double target = alpha_volume(run.config.alpha());
    const double nf = n == 1 ? 1.0 : 2.0;
    auto b = [](bool v) { return std::string(v ? "1" : "0"); };
    for (const auto& r : run.records) {
        const std::string k = std::to_string(r.k);
        if (r.status != "ok") {
            std::string msg = r.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            fail.row({k, r.stage, msg});
            continue;
        }
        hk.row({k, std::to_string(r.m_k), std::to_string(r.dim), fmt17(r.threshold),
                fmt17(r.dim > 0 ? r.mu[static_cast<std::size_t>(r.dim - 1)] : 0.0), fmt17(r.mu_next),
                fmt17(r.gap_lower), fmt17(r.gap_upper), fmt17(r.gap_ratio), b(r.gap_pass),
                std::to_string(r.iterations)});
        const double v = nf * r.dim / std::pow(double(r.k), n);
        dimt.row({k, std::to_string(r.dim), fmt17(v), fmt17(target), fmt17(v / target - 1)});
        for (const auto& p : r.peaks) {
            peaks.row({k, std::to_string(p.center), fmt17(p.snh2), fmt17(p.dbar2), fmt17(p.ratio), fmt17(p.bound),
                       fmt17(p.value), b(p.bound_ok), b(p.deviation <= p.eps)});
            prep.row({k, std::to_string(p.center), fmt17(p.deviation), fmt17(p.eps), fmt17(p.norm_sh),
                      fmt17(p.lower), fmt17(p.upper), b(p.bracket_ok), fmt17(p.ball_c0), b(p.ball_ok),
                      fmt17(p.mass_fraction), fmt17(p.split_residual), fmt17(p.image_orthogonality)});
        }
        for (const auto& q : r.jets)
            jets.row({k, std::to_string(q.center), std::to_string(q.axis), fmt17(q.corrected), fmt17(q.uncorrected),
                      fmt17(q.ratio), b(q.pass)});
        if (r.embedding) {
            const double piv = r.tian_pivots.empty()
                                   ? 0.0
                                   : *std::min_element(r.tian_pivots.begin(), r.tian_pivots.end());
            std::string note = r.tian_note;
            std::replace(note.begin(), note.end(), ',', ';');
            emb.row({k, std::to_string(r.m_k), std::to_string(r.pairs), std::to_string(r.separated),
                     fmt17(r.min_distance), std::to_string(r.sites), std::to_string(r.immersive),
                     fmt17(r.min_singular_ratio), fmt17(piv), note});
            std::vector<std::string> row{k, fmt17(r.B_min), fmt17(r.B_max), fmt17(r.period_defect)};
            for (const auto* a : {&r.dist.tk_alpha, &r.dist.fs_tk, &r.dist.fs_alpha, &r.dist.fs02, &r.dist.fs20})
                for (double x : *a) row.push_back(fmt17(x));
            dist.row(row);
        }
    }
    write_file_atomic(d / "hk.csv", hk.str());
    write_file_atomic(d / "dimension.csv", dimt.str());
    write_file_atomic(d / "peaks.csv", peaks.str());
    write_file_atomic(d / "peak_reports.csv", prep.str());
    write_file_atomic(d / "jets.csv", jets.str());
    write_file_atomic(d / "embedding.csv", emb.str());
    write_file_atomic(d / "distances.csv", dist.str());
    write_file_atomic(d / "failures.csv", fail.str());

    auto series = series_of(run);
    CsvTable st({"k", "metric", "value"});
    for (const auto& m : series.metrics()) {
        std::vector<double> x, y;
        for (const auto& [k, v] : series.points(m)) {
            st.row({std::to_string(k), m, fmt17(v)});
            x.push_back(double(k));
            y.push_back(v);
        }
        write_file_atomic(d / "series" / (m + ".dat"), two_column("k " + m, x, y));
    }
    write_file_atomic(d / "series.csv", st.str());
}

json manifest_json(const RunInfo& run, const std::string& status) {
    json m;
    m["config_hash"] = run.hash;
    m["n"] = run.config.n;
    m["N"] = run.config.N;
    m["S"] = run.S;
    m["status"] = status;
    return m;
}

}  // namespace

RunInfo run_pipeline(const ExperimentConfig& cfg, const RunOptions& opt) {
    validate(cfg);
    RunInfo run;
    run.config = cfg;
    run.dir = output_directory(cfg);
    run.hash = config_hash(cfg);
    auto log = [&](const std::string& s) {
        if (opt.quiet) return;
        if (opt.log)
            opt.log(s);
        else
            std::cerr << s << "\n";
    };

    if (fs::exists(run.dir / "manifest.json")) {
        const auto m = json::parse(read_file(run.dir / "manifest.json"));
        if (m.at("config_hash").get<std::string>() != run.hash)
            throw std::runtime_error("output directory " + run.dir.string() + " holds a run of another config");
    }
    fs::create_directories(run.dir / "levels");
    write_file_atomic(run.dir / "config.txt", canonical_text(cfg));

    const auto alpha = cfg.alpha();
    std::vector<IntegralApproximant> aps;
    if (cfg.k_max > 0) aps = dirichlet_select(period_coordinates(two_form(alpha)), cfg.k_max, cfg.dirichlet_C).approximants;
    for (const auto& a : aps) run.S.push_back(a.k);
    write_file_atomic(run.dir / "manifest.json", dump_json(manifest_json(run, "running")));

    std::vector<KRecord> recs(aps.size());
    std::vector<char> reused(aps.size(), 0);
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&]() {
        for (std::size_t i = next++; i < aps.size(); i = next++) {
            const auto path = run.dir / "levels" / (level_name(aps[i].k) + ".json");
            if (auto old = read_record(path); old && old->status == "ok" && old->config_hash == run.hash) {
                recs[i] = *old;
                reused[i] = 1;
                continue;
            }
            const auto t0 = std::chrono::steady_clock::now();
            recs[i] = compute_level(cfg, aps[i]);
            const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            write_file_atomic(path, dump_json(to_json(recs[i])));
            if (recs[i].status == "ok") write_spectrum(run.dir, recs[i]);
            std::lock_guard<std::mutex> lk(log_mutex);
            log("k = " + std::to_string(aps[i].k) + ": " + recs[i].status +
                (recs[i].status == "ok" ? "" : " at " + recs[i].stage + " (" + recs[i].error + ")") + ", " +
                short_num(sec) + " s");
        }
    };
    const int nw = std::max(1, std::min<int>(cfg.workers, static_cast<int>(aps.size())));
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < aps.size(); ++i) {
        (reused[i] ? run.reused : run.computed)++;
    }
    run.records = std::move(recs);
    write_tables(run, aps);
    const bool all_ok = std::all_of(run.records.begin(), run.records.end(), [](const KRecord& r) { return r.status == "ok"; });
    write_file_atomic(run.dir / "manifest.json", dump_json(manifest_json(run, all_ok ? "complete" : "partial")));
    return run;
}

RunInfo load_run(const fs::path& dir) {
    RunInfo run;
    run.dir = dir;
    if (!fs::exists(dir / "config.txt") || !fs::exists(dir / "manifest.json"))
        throw std::runtime_error(dir.string() + " is not a run directory");
    run.config = load_config(dir / "config.txt");
    const auto m = json::parse(read_file(dir / "manifest.json"));
    run.hash = m.at("config_hash").get<std::string>();
    run.S = m.at("S").get<std::vector<long>>();
    for (long k : run.S)
        if (auto r = read_record(dir / "levels" / (level_name(k) + ".json"))) run.records.push_back(*r);
    return run;
}

// ---------------------------------------------------------------- fits

void ConvergenceSeries::add(long k, const std::string& metric, double value) {
    auto& v = data_[metric];
    if (!v.empty() && v.back().first >= k)
        throw std::invalid_argument("ConvergenceSeries: k not increasing for metric " + metric);
    v.emplace_back(k, value);
}

std::vector<std::string> ConvergenceSeries::metrics() const {
    std::vector<std::string> m;
    for (const auto& [name, _] : data_) m.push_back(name);
    return m;
}

const std::vector<std::pair<long, double>>& ConvergenceSeries::points(const std::string& metric) const {
    static const std::vector<std::pair<long, double>> none;
    auto it = data_.find(metric);
    return it == data_.end() ? none : it->second;
}

SlopeFit fit_loglog(const std::string& metric, const std::vector<std::pair<long, double>>& pts) {
    if (pts.size() < 4) throw std::invalid_argument("fit_loglog: need at least 4 points for " + metric);
    std::vector<double> x, y;
    for (const auto& [k, v] : pts) {
        if (!(v > 0) || k <= 0) throw std::invalid_argument("fit_loglog: nonpositive value in " + metric);
        x.push_back(std::log(double(k)));
        y.push_back(std::log(v));
    }
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0)) throw std::invalid_argument("fit_loglog: all k equal in " + metric);
    SlopeFit f;
    f.metric = metric;
    f.points = static_cast<int>(x.size());
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0;
    for (std::size_t i = 0; i < x.size(); ++i) ssr += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
    const double s2 = ssr / (n - 2);
    f.slope_se = std::sqrt(s2 / sxx);
    f.intercept_se = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    f.residual = std::sqrt(ssr / n);
    return f;
}

std::vector<SlopeFit> fit_rates(const ConvergenceSeries& s, const std::set<long>& keep) {
    std::vector<SlopeFit> out;
    for (const auto& m : s.metrics()) {
        std::vector<std::pair<long, double>> pts;
        for (const auto& p : s.points(m))
            if (keep.empty() || keep.count(p.first)) pts.push_back(p);
        if (pts.size() < 4) continue;
        if (std::any_of(pts.begin(), pts.end(), [](const auto& p) { return !(p.second > 0); })) continue;
        out.push_back(fit_loglog(m, pts));
    }
    return out;
}

ConvergenceSeries series_of(const RunInfo& run) {
    ConvergenceSeries s;
    const int n = run.config.n;
    const double target = alpha_volume(run.config.alpha());
    for (const auto& r : run.records) {
        if (r.status != "ok") continue;
        s.add(r.k, "dim_ratio", (n == 1 ? 1.0 : 2.0) * r.dim / std::pow(double(r.k), n) / target);
        s.add(r.k, "mu_next_over_k", r.mu_next / double(r.k));
        double dev = 0, ratio = 0, jet = 1e300;
        for (const auto& p : r.peaks) {
            dev = std::max(dev, p.deviation);
            ratio = std::max(ratio, p.ratio);
        }
        for (const auto& q : r.jets) jet = std::min(jet, q.ratio);
        if (!r.peaks.empty()) {
            s.add(r.k, "peak_deviation", dev);
            s.add(r.k, "correction_ratio", ratio);
        }
        if (!r.jets.empty()) s.add(r.k, "jet_ratio_min", jet);
        if (!r.embedding) continue;
        const char* names[] = {"c0", "c1", "c2"};
        for (int i = 0; i < 3; ++i) {
            const auto u = static_cast<std::size_t>(i);
            s.add(r.k, std::string("tk_alpha_") + names[i], r.dist.tk_alpha[u]);
            s.add(r.k, std::string("fs_tk_") + names[i], r.dist.fs_tk[u]);
            s.add(r.k, std::string("fs_alpha_") + names[i], r.dist.fs_alpha[u]);
            if (n == 2) s.add(r.k, std::string("fs02_") + names[i], r.dist.fs02[u]);
        }
    }
    return s;
}

// ---------------------------------------------------------------- criteria

namespace {

struct Gather {
    explicit Gather(const RunInfo& r) : run(r) {}
    const RunInfo& run;
    bool missing = false;
    std::vector<long> absent;

    const KRecord* get(long k) {
        const KRecord* r = run.record(k);
        if (!r || r->status != "ok") {
            missing = true;
            absent.push_back(k);
            return nullptr;
        }
        return r;
    }
};

CriterionResult finish(CriterionResult c, bool ok, const Gather& g) {
    if (g.missing) {
        c.status = "incomplete";
        c.values["missing_k"] = g.absent;
    } else {
        c.status = ok ? "pass" : "fail";
    }
    return c;
}

CriterionResult na(CriterionResult c) {
    c.status = "n/a";
    return c;
}

std::vector<long> within(const std::vector<long>& S, long lo, long hi) {
    std::vector<long> out;
    for (long k : S)
        if (k >= lo && k <= hi) out.push_back(k);
    return out;
}

}  // namespace

std::vector<CriterionResult> evaluate_run(const RunInfo& run, const CriteriaThresholds& t) {
    std::vector<CriterionResult> out;
    const int n = run.config.n;
    const double d0 = delta0(run.config.alpha(), HermitianForm::identity(n));

    {  // 3: spectral gap
        CriterionResult c{3, "spectral gap", "", "", json::object()};
        Gather g{run};
        bool ok = true;
        json rows = json::array();
        std::ostringstream ms;
        for (long k : within(run.S, 5, 40)) {
            const KRecord* r = g.get(k);
            if (!r) continue;
            const double thr = hk_threshold(k, run.config.threshold_C, run.config.eps);
            const long count = std::count_if(r->mu.begin(), r->mu.end(), [&](double m) { return m <= thr; });
            const bool has_next = static_cast<std::size_t>(count) < r->mu.size();
            const double next = has_next ? r->mu[static_cast<std::size_t>(count)] : 0.0;
            const bool row_ok = count == r->m_k && has_next && next >= t.gap_factor * d0 * double(k);
            ok = ok && row_ok;
            rows.push_back({{"k", k}, {"count", count}, {"m_k", r->m_k}, {"mu_next", next},
                            {"required", t.gap_factor * d0 * double(k)}, {"pass", row_ok}});
            ms << "k=" << k << ": " << count << "/" << r->m_k << " below, mu_next/(d0 k)="
               << short_num(next / (d0 * double(k))) << "; ";
        }
        c.values["levels"] = rows;
        c.measured = ms.str();
        if (rows.empty() && !g.missing) {
            c.status = "n/a";
            out.push_back(c);
        } else {
            out.push_back(finish(c, ok, g));
        }
    }

    {  // 4: dimension growth, largest two k
        CriterionResult c{4, "dimension growth", "", "", json::object()};
        Gather g{run};
        bool ok = true;
        const double target = alpha_volume(run.config.alpha());
        json rows = json::array();
        std::ostringstream ms;
        const std::size_t m = std::min<std::size_t>(2, run.S.size());
        for (std::size_t i = run.S.size() - m; i < run.S.size(); ++i) {
            const long k = run.S[i];
            const KRecord* r = g.get(k);
            if (!r) continue;
            const double v = (n == 1 ? 1.0 : 2.0) * r->dim / std::pow(double(k), n);
            const double rel = std::abs(v / target - 1);
            ok = ok && rel <= t.dim_tol;
            rows.push_back({{"k", k}, {"dim", r->dim}, {"value", v}, {"target", target}, {"rel_dev", rel}});
            ms << "k=" << k << ": n!dim/k^n=" << short_num(v) << " vs " << short_num(target) << "; ";
        }
        c.values["levels"] = rows;
        c.measured = ms.str();
        if (m < 2) {
            c.status = "n/a";
            out.push_back(c);
        } else {
            out.push_back(finish(c, ok, g));
        }
    }

    {  // 5: correction bound
        CriterionResult c{5, "correction bound", "", "", json::object()};
        Gather g{run};
        bool ok = true;
        double worst = 0;
        json rows = json::array();
        for (long k : within(run.S, 8, 40)) {
            const KRecord* r = g.get(k);
            if (!r) continue;
            const double bound = t.correction * 4.0 / (d0 * double(k));
            double mx = 0;
            for (const auto& p : r->peaks) mx = std::max(mx, p.ratio);
            ok = ok && mx <= bound && !r->peaks.empty();
            worst = std::max(worst, mx / bound);
            rows.push_back({{"k", k}, {"max_ratio", mx}, {"bound", bound}, {"centers", r->peaks.size()}});
        }
        c.values["levels"] = rows;
        c.measured = "max ratio/bound = " + short_num(worst);
        if (rows.empty() && !g.missing) {
            c.status = "n/a";
            out.push_back(c);
        } else {
            out.push_back(finish(c, ok, g));
        }
    }

    const auto top = run.top_half();
    {  // 7: peak values
        CriterionResult c{7, "peak values", "", "", json::object()};
        Gather g{run};
        bool ok = !top.empty();
        double prev = -1;
        json rows = json::array();
        std::ostringstream ms;
        for (long k : top) {
            const KRecord* r = g.get(k);
            if (!r) continue;
            double dev = 0;
            for (const auto& p : r->peaks) dev = std::max(dev, p.deviation);
            const bool mono = prev < 0 || dev <= (1 + t.peak_noise) * prev;
            ok = ok && dev <= t.peak_value && mono && !r->peaks.empty();
            rows.push_back({{"k", k}, {"max_deviation", dev}, {"nonincreasing", mono}});
            ms << "k=" << k << ": " << short_num(dev) << "; ";
            prev = dev;
        }
        c.values["levels"] = rows;
        c.measured = "max | |s_h(x)| - 1 |: " + ms.str();
        out.push_back(top.empty() ? na(c) : finish(c, ok, g));
    }

    {  // 8: jet generation
        CriterionResult c{8, "jet generation", "", "", json::object()};
        Gather g{run};
        bool ok = !top.empty();
        json rows = json::array();
        std::ostringstream ms;
        for (long k : top) {
            const KRecord* r = g.get(k);
            if (!r) continue;
            double mn = 1e300;
            for (const auto& q : r->jets) mn = std::min(mn, q.ratio);
            ok = ok && !r->jets.empty() && mn >= t.jet_fraction;
            rows.push_back({{"k", k}, {"min_ratio", mn}});
            ms << "k=" << k << ": " << short_num(mn) << "; ";
        }
        c.values["levels"] = rows;
        c.measured = "min corrected/uncorrected: " + ms.str();
        out.push_back(top.empty() ? na(c) : finish(c, ok, g));
    }

    {  // 9: embedding sampling (n = 1)
        CriterionResult c{9, "embedding sampling", "", "", json::object()};
        if (n != 1) {
            c.status = "n/a";
            out.push_back(c);
        } else {
            Gather g{run};
            bool ok = true;
            json rows = json::array();
            std::ostringstream ms;
            for (long k : run.S) {
                const KRecord* rr = run.record(k);
                if (rr && rr->m_k < 3) continue;
                const KRecord* r = g.get(k);
                if (!r) continue;
                const bool row_ok = r->embedding && r->pairs == run.config.pairs && r->separated == r->pairs &&
                                    r->sites == run.config.sites && r->immersive == r->sites &&
                                    (r->pairs == 0 || r->min_distance > t.separation);
                ok = ok && row_ok;
                rows.push_back({{"k", k}, {"separated", r->separated}, {"pairs", r->pairs},
                                {"immersive", r->immersive}, {"sites", r->sites}, {"min_distance", r->min_distance}});
                ms << "k=" << k << ": " << r->separated << "/" << r->pairs << " sep, " << r->immersive << "/"
                   << r->sites << " imm; ";
            }
            c.values["levels"] = rows;
            c.measured = ms.str();
            out.push_back(rows.empty() && !g.missing ? na(c) : finish(c, ok, g));
        }
    }

    {  // 10: Tian convergence
        CriterionResult c{10, "Tian convergence", "", "", json::object()};
        Gather g{run};
        for (long k : top) g.get(k);
        ConvergenceSeries s = series_of(run);
        std::set<long> keep(top.begin(), top.end());
        std::vector<std::pair<std::string, double>> wanted;
        if (n == 1)
            wanted = {{"tk_alpha_c0", t.slope_c0}, {"tk_alpha_c2", t.slope_c2}, {"fs_tk_c2", t.slope_fs}};
        else
            wanted = {{"fs02_c0", t.slope_purity}};
        bool ok = true;
        json fits = json::array();
        std::ostringstream ms;
        for (const auto& [metric, limit] : wanted) {
            std::vector<std::pair<long, double>> pts;
            for (const auto& p : s.points(metric))
                if (keep.count(p.first)) pts.push_back(p);
            try {
                auto f = fit_loglog(metric, pts);
                const bool fok = f.slope <= limit;
                ok = ok && fok;
                fits.push_back({{"metric", metric}, {"slope", f.slope}, {"slope_se", f.slope_se}, {"limit", limit},
                                {"points", f.points}, {"pass", fok}});
                ms << metric << " slope " << short_num(f.slope) << " (<= " << limit << "); ";
            } catch (const std::invalid_argument& e) {
                ok = false;
                fits.push_back({{"metric", metric}, {"error", e.what()}, {"limit", limit}});
                ms << metric << ": " << e.what() << "; ";
            }
        }
        c.values["fits"] = fits;
        c.measured = ms.str();
        out.push_back(top.empty() ? na(c) : finish(c, ok, g));
    }
    return out;
}

json verdict_json(const RunInfo& run, const std::vector<CriterionResult>& results) {
    json v;
    v["config_hash"] = run.hash;
    v["n"] = run.config.n;
    v["N"] = run.config.N;
    v["S"] = run.S;
    json failed = json::array();
    for (long k : run.S) {
        const KRecord* r = run.record(k);
        if (!r)
            failed.push_back({{"k", k}, {"stage", "missing"}, {"error", ""}});
        else if (r->status != "ok")
            failed.push_back({{"k", k}, {"stage", r->stage}, {"error", r->error}});
    }
    v["failed_levels"] = failed;
    json cs = json::array();
    for (const auto& c : results)
        cs.push_back({{"id", c.id}, {"name", c.name}, {"status", c.status}, {"measured", c.measured}, {"values", c.values}});
    v["criteria"] = cs;
    const int code = verdict_exit_code(results);
    v["status"] = failed.empty() ? (code == 0 ? "pass" : code == 1 ? "fail" : "incomplete") : "incomplete";
    return v;
}

std::string summary_text(const RunInfo& run, const std::vector<CriterionResult>& results) {
    std::ostringstream os;
    os << "run " << run.dir.string() << " (config " << run.hash << ", n=" << run.config.n << ", N=" << run.config.N
       << ")\n";
    os << "S = {";
    for (std::size_t i = 0; i < run.S.size(); ++i) os << (i ? "," : "") << run.S[i];
    os << "}, levels on disk: " << run.records.size() << "\n";
    for (const auto& r : run.records)
        if (r.status != "ok") os << "  level k=" << r.k << " failed at " << r.stage << ": " << r.error << "\n";
    for (const auto& c : results) {
        std::string st = c.status;
        std::transform(st.begin(), st.end(), st.begin(), ::toupper);
        os << "criterion " << c.id << " [" << c.name << "]: " << st;
        if (!c.measured.empty()) os << "  " << c.measured;
        os << "\n";
    }
    return os.str();
}

int verdict_exit_code(const std::vector<CriterionResult>& results) {
    bool fail = false, incomplete = false;
    for (const auto& c : results) {
        fail = fail || c.status == "fail";
        incomplete = incomplete || c.status == "incomplete";
    }
    return incomplete ? 2 : fail ? 1 : 0;
}

// ---------------------------------------------------------------- verbs

std::vector<SlopeFit> fit_run(const RunInfo& run, bool top_half_only) {
    std::set<long> keep;
    if (top_half_only)
        for (long k : run.top_half()) keep.insert(k);
    else
        keep.insert(run.S.begin(), run.S.end());
    auto fits = fit_rates(series_of(run), keep);
    CsvTable t({"metric", "points", "slope", "slope_se", "intercept", "intercept_se", "residual"});
    json j = json::array();
    for (const auto& f : fits) {
        t.row({f.metric, std::to_string(f.points), fmt17(f.slope), fmt17(f.slope_se), fmt17(f.intercept),
               fmt17(f.intercept_se), fmt17(f.residual)});
        j.push_back({{"metric", f.metric}, {"points", f.points}, {"slope", f.slope}, {"slope_se", f.slope_se},
                     {"intercept", f.intercept}, {"intercept_se", f.intercept_se}, {"residual", f.residual}});
    }
    write_file_atomic(run.dir / "fits.csv", t.str());
    write_file_atomic(run.dir / "fits.json", dump_json(json{{"config_hash", run.hash}, {"top_half", top_half_only}, {"fits", j}}));
    return fits;
}

int report_run(const RunInfo& run, std::ostream& os) {
    const auto res = evaluate_run(run);
    const auto v = verdict_json(run, res);
    const auto text = summary_text(run, res) + "overall: " + v.at("status").get<std::string>() + "\n";
    write_file_atomic(run.dir / "verdict.json", dump_json(v));
    write_file_atomic(run.dir / "report.txt", text);
    os << text;
    const int code = verdict_exit_code(res);
    return v.at("status") == "incomplete" ? 2 : code;
}

std::string dump_spectrum(const RunInfo& run, long k) {
    const KRecord* r = run.record(k);
    if (!r || r->status != "ok") throw std::runtime_error("no spectrum for k = " + std::to_string(k) + " in " + run.dir.string());
    std::vector<double> idx;
    for (std::size_t i = 0; i < r->mu.size(); ++i) idx.push_back(double(i));
    auto text = two_column("index eigenvalue, k = " + std::to_string(k), idx, r->mu);
    write_file_atomic(run.dir / ("spectrum_" + level_name(k) + ".dat"), text);
    return text;
}

}  // namespace tlab
