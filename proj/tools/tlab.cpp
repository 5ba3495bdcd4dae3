// Command-line runner: run, fit, report, dump-spectrum.
#include <iostream>

#include "CLI11.hpp"
#include "toruslab/pipeline.hpp"

using namespace tlab;

int main(int argc, char** argv) {
    CLI::App app{"toruslab experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    bool quiet = false;
    int workers = 0;
    auto* run = app.add_subcommand("run", "run every level of a config (resumes an existing run)");
    run->add_option("config", config_path, "flat key = value config file")->required();
    run->add_flag("-q,--quiet", quiet, "no per-level progress");
    run->add_option("-j,--workers", workers, "override the workers key");

    std::string dir;
    bool all_k = false;
    auto* fit = app.add_subcommand("fit", "log-log slopes of the convergence series");
    fit->add_option("run-dir", dir)->required();
    fit->add_flag("--all", all_k, "fit over all of S instead of its top half");

    auto* report = app.add_subcommand("report", "acceptance verdicts; exit 0 pass, 1 fail, 2 incomplete");
    report->add_option("run-dir", dir)->required();

    long k = 0;
    auto* dump = app.add_subcommand("dump-spectrum", "two-column eigenvalue listing of one level");
    dump->add_option("run-dir", dir)->required();
    dump->add_option("k", k)->required();

    int n_defaults = 1;
    auto* defaults = app.add_subcommand("defaults", "print the default config for n = 1 or 2");
    defaults->add_option("n", n_defaults)->check(CLI::IsMember({1, 2}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto cfg = load_config(config_path);
            if (workers > 0) cfg.workers = workers;
            RunOptions opt;
            opt.quiet = quiet;
            auto info = run_pipeline(cfg, opt);
            std::cout << info.dir.string() << ": " << info.S.size() << " levels, " << info.computed << " computed, "
                      << info.reused << " reused\n";
            for (const auto& r : info.records)
                if (r.status != "ok") std::cout << "  k=" << r.k << " failed at " << r.stage << ": " << r.error << "\n";
            return 0;
        }
        if (*fit) {
            auto info = load_run(dir);
            for (const auto& f : fit_run(info, !all_k))
                std::cout << f.metric << ": slope " << fmt17(f.slope) << " +- " << fmt17(f.slope_se) << " ("
                          << f.points << " points)\n";
            return 0;
        }
        if (*report) return report_run(load_run(dir), std::cout);
        if (*dump) {
            std::cout << dump_spectrum(load_run(dir), k);
            return 0;
        }
        if (*defaults) {
            std::cout << canonical_text(default_config(n_defaults));
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
