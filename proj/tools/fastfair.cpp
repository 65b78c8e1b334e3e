// fastfair: run a scenario file or a parameter sweep and write CSV results.
//
//   fastfair run scenarios/staggered_starts.ini --out results/staggered
//   fastfair sweep scenarios/rtt_sweep.ini --out results/rtt
//
// Exit codes: 0 success, 1 invalid input, 2 simulation aborted.

#include "fastfair/sweep.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitAborted = 2;

struct Options {
    std::string file;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    bool quiet = false;
    int workers = 0;
};

void add_common(CLI::App& cmd, Options& opt, const char* file_help) {
    cmd.add_option("file", opt.file, file_help)->required();
    cmd.add_option("--out", opt.out, "output directory")->capture_default_str();
    cmd.add_option("--seed", opt.seed, "override the scenario seed");
    cmd.add_option("--dt", opt.dt, "override the integration step (s)");
    cmd.add_flag("--quiet", opt.quiet, "print nothing on success");
}

fastfair::RunOverrides overrides(const Options& opt) { return {opt.seed, opt.dt}; }

int do_run(const Options& opt) {
    using namespace fastfair;
    const Scenario sc = apply_overrides(build_scenario(load_document(opt.file)), overrides(opt));
    const Trace trace = run_scenario(sc);
    const SummaryRow row = summarize(sc, trace);
    write_run_outputs(opt.out, trace, row);
    if (!opt.quiet) {
        write_summary_header(std::cout, false);
        write_summary_row(std::cout, row, false);
    }
    return 0;
}

int do_sweep(const Options& opt) {
    using namespace fastfair;
    const SweepSpec spec = parse_sweep(load_document(opt.file));
    auto progress = [&](const SummaryRow& r) {
        if (opt.quiet) return;
        std::fprintf(stderr, "  %s value=%s %s fairness=%s\n", r.status == "ok" ? "done" : "FAIL",
                     detail::fmt_g(r.sweep_value.value_or(0)).c_str(), r.estimator.c_str(),
                     r.status == "ok" ? detail::fmt_g(r.fairness_ratio).c_str()
                                      : r.status.c_str());
    };
    const auto rows = run_sweep(spec, overrides(opt), opt.workers, progress);

    std::filesystem::create_directories(opt.out);
    const auto path = std::filesystem::path(opt.out) / "summary.csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_summary_header(out, true);
    for (const auto& r : rows) write_summary_row(out, r, true);
    if (!opt.quiet) {
        write_summary_header(std::cout, true);
        for (const auto& r : rows) write_summary_row(std::cout, r, true);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fluid-model simulator for delay-based congestion control"};
    app.require_subcommand(1);
    Options opt;
    auto* run = app.add_subcommand("run", "simulate one scenario file");
    add_common(*run, opt, "scenario file");
    auto* sweep = app.add_subcommand("sweep", "run every point of a sweep file");
    add_common(*sweep, opt, "sweep file");
    sweep->add_option("--workers", opt.workers, "parallel runs (default: from the file)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalid;
    }

    try {
        return run->parsed() ? do_run(opt) : do_sweep(opt);
    } catch (const fastfair::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const fastfair::SimulationError& e) {
        std::cerr << "simulation aborted: " << e.what() << '\n';
        return kExitAborted;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitAborted;
    }
}
