// Command-line front end: pretrain, run, compare, plots.

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "probctl/probctl.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir_flag;
};

probctl::RunConfig resolve_config(const CommonOpts& opts) {
    probctl::RunConfig cfg = opts.config_path.empty() ? probctl::default_config(1)
                                                      : probctl::load_config(opts.config_path);
    if (opts.config_path.empty())
        if (const char* env = std::getenv("PROBCTL_OUT_DIR")) cfg.out_dir = env;
    for (const std::string& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        probctl::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!opts.out_dir_flag.empty()) cfg.out_dir = opts.out_dir_flag;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
    auto* c = cmd->add_option("--config", opts.config_path, "key=value configuration file");
    if (config_required) c->required();
    cmd->add_option("--set", opts.overrides, "override a config key, e.g. --set seed=7")
        ->take_all();
    cmd->add_option("--out-dir", opts.out_dir_flag, "output directory (overrides config and env)");
}

int cmd_pretrain(const CommonOpts& opts, const std::string& snapshot_dir) {
    const probctl::RunConfig cfg = resolve_config(opts);
    const std::string dir = snapshot_dir.empty() ? cfg.out_dir + "/snapshots" : snapshot_dir;
    const probctl::PretrainResult pre = probctl::pretrain(cfg);
    probctl::save_snapshots(pre.snapshots, cfg, dir);
    std::cout << "pretrained example " << cfg.example << " on " << cfg.pretrain_steps << " samples\n"
              << "  forward NLL " << probctl::format_double(pre.forward_initial_nll) << " -> "
              << probctl::format_double(pre.forward_final_nll) << "\n"
              << "  held-out mean RMSE " << probctl::format_double(pre.heldout_rmse) << "\n"
              << "  snapshots written to " << dir << "\n";
    return 0;
}

int cmd_run(const CommonOpts& opts, const std::string& snapshot_dir, const std::string& method,
            const std::string& trace_path) {
    const probctl::RunConfig cfg = resolve_config(opts);
    const probctl::Benchmark bench = probctl::make_benchmark(cfg);
    probctl::Snapshots snaps = probctl::load_snapshots(snapshot_dir, cfg);
    const probctl::Streams streams = probctl::make_online_streams(cfg, bench);
    probctl::SimTrace trace;
    if (method == "mdn")
        trace = probctl::run_online(cfg, snaps, bench, streams.noise, streams.ref);
    else if (method == "baseline")
        trace = probctl::run_baseline(cfg, snaps, bench, streams.noise, streams.ref);
    else
        throw std::invalid_argument("--method must be mdn or baseline");
    fs::create_directories(cfg.out_dir);
    const std::string path =
        trace_path.empty() ? cfg.out_dir + "/run_" + method + ".csv" : trace_path;
    trace.write_csv(path);
    const probctl::TraceSummary s = probctl::summarize(trace, cfg.summary_window);
    std::cout << "trace written to " << path << "\n"
              << "  window=" << s.window << " mean_e=" << probctl::format_double(s.mean_e)
              << " std_e=" << probctl::format_double(s.std_e)
              << " mean_J=" << probctl::format_double(s.mean_j) << "\n";
    if (trace.failed) {
        std::cerr << "run halted at step " << trace.failed_step << " (" << trace.failure_reason
                  << ")\n";
        return 2;
    }
    return 0;
}

int cmd_compare(const CommonOpts& opts, const std::string& snapshot_dir) {
    const probctl::RunConfig cfg = resolve_config(opts);
    const probctl::Benchmark bench = probctl::make_benchmark(cfg);
    probctl::CompareResult res;
    if (snapshot_dir.empty()) {
        res = probctl::compare(cfg, bench);
    } else {
        const probctl::Snapshots snaps = probctl::load_snapshots(snapshot_dir, cfg);
        res = probctl::compare_from(cfg, bench, snaps);
    }
    fs::create_directories(cfg.out_dir);
    res.mdn.write_csv(cfg.out_dir + "/compare_mdn.csv");
    res.baseline.write_csv(cfg.out_dir + "/compare_baseline.csv");
    probctl::write_summary(cfg.out_dir + "/summary.txt", res.mdn_summary, res.baseline_summary);
    std::cout << "method=mdn      mean_e=" << probctl::format_double(res.mdn_summary.mean_e)
              << " std_e=" << probctl::format_double(res.mdn_summary.std_e)
              << " mean_J=" << probctl::format_double(res.mdn_summary.mean_j) << "\n"
              << "method=baseline mean_e=" << probctl::format_double(res.baseline_summary.mean_e)
              << " std_e=" << probctl::format_double(res.baseline_summary.std_e)
              << " mean_J=" << probctl::format_double(res.baseline_summary.mean_j) << "\n"
              << "traces and summary written to " << cfg.out_dir << "\n";
    if (res.mdn.failed || res.baseline.failed) {
        std::cerr << "one of the runs halted early; see trace failure markers\n";
        return 2;
    }
    return 0;
}

int cmd_plots(const std::vector<std::string>& trace_paths, const std::string& out_path) {
    std::vector<probctl::SimTrace> traces;
    traces.reserve(trace_paths.size());
    for (const std::string& p : trace_paths) traces.push_back(probctl::SimTrace::read_csv(p));
    probctl::emit_plots(traces, out_path);
    std::cout << "plot written to " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic control with mixture-density forward and inverse models"};
    app.require_subcommand(1);

    CommonOpts pre_opts, run_opts, cmp_opts;
    std::string pre_snapshot_dir, run_snapshot_dir, cmp_snapshot_dir;
    std::string run_method = "mdn", run_trace_path;
    std::vector<std::string> plot_traces;
    std::string plot_out = "control_results.svg";

    CLI::App* pre = app.add_subcommand("pretrain", "offline initialization of all four networks");
    add_common(pre, pre_opts, true);
    pre->add_option("--snapshot", pre_snapshot_dir, "snapshot directory (default <out_dir>/snapshots)");

    CLI::App* run = app.add_subcommand("run", "online control run from a snapshot");
    add_common(run, run_opts, true);
    run->add_option("--snapshot", run_snapshot_dir, "snapshot directory")->required();
    run->add_option("--method", run_method, "mdn | baseline");
    run->add_option("--trace", run_trace_path, "trace output path");

    CLI::App* cmp = app.add_subcommand("compare", "paired mdn/baseline runs on identical streams");
    add_common(cmp, cmp_opts, true);
    cmp->add_option("--snapshot", cmp_snapshot_dir, "reuse snapshots instead of pretraining");

    CLI::App* plt = app.add_subcommand("plots", "render output/tracking-error panels from traces");
    plt->add_option("--trace", plot_traces, "trace CSV file(s)")->required()->take_all();
    plt->add_option("--out", plot_out, "SVG output path");

    try {
        app.parse(argc, argv);
        if (pre->parsed()) return cmd_pretrain(pre_opts, pre_snapshot_dir);
        if (run->parsed()) return cmd_run(run_opts, run_snapshot_dir, run_method, run_trace_path);
        if (cmp->parsed()) return cmd_compare(cmp_opts, cmp_snapshot_dir);
        if (plt->parsed()) return cmd_plots(plot_traces, plot_out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
