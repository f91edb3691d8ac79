#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "probctl/harness.hpp"
#include "support/oracles.hpp"

using namespace probctl;

namespace {

RunConfig desk_config(int example) {
    RunConfig cfg = default_config(example);
    cfg.pretrain_steps = 600;
    cfg.pretrain_iterations = 120;
    cfg.online_steps = 120;
    cfg.seed = 2024;
    return cfg;
}

} // namespace

TEST_CASE("pretraining improves the forward model and generalizes") {
    const RunConfig cfg = desk_config(1);
    const PretrainResult pre = pretrain(cfg);
    REQUIRE(pre.forward_final_nll < pre.forward_initial_nll);

    const Benchmark bench = make_benchmark(cfg);
    REQUIRE(pre.heldout_rmse < 3.0 * bench.noise.stddev());
}

TEST_CASE("pretrained forward mean lands within the predictive spread on held-out data") {
    const RunConfig cfg = desk_config(1);
    const PretrainResult pre = pretrain(cfg);
    const int total = static_cast<int>(pre.excitation.size());
    int covered = 0, checked = 0;
    for (int j = (total * 4) / 5; j < total; ++j) {
        const Sample& s = pre.excitation[j];
        StateVector z;
        z.y_lags = s.z.head(cfg.n_lags);
        z.u_lags = s.z.tail(cfg.m_lags);
        const Moments m = moments(output_pdf(pre.snapshots.fm, z, s.u));
        if (std::abs(m.mean - s.y) <= 3.0 * std::sqrt(m.variance)) ++covered;
        ++checked;
    }
    // 3-sigma coverage of a calibrated predictive density is ~99.7%
    REQUIRE(covered >= (checked * 9) / 10);
}

TEST_CASE("snapshot round-trip reproduces identical predictions") {
    namespace fs = std::filesystem;
    const RunConfig cfg = desk_config(1);
    const PretrainResult pre = pretrain(cfg);
    const fs::path dir = fs::temp_directory_path() / "probctl_snap_test";
    save_snapshots(pre.snapshots, cfg, dir.string());
    const Snapshots loaded = load_snapshots(dir.string(), cfg);
    fs::remove_all(dir);

    REQUIRE(loaded.fm.net.params() == pre.snapshots.fm.net.params());
    REQUIRE(loaded.ic.net.params() == pre.snapshots.ic.net.params());
    REQUIRE(loaded.bp.forward_net.params() == pre.snapshots.bp.forward_net.params());
    REQUIRE(loaded.bp.controller_net.params() == pre.snapshots.bp.controller_net.params());

    StateVector z;
    z.y_lags = Eigen::VectorXd::Constant(1, 0.4);
    z.u_lags.resize(0);
    const MixtureParams a = output_pdf(pre.snapshots.fm, z, 0.3);
    const MixtureParams b = output_pdf(loaded.fm, z, 0.3);
    REQUIRE(a.means == b.means);
    REQUIRE(a.priors == b.priors);
    REQUIRE(a.variances == b.variances);
}

TEST_CASE("online run produces a complete, internally consistent trace") {
    const RunConfig cfg = desk_config(1);
    const Benchmark bench = make_benchmark(cfg);
    const PretrainResult pre = pretrain(cfg, bench);
    Snapshots snaps = pre.snapshots;
    const Streams streams = make_online_streams(cfg, bench);
    const SimTrace trace = run_online(cfg, snaps, bench, streams.noise, streams.ref);

    REQUIRE_FALSE(trace.failed);
    REQUIRE(static_cast<int>(trace.rows.size()) == cfg.online_steps);
    for (const TraceRow& row : trace.rows) {
        REQUIRE(row.e == row.y - row.y_d); // exact
        REQUIRE(std::abs(row.u) <= cfg.u_max + 1e-12);
        REQUIRE(std::isfinite(row.j_cost));
        if (row.k % cfg.stability_period == 0) REQUIRE(row.stable_flag != stability_not_checked);
        else REQUIRE(row.stable_flag == stability_not_checked);
    }
}

TEST_CASE("identical configuration and seed give byte-identical traces") {
    namespace fs = std::filesystem;
    const RunConfig cfg = desk_config(2);
    const CompareResult a = compare(cfg);
    const CompareResult b = compare(cfg);

    const fs::path dir = fs::temp_directory_path() / "probctl_det_test";
    fs::create_directories(dir);
    a.mdn.write_csv((dir / "a.csv").string());
    b.mdn.write_csv((dir / "b.csv").string());
    a.baseline.write_csv((dir / "ab.csv").string());
    b.baseline.write_csv((dir / "bb.csv").string());
    const auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    REQUIRE(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    REQUIRE(slurp(dir / "ab.csv") == slurp(dir / "bb.csv"));
    fs::remove_all(dir);
}

TEST_CASE("controller decisions never consume future information") {
    const RunConfig cfg = desk_config(1);
    const Benchmark bench = make_benchmark(cfg);
    const PretrainResult pre = pretrain(cfg, bench);
    const Streams streams = make_online_streams(cfg, bench);

    // perturb the noise at one step; everything strictly before is unchanged,
    // and the decision columns (r, y_d, u) at the perturbed step too
    const int k0 = 60;
    Streams bumped = streams;
    bumped.noise[k0] += 0.37;

    Snapshots s1 = pre.snapshots;
    Snapshots s2 = pre.snapshots;
    const SimTrace base = run_online(cfg, s1, bench, streams.noise, streams.ref);
    const SimTrace pert = run_online(cfg, s2, bench, bumped.noise, bumped.ref);

    for (int k = 0; k < k0; ++k) {
        REQUIRE(base.rows[k].y == pert.rows[k].y);
        REQUIRE(base.rows[k].u == pert.rows[k].u);
        REQUIRE(base.rows[k].j_cost == pert.rows[k].j_cost);
    }
    REQUIRE(base.rows[k0].r == pert.rows[k0].r);
    REQUIRE(base.rows[k0].y_d == pert.rows[k0].y_d);
    REQUIRE(base.rows[k0].u == pert.rows[k0].u);
    REQUIRE(base.rows[k0].y != pert.rows[k0].y);
}

TEST_CASE("comparison pipelines consume the identical streams") {
    const RunConfig cfg = desk_config(2);
    const CompareResult res = compare(cfg);
    REQUIRE(res.mdn.rows.size() == res.baseline.rows.size());
    for (std::size_t i = 0; i < res.mdn.rows.size(); ++i) {
        REQUIRE(res.mdn.rows[i].r == res.baseline.rows[i].r);
        REQUIRE(res.mdn.rows[i].y_d == res.baseline.rows[i].y_d);
    }
    REQUIRE(res.mdn.rows.front().method == "mdn");
    REQUIRE(res.baseline.rows.front().method == "baseline");
}

TEST_CASE("summary statistics are recomputable from the emitted trace exactly") {
    namespace fs = std::filesystem;
    const RunConfig cfg = desk_config(1);
    const Benchmark bench = make_benchmark(cfg);
    const PretrainResult pre = pretrain(cfg, bench);
    Snapshots snaps = pre.snapshots;
    const Streams streams = make_online_streams(cfg, bench);
    const SimTrace trace = run_online(cfg, snaps, bench, streams.noise, streams.ref);
    const TraceSummary direct = summarize(trace, cfg.summary_window);

    const fs::path path = fs::temp_directory_path() / "probctl_summary_test.csv";
    trace.write_csv(path.string());
    const SimTrace reread = SimTrace::read_csv(path.string());
    fs::remove(path);
    const TraceSummary redone = summarize(reread, cfg.summary_window);
    REQUIRE(direct.mean_e == redone.mean_e); // exact: to_chars round-trips
    REQUIRE(direct.std_e == redone.std_e);
    REQUIRE(direct.mean_j == redone.mean_j);
}
