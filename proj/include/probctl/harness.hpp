#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probctl/baseline.hpp"
#include "probctl/config.hpp"
#include "probctl/control.hpp"
#include "probctl/models.hpp"
#include "probctl/plants.hpp"
#include "probctl/snapshot.hpp"
#include "probctl/stability.hpp"
#include "probctl/trace.hpp"

namespace probctl {

// rng substream ids, fixed so every entry point derives identical streams
namespace stream {
inline constexpr std::uint64_t forward_init = 1;
inline constexpr std::uint64_t controller_init = 2;
inline constexpr std::uint64_t baseline_init = 3;
inline constexpr std::uint64_t excitation = 4;
inline constexpr std::uint64_t pretrain_noise = 5;
inline constexpr std::uint64_t pretrain_ref = 6;
inline constexpr std::uint64_t online_noise = 7;
inline constexpr std::uint64_t online_ref = 8;
} // namespace stream

struct Benchmark {
    PlantFn plant;
    NoiseMixture noise;
    ReferenceModel ref_model; // prototype; loops copy it to get fresh state
};

inline Benchmark make_benchmark(const RunConfig& cfg) {
    Eigen::VectorXd w(2);
    w << cfg.noise_weights[0], cfg.noise_weights[1];
    if (cfg.example == 1)
        return {[](double y_prev, double u, double eps) { return plant1_output(y_prev, u, eps); },
                benchmark1_noise(w), ReferenceModel{0.25, 0, 0.0}};
    return {[](double y_prev, double u, double eps) { return plant2_output(y_prev, u, eps); },
            benchmark2_noise(w), ReferenceModel{0.32, 1, 0.0}};
}

inline ReferenceInput make_reference_input(const RunConfig& cfg, Rng rng) {
    switch (ref_kind_from_string(cfg.ref_kind)) {
    case RefKind::piecewise:
        return ReferenceInput::piecewise(cfg.ref_level_min, cfg.ref_level_max, cfg.ref_hold, rng);
    case RefKind::sine:
        return ReferenceInput::sine(cfg.sine_amplitude, cfg.sine_period);
    case RefKind::file:
        return ReferenceInput::from_file(cfg.ref_file);
    }
    throw std::logic_error("unreachable");
}

/// Rolling lag window feeding the regressor.
class LagHistory {
public:
    LagHistory(int n, int m) : y_(n, 0.0), u_(m, 0.0) {}

    StateVector state() const {
        StateVector z;
        z.y_lags.resize(static_cast<Eigen::Index>(y_.size()));
        for (std::size_t i = 0; i < y_.size(); ++i) z.y_lags[static_cast<Eigen::Index>(i)] = y_[i];
        z.u_lags.resize(static_cast<Eigen::Index>(u_.size()));
        for (std::size_t i = 0; i < u_.size(); ++i) z.u_lags[static_cast<Eigen::Index>(i)] = u_[i];
        return z;
    }

    double latest_output() const { return y_.front(); }

    void push(double y_new, double u_new) {
        y_.push_front(y_new);
        y_.pop_back();
        if (!u_.empty()) {
            u_.push_front(u_new);
            u_.pop_back();
        }
    }

private:
    std::deque<double> y_;
    std::deque<double> u_;
};

struct Snapshots {
    ForwardModel fm;
    InverseController ic;
    BaselinePair bp;
};

struct PretrainResult {
    Snapshots snapshots;
    double forward_initial_nll = 0.0;
    double forward_final_nll = 0.0;
    double heldout_rmse = 0.0;       // forward mixture mean on the held-out 20%
    double controller_final_nll = 0.0;
    double baseline_final_mse = 0.0;
    std::vector<Sample> excitation;  // full excitation dataset (train + held-out)
};

/// Open-loop excitation run: piecewise-constant u drives the plant, producing
/// (z, u, y) triples for system identification.
inline std::vector<Sample> generate_excitation(const RunConfig& cfg, const Benchmark& bench,
                                               Rng exc_rng, Rng noise_rng) {
    std::vector<Sample> data;
    data.reserve(cfg.pretrain_steps);
    LagHistory hist(cfg.n_lags, cfg.m_lags);
    double y_last = 0.0;
    double u_level = 0.0;
    for (int k = 0; k < cfg.pretrain_steps; ++k) {
        if (k % cfg.excitation_hold == 0) u_level = exc_rng.uniform(cfg.excitation_min, cfg.excitation_max);
        const StateVector z = hist.state();
        const double eps = noise_sample(bench.noise, noise_rng);
        const double y = bench.plant(y_last, u_level, eps);
        data.push_back({z.regressor(), u_level, y});
        hist.push(y, u_level);
        y_last = y;
    }
    return data;
}

/// Offline initialization: fit the forward MDN by batch SCG on the excitation
/// data (last 20% held out), derive controller targets by direct cost
/// minimization, fit the inverse MDN with priors tied to the forward model at
/// each target, and fit the baseline pair the classical way.
inline PretrainResult pretrain(const RunConfig& cfg, const Benchmark& bench) {
    cfg.validate();
    const Rng master(cfg.seed);
    Rng fm_rng = master.fork(stream::forward_init);
    Rng ic_rng = master.fork(stream::controller_init);
    Rng base_rng = master.fork(stream::baseline_init);

    PretrainResult out;
    out.snapshots.fm = make_forward_model(cfg.n_lags, cfg.m_lags, cfg.hidden, cfg.kernels,
                                          cfg.variance_floor, fm_rng);
    out.snapshots.ic = make_inverse_controller(cfg.n_lags, cfg.m_lags, cfg.hidden, cfg.kernels,
                                               cfg.variance_floor, ic_rng);
    out.snapshots.bp = make_baseline(cfg.n_lags, cfg.m_lags, cfg.hidden, cfg.weight_control, base_rng);

    out.excitation = generate_excitation(cfg, bench, master.fork(stream::excitation),
                                         master.fork(stream::pretrain_noise));
    const int total = static_cast<int>(out.excitation.size());
    const int train_n = std::max(1, (total * 4) / 5);
    const std::span<const Sample> train(out.excitation.data(), static_cast<std::size_t>(train_n));
    const std::span<const Sample> heldout(out.excitation.data() + train_n,
                                          static_cast<std::size_t>(total - train_n));

    ForwardModel& fm = out.snapshots.fm;
    {
        ScgState st;
        out.forward_initial_nll = forward_nll_objective(fm, train)(fm.net.params(), nullptr);
        train_forward(fm, st, train, cfg.pretrain_iterations);
        out.forward_final_nll = forward_nll_objective(fm, train)(fm.net.params(), nullptr);
    }
    {
        double acc = 0.0;
        for (const Sample& s : heldout) {
            StateVector z;
            z.y_lags = s.z.head(cfg.n_lags);
            z.u_lags = s.z.tail(cfg.m_lags);
            const double mean = moments(output_pdf(fm, z, s.u)).mean;
            acc += (mean - s.y) * (mean - s.y);
        }
        out.heldout_rmse = heldout.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(heldout.size()));
    }

    // desired-output trajectory over the excitation states
    ReferenceInput ref_in = make_reference_input(cfg, master.fork(stream::pretrain_ref));
    ReferenceModel rm = bench.ref_model;
    const CostWeights w{cfg.weight_variance, cfg.weight_mean, cfg.weight_control};
    std::vector<CtrlSample> ctrl_data;
    std::vector<BaselineCtrlSample> base_ctrl_data;
    ctrl_data.reserve(train_n);
    base_ctrl_data.reserve(train_n);
    for (int j = 0; j < train_n; ++j) {
        const double y_d = rm.step(ref_in.next());
        StateVector z;
        z.y_lags = out.excitation[j].z.head(cfg.n_lags);
        z.u_lags = out.excitation[j].z.tail(cfg.m_lags);
        const double u_star = solve_u_direct(fm, z, y_d, w, cfg.u_min, cfg.u_max);
        // pair tied priors with the control the target corresponds to
        ctrl_data.push_back({out.excitation[j].z, y_d, u_star, output_pdf(fm, z, u_star).priors});
        base_ctrl_data.push_back({out.excitation[j].z, y_d});
    }
    {
        ScgState st;
        out.controller_final_nll =
            train_controller(out.snapshots.ic, st, ctrl_data, cfg.pretrain_iterations);
    }
    {
        ScgState st;
        baseline_train_forward(out.snapshots.bp, st, train, cfg.pretrain_iterations);
        ScgState st2;
        out.baseline_final_mse = baseline_train_controller(out.snapshots.bp, st2, base_ctrl_data,
                                                           cfg.pretrain_iterations);
    }
    return out;
}

inline PretrainResult pretrain(const RunConfig& cfg) { return pretrain(cfg, make_benchmark(cfg)); }

namespace harness_detail {

struct OnlineCtrlRecord {
    Eigen::VectorXd z;
    double y_d = 0.0;
    double u_target = 0.0;
    double u_applied = 0.0;
};

inline StateVector state_from_regressor(const Eigen::VectorXd& z, int n, int m) {
    StateVector s;
    s.y_lags = z.head(n);
    s.u_lags = z.tail(m);
    return s;
}

} // namespace harness_detail

/// The online probabilistic control loop. Per step: (1) the recursive optimal
/// control (direct solve on the first step and whenever the denominator guard
/// fires), (2) controller MDN update toward that target, (3) most-probable
/// control from the controller density, (4) plant step, (5) forward MDN
/// update, (6) cost/error-density logging plus the periodic stability report.
/// Any non-finite value halts the run; the partial trace carries a failure
/// marker.
inline SimTrace run_online(const RunConfig& cfg, Snapshots& snaps, const Benchmark& bench,
                           std::span<const double> noise, std::span<const double> ref) {
    cfg.validate();
    const int steps = static_cast<int>(std::min(noise.size(), ref.size()));
    const CostWeights w{cfg.weight_variance, cfg.weight_mean, cfg.weight_control};
    ForwardModel& fm = snaps.fm;
    InverseController& ic = snaps.ic;

    SimTrace trace;
    trace.rows.reserve(steps);
    LagHistory hist(cfg.n_lags, cfg.m_lags);
    ReferenceModel rm = bench.ref_model;
    ScgState fm_state, ic_state;
    std::deque<Sample> fwd_buf;
    std::deque<harness_detail::OnlineCtrlRecord> ctrl_buf;

    double u_prev = 0.0;
    double ustar_prev = 0.0;
    Eigen::VectorXd chi_prev;
    bool have_prev = false;

    for (int k = 0; k < steps; ++k) {
        const double r = ref[k];
        const double y_d = rm.step(r);
        const StateVector z = hist.state();
        const Eigen::VectorXd chi = z.chi(y_d);
        TraceRow row;
        row.k = k;
        row.r = r;
        row.y_d = y_d;
        row.method = "mdn";

        // (1) optimal-control target
        double u_star;
        if (!have_prev) {
            u_star = solve_u_direct(fm, z, y_d, w, cfg.u_min, cfg.u_max);
        } else {
            const ControlUpdate cu = recursive_u(ustar_prev, chi_prev, chi, fm, w, cfg.n_lags, cfg.m_lags);
            u_star = cu.guard_ok ? cu.u : solve_u_direct(fm, z, y_d, w, cfg.u_min, cfg.u_max);
        }
        u_star = std::clamp(u_star, cfg.u_min, cfg.u_max);

        // (2) controller update; the freshest sample is paired with the
        // previous control until the applied one exists
        ctrl_buf.push_back({z.regressor(), y_d, u_star, u_prev});
        while (static_cast<int>(ctrl_buf.size()) > cfg.replay) ctrl_buf.pop_front();
        std::vector<CtrlSample> ctrl_batch;
        ctrl_batch.reserve(ctrl_buf.size());
        for (const auto& rec : ctrl_buf) {
            const StateVector zr = harness_detail::state_from_regressor(rec.z, cfg.n_lags, cfg.m_lags);
            ctrl_batch.push_back({rec.z, rec.y_d, rec.u_target, output_pdf(fm, zr, rec.u_applied).priors});
        }
        train_controller(ic, ic_state, ctrl_batch, cfg.updates_per_step);

        // (3) control from the most probable branch
        const Eigen::VectorXd tied = output_pdf(fm, z, u_prev).priors;
        const double u = std::clamp(most_probable(control_pdf(ic, z, y_d, tied)), cfg.u_min, cfg.u_max);

        // (4) plant step
        const double eps = noise[k];
        const double y = bench.plant(hist.latest_output(), u, eps);
        ctrl_buf.back().u_applied = u;

        if (!std::isfinite(u_star) || !std::isfinite(u) || !std::isfinite(y)) {
            trace.failed = true;
            trace.failed_step = k;
            trace.failure_reason = "nonfinite";
            break;
        }

        // (5) forward-model update
        fwd_buf.push_back({z.regressor(), u, y});
        while (static_cast<int>(fwd_buf.size()) > cfg.replay) fwd_buf.pop_front();
        std::vector<Sample> fwd_batch(fwd_buf.begin(), fwd_buf.end());
        train_forward(fm, fm_state, fwd_batch, cfg.updates_per_step);

        // (6) tracking-error density, cost, periodic stability report
        const MixtureParams out_p = output_pdf(fm, z, u);
        const MixtureParams err_p = error_pdf(out_p, y_d);
        row.u = u;
        row.y = y;
        row.e = y - y_d;
        row.j_cost = cost(err_p, u, w);
        row.nll_forward = nll(out_p, y);
        row.nll_controller = nll(control_pdf(ic, z, y_d, out_p.priors), u_star);
        if (k % cfg.stability_period == 0) {
            const StabilityReport rep = monitor(fm, z, u, y_d, w);
            if (rep.indeterminate) {
                row.stable_flag = stability_indeterminate;
            } else {
                row.spectral_norm = rep.spectral_norm;
                row.spectral_radius = rep.spectral_radius;
                row.stable_flag = rep.stable ? 1 : 0;
            }
        }
        const bool cost_finite = std::isfinite(row.j_cost);
        trace.rows.push_back(std::move(row));
        if (!cost_finite) {
            trace.failed = true;
            trace.failed_step = k;
            trace.failure_reason = "nonfinite";
            break;
        }

        hist.push(y, u);
        u_prev = u;
        ustar_prev = u_star;
        chi_prev = chi;
        have_prev = true;
    }
    return trace;
}

/// Indirect-adaptive comparison loop on the identical noise and reference
/// streams: train the point controller through the frozen forward MLP, apply
/// its output, then update the forward MLP on the observation. The J column
/// holds the baseline's own training index (y - y_d)^2 + Q u^2.
inline SimTrace run_baseline(const RunConfig& cfg, Snapshots& snaps, const Benchmark& bench,
                             std::span<const double> noise, std::span<const double> ref) {
    cfg.validate();
    const int steps = static_cast<int>(std::min(noise.size(), ref.size()));
    BaselinePair& bp = snaps.bp;

    SimTrace trace;
    trace.rows.reserve(steps);
    LagHistory hist(cfg.n_lags, cfg.m_lags);
    ReferenceModel rm = bench.ref_model;
    ScgState fwd_state, ctrl_state;
    std::deque<Sample> fwd_buf;
    std::deque<BaselineCtrlSample> ctrl_buf;

    for (int k = 0; k < steps; ++k) {
        const double r = ref[k];
        const double y_d = rm.step(r);
        const StateVector z = hist.state();
        TraceRow row;
        row.k = k;
        row.r = r;
        row.y_d = y_d;
        row.method = "baseline";

        ctrl_buf.push_back({z.regressor(), y_d});
        while (static_cast<int>(ctrl_buf.size()) > cfg.replay) ctrl_buf.pop_front();
        std::vector<BaselineCtrlSample> ctrl_batch(ctrl_buf.begin(), ctrl_buf.end());
        baseline_train_controller(bp, ctrl_state, ctrl_batch, cfg.updates_per_step);

        const double u = baseline_control(bp, z, y_d, cfg.u_min, cfg.u_max);
        const double eps = noise[k];
        const double y = bench.plant(hist.latest_output(), u, eps);

        if (!std::isfinite(u) || !std::isfinite(y)) {
            trace.failed = true;
            trace.failed_step = k;
            trace.failure_reason = "nonfinite";
            break;
        }

        fwd_buf.push_back({z.regressor(), u, y});
        while (static_cast<int>(fwd_buf.size()) > cfg.replay) fwd_buf.pop_front();
        std::vector<Sample> fwd_batch(fwd_buf.begin(), fwd_buf.end());
        baseline_train_forward(bp, fwd_state, fwd_batch, cfg.updates_per_step);

        row.u = u;
        row.y = y;
        row.e = y - y_d;
        row.j_cost = row.e * row.e + cfg.weight_control * u * u;
        trace.rows.push_back(std::move(row));

        hist.push(y, u);
    }
    return trace;
}

/// Noise and reference streams shared by both pipelines of a comparison run.
struct Streams {
    std::vector<double> noise;
    std::vector<double> ref;
};

inline Streams make_online_streams(const RunConfig& cfg, const Benchmark& bench) {
    const Rng master(cfg.seed);
    Rng noise_rng = master.fork(stream::online_noise);
    Streams s;
    s.noise.resize(cfg.online_steps);
    for (double& v : s.noise) v = noise_sample(bench.noise, noise_rng);
    s.ref = make_reference_input(cfg, master.fork(stream::online_ref)).generate(cfg.online_steps);
    return s;
}

struct CompareResult {
    SimTrace mdn;
    SimTrace baseline;
    TraceSummary mdn_summary;
    TraceSummary baseline_summary;
};

/// Runs both pipelines from the given snapshots on byte-identical noise and
/// reference streams.
inline CompareResult compare_from(const RunConfig& cfg, const Benchmark& bench,
                                  const Snapshots& snaps) {
    const Streams streams = make_online_streams(cfg, bench);
    CompareResult res;
    Snapshots mdn_snaps = snaps;
    Snapshots base_snaps = snaps;
    res.mdn = run_online(cfg, mdn_snaps, bench, streams.noise, streams.ref);
    res.baseline = run_baseline(cfg, base_snaps, bench, streams.noise, streams.ref);
    res.mdn_summary = summarize(res.mdn, cfg.summary_window);
    res.baseline_summary = summarize(res.baseline, cfg.summary_window);
    return res;
}

/// Pretrains once, then compares.
inline CompareResult compare(const RunConfig& cfg, const Benchmark& bench) {
    const PretrainResult pre = pretrain(cfg, bench);
    return compare_from(cfg, bench, pre.snapshots);
}

inline CompareResult compare(const RunConfig& cfg) { return compare(cfg, make_benchmark(cfg)); }

// ---------------------------------------------------------------------------
// snapshot persistence

inline void save_snapshots(const Snapshots& snaps, const RunConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_network(snaps.fm.net, "forward", dir + "/forward_mdn.net");
    save_network(snaps.ic.net, "controller", dir + "/controller_mdn.net");
    save_network(snaps.bp.forward_net, "baseline_forward", dir + "/baseline_forward.net");
    save_network(snaps.bp.controller_net, "baseline_controller", dir + "/baseline_controller.net");
    nlohmann::json meta;
    meta["example"] = cfg.example;
    meta["kernels"] = cfg.kernels;
    meta["n_lags"] = cfg.n_lags;
    meta["m_lags"] = cfg.m_lags;
    meta["hidden"] = cfg.hidden;
    meta["variance_floor"] = cfg.variance_floor;
    meta["weights"] = {{"variance", cfg.weight_variance},
                       {"mean", cfg.weight_mean},
                       {"control", cfg.weight_control}};
    std::ofstream out(dir + "/meta.json");
    if (!out) throw std::runtime_error("cannot write snapshot metadata in " + dir);
    out << meta.dump(2) << "\n";
}

inline Snapshots load_snapshots(const std::string& dir, const RunConfig& cfg) {
    std::ifstream meta_in(dir + "/meta.json");
    if (!meta_in) throw std::runtime_error("snapshot metadata not found in " + dir);
    nlohmann::json meta;
    meta_in >> meta;
    if (meta.at("example").get<int>() != cfg.example)
        throw std::runtime_error("snapshot was trained for a different example");
    if (meta.at("kernels").get<int>() != cfg.kernels || meta.at("n_lags").get<int>() != cfg.n_lags ||
        meta.at("m_lags").get<int>() != cfg.m_lags)
        throw std::runtime_error("snapshot model orders do not match the configuration");

    Snapshots snaps;
    const double floor = meta.at("variance_floor").get<double>();
    auto fwd = load_network(dir + "/forward_mdn.net");
    if (fwd.tag != "forward") throw std::runtime_error("unexpected tag in forward snapshot");
    snaps.fm = ForwardModel{std::move(fwd.net), MdnHead{cfg.kernels, floor}};
    auto ctrl = load_network(dir + "/controller_mdn.net");
    if (ctrl.tag != "controller") throw std::runtime_error("unexpected tag in controller snapshot");
    snaps.ic = InverseController{std::move(ctrl.net), CtrlHead{cfg.kernels, floor}};
    auto bf = load_network(dir + "/baseline_forward.net");
    auto bc = load_network(dir + "/baseline_controller.net");
    snaps.bp = BaselinePair{std::move(bf.net), std::move(bc.net), cfg.weight_control};
    return snaps;
}

inline void write_summary(const std::string& path, const TraceSummary& mdn,
                          const TraceSummary& baseline) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write summary: " + path);
    out << "method=mdn window=" << mdn.window << " mean_e=" << format_double(mdn.mean_e)
        << " std_e=" << format_double(mdn.std_e) << " mean_J=" << format_double(mdn.mean_j) << "\n";
    out << "method=baseline window=" << baseline.window
        << " mean_e=" << format_double(baseline.mean_e) << " std_e=" << format_double(baseline.std_e)
        << " mean_J=" << format_double(baseline.mean_j) << "\n";
}

} // namespace probctl
