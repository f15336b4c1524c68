#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "stonag/chaining.hpp"
#include "stonag/exit_stats.hpp"
#include "stonag/freezing.hpp"
#include "stonag/io.hpp"
#include "stonag/version.hpp"

namespace {

using namespace stonag;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key = value configuration file (a manifest also works)");
    cmd->add_option("--set", opts.overrides, "override a config key, e.g. --set eta=0.02")->take_all();
    cmd->add_option("--out", opts.out_dir, "output directory (default: $STONAG_OUT_DIR or ./out)");
    cmd->add_option("--threads", opts.threads, "worker pool size (results do not depend on it)");
}

KeyValueConfig load_config(const CommonOpts& opts) {
    KeyValueConfig cfg;
    if (!opts.config_path.empty()) cfg = KeyValueConfig::from_file(opts.config_path);
    for (const std::string& item : opts.overrides) {
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + item);
        cfg.set(item.substr(0, eq), item.substr(eq + 1));
    }
    return cfg;
}

std::string resolve_out_dir(const CommonOpts& opts) {
    if (!opts.out_dir.empty()) return opts.out_dir;
    if (const char* env = std::getenv("STONAG_OUT_DIR"); env && *env) return env;
    return "out";
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

std::string join_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    return out;
}

void reject_unknown(const KeyValueConfig& cfg, const std::vector<std::string>& known) {
    const std::vector<std::string> bad = cfg.unknown_keys(known);
    if (!bad.empty()) {
        std::string msg = "unknown config keys:";
        for (const std::string& k : bad) msg += " " + k;
        throw ConfigError(msg);
    }
}

struct RunContext {
    std::string out_dir;
    Manifest manifest;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void emit(const std::string& name, const std::string& content) {
        write_text_file(join_path(out_dir, name), content);
        manifest.outputs.push_back(name);
    }

    void finish() {
        manifest.duration_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        write_text_file(join_path(out_dir, "manifest.txt"), manifest.serialize());
    }
};

RunContext make_context(const std::string& subcommand, const CommonOpts& opts,
                        const KeyValueConfig& resolved, std::uint64_t seed) {
    RunContext ctx;
    ctx.out_dir = resolve_out_dir(opts);
    std::filesystem::create_directories(ctx.out_dir);
    ctx.manifest.subcommand = subcommand;
    ctx.manifest.version = version_tag;
    ctx.manifest.master_seed = seed;
    ctx.manifest.resolved = resolved;
    ctx.manifest.threads = opts.threads;
    return ctx;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return fit_line(lx, ly).slope;
}

// ---------------------------------------------------------------- wave ----

int cmd_wave(const CommonOpts& opts) {
    KeyValueConfig cfg = load_config(opts);
    reject_unknown(cfg, {"a", "rho", "L", "n", "sigma_list"});

    NagumoParams params;
    params.a = cfg.get_double("a", 0.25);
    params.rho = cfg.get_double("rho", 1.0);
    const double L = cfg.get_double("L", 40.0);
    const auto n = static_cast<std::size_t>(cfg.get_int("n", 2048));
    const std::vector<double> sigmas = cfg.get_list("sigma_list", {});
    params.validate();
    GridSpec grid(L, n);

    KeyValueConfig resolved;
    resolved.set("a", format_double(params.a));
    resolved.set("rho", format_double(params.rho));
    resolved.set("L", format_double(L));
    resolved.set("n", std::to_string(n));
    resolved.set("sigma_list", join_list(sigmas));
    RunContext ctx = make_context("wave", opts, resolved, 0);

    NewtonReport newton;
    const WaveProfile wave = solve_deterministic_wave(params, grid, std::nullopt, &newton);
    const SpectralData spec = compute_spectral_data(wave, params);

    ColumnarWriter profile("stonag-profile-v1", {"x", "phi0", "dphi0", "psi_tw"});
    for (std::size_t i = 0; i < n; ++i)
        profile.row({grid.x(i), wave.profile[i], wave.derivative[i], spec.psi_tw[i]});
    ctx.emit("profile.txt", profile.str());

    ReportWriter report("stonag-wave-report-v1");
    report.kv("a", params.a);
    report.kv("rho", params.rho);
    report.kv("L", L);
    report.kv("n", static_cast<long long>(n));
    report.kv("c0", wave.speed);
    report.kv("beta", spec.beta);
    report.kv("neutral_eigenvalue", spec.neutral_eigenvalue);
    report.kv("newton_iterations", static_cast<long long>(newton.residual_history.size()));
    report.kv("final_residual", newton.residual_history.empty() ? 0.0 : newton.residual_history.back());

    if (!sigmas.empty()) {
        std::vector<std::string> cols{"x"};
        for (std::size_t k = 0; k < sigmas.size(); ++k) cols.push_back("phi_sigma" + std::to_string(k));
        ColumnarWriter sprofiles("stonag-profile-sweep-v1", cols);

        std::vector<StochasticWave> waves;
        for (double sg : sigmas) {
            NagumoParams p = params;
            p.sigma = sg;
            waves.push_back(solve_stochastic_wave(p, grid, spec, wave));
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row{grid.x(i)};
            for (const StochasticWave& sw : waves) row.push_back(sw.profile[i]);
            sprofiles.row(row);
        }
        ctx.emit("stochastic_profiles.txt", sprofiles.str());

        report.blank();
        std::vector<double> speed_diffs, h1_diffs;
        for (const StochasticWave& sw : waves) {
            report.line("stochastic_wave: sigma=" + format_double(sw.sigma) +
                        " c_sigma=" + format_double(sw.speed) +
                        " dc=" + format_double(std::abs(sw.speed - wave.speed)) +
                        " h1_diff=" + format_double(norm_h1(sw.profile - wave.profile)));
            speed_diffs.push_back(std::abs(sw.speed - wave.speed));
            h1_diffs.push_back(norm_h1(sw.profile - wave.profile));
        }
        if (sigmas.size() >= 3) {
            report.kv("speed_diff_loglog_slope", loglog_slope(sigmas, speed_diffs));
            report.kv("h1_diff_loglog_slope", loglog_slope(sigmas, h1_diffs));
        }
    }
    ctx.emit("wave_report.txt", report.str());
    ctx.finish();
    return 0;
}

// ------------------------------------------------------------ simulate ----

int cmd_simulate(const CommonOpts& opts) {
    KeyValueConfig cfg = load_config(opts);
    reject_unknown(cfg, {"a", "rho", "sigma", "L", "n", "dt", "T", "seed", "snapshot_every"});

    SimConfig sim;
    sim.params.a = cfg.get_double("a", 0.25);
    sim.params.rho = cfg.get_double("rho", 1.0);
    sim.params.sigma = cfg.get_double("sigma", 0.05);
    const double L = cfg.get_double("L", 20.0);
    const auto n = static_cast<std::size_t>(cfg.get_int("n", 512));
    sim.grid = GridSpec(L, n);
    sim.dt = cfg.get_double("dt", 0.005);
    sim.t_end = cfg.get_double("T", 10.0);
    sim.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
    const auto snapshot_every = static_cast<std::size_t>(cfg.get_int("snapshot_every", 0));
    const std::vector<std::string> warnings = sim.validate();

    KeyValueConfig resolved;
    resolved.set("a", format_double(sim.params.a));
    resolved.set("rho", format_double(sim.params.rho));
    resolved.set("sigma", format_double(sim.params.sigma));
    resolved.set("L", format_double(L));
    resolved.set("n", std::to_string(n));
    resolved.set("dt", format_double(sim.dt));
    resolved.set("T", format_double(sim.t_end));
    resolved.set("seed", std::to_string(sim.seed));
    resolved.set("snapshot_every", std::to_string(snapshot_every));
    RunContext ctx = make_context("simulate", opts, resolved, sim.seed);

    const WaveProfile wave = solve_deterministic_wave(sim.params, sim.grid);
    const SpectralData spec = compute_spectral_data(wave, sim.params);
    StochasticWave sw;
    if (sim.params.sigma == 0.0)
        sw = {wave.profile, wave.speed, 0.0, wave.derivative};
    else
        sw = solve_stochastic_wave(sim.params, sim.grid, spec, wave);

    NoiseSampler sampler = build_sampler(sim.grid);
    PathState init;
    init.u = sw.profile;
    TrackedPath path(sim, sampler, make_stream(sim.seed, 0), sw, spec, std::move(init));

    ColumnarWriter diag("stonag-diagnostics-v1",
                        {"t", "gamma", "v_l2", "v_h1", "a_sigma", "b_hs_sq", "kappa", "n_value", "orth"});
    ColumnarWriter snaps("stonag-snapshot-v1", {"t", "x", "u"});
    auto snapshot = [&](const PathState& st) {
        for (std::size_t i = 0; i < sim.grid.points; ++i) snaps.row({st.t, sim.grid.x(i), st.u[i]});
    };
    if (snapshot_every > 0) snapshot(path.state());

    NormTracker tracker;
    tracker.epsilon = 0.5 * spec.beta;
    std::string event;
    const std::size_t steps = sim.step_count();
    for (std::size_t k = 0; k < steps; ++k) {
        TrackedStepRecord rec;
        try {
            rec = path.step();
        } catch (const WaveLostError& e) {
            event = "wave_lost at t=" + format_double(path.state().t) + ": " + e.what();
            break;
        }
        tracker = tracker_update_norms(tracker, rec.v_l2 * rec.v_l2, rec.v_h1 * rec.v_h1, sim.dt);
        diag.row({rec.t, rec.gamma, rec.v_l2, rec.v_h1, rec.a_sigma, rec.b_hs_sq, rec.kappa,
                  tracker.n_value, rec.orthogonality});
        if (snapshot_every > 0 && (k + 1) % snapshot_every == 0) snapshot(path.state());
    }
    ctx.emit("diagnostics.txt", diag.str());
    if (snapshot_every > 0) ctx.emit("snapshots.txt", snaps.str());

    ReportWriter report("stonag-sim-report-v1");
    report.kv("sigma", sim.params.sigma);
    report.kv("c_sigma", sw.speed);
    report.kv("beta", spec.beta);
    report.kv("epsilon", tracker.epsilon);
    report.kv("final_t", path.state().t);
    report.kv("final_gamma", path.phase().gamma);
    report.kv("final_n_value", tracker.n_value);
    report.kv("event", event.empty() ? std::string("none") : event);
    for (const std::string& w : warnings) report.kv("warning", w);
    ctx.emit("sim_report.txt", report.str());
    ctx.finish();
    return 0;
}

// ---------------------------------------------------------------- exit ----

int cmd_exit(const CommonOpts& opts) {
    KeyValueConfig cfg = load_config(opts);
    reject_unknown(cfg, {"a", "rho", "eta", "epsilon", "sigma_list", "T", "paths", "L", "n", "dt",
                         "seed", "delta_eta_guard"});

    ExitConfig ec;
    ec.sim.params.a = cfg.get_double("a", 0.25);
    ec.sim.params.rho = cfg.get_double("rho", 1.0);
    ec.eta = cfg.get_double("eta", 0.01);
    ec.epsilon = cfg.get_double("epsilon", 0.0);
    ec.sigma_list = cfg.get_list("sigma_list", {0.08, 0.10, 0.12, 0.14});
    ec.t_horizon = cfg.get_double("T", 20.0);
    ec.n_paths = static_cast<std::size_t>(cfg.get_int("paths", 400));
    const double L = cfg.get_double("L", 20.0);
    const auto n = static_cast<std::size_t>(cfg.get_int("n", 512));
    ec.sim.grid = GridSpec(L, n);
    ec.sim.dt = cfg.get_double("dt", 0.005);
    ec.master_seed = static_cast<std::uint64_t>(cfg.get_int("seed", 20260810));
    ec.delta_eta_guard = cfg.get_double("delta_eta_guard", 0.1);
    ec.sim.params.validate();

    KeyValueConfig resolved;
    resolved.set("a", format_double(ec.sim.params.a));
    resolved.set("rho", format_double(ec.sim.params.rho));
    resolved.set("eta", format_double(ec.eta));
    resolved.set("epsilon", format_double(ec.epsilon));
    resolved.set("sigma_list", join_list(ec.sigma_list));
    resolved.set("T", format_double(ec.t_horizon));
    resolved.set("paths", std::to_string(ec.n_paths));
    resolved.set("L", format_double(L));
    resolved.set("n", std::to_string(n));
    resolved.set("dt", format_double(ec.sim.dt));
    resolved.set("seed", std::to_string(ec.master_seed));
    resolved.set("delta_eta_guard", format_double(ec.delta_eta_guard));
    RunContext ctx = make_context("exit", opts, resolved, ec.master_seed);

    const WaveProfile wave = solve_deterministic_wave(ec.sim.params, ec.sim.grid);
    const SpectralData spec = compute_spectral_data(wave, ec.sim.params);
    ec.validate(spec.beta);

    std::cerr << "[stonag] exit ensemble: " << ec.sigma_list.size() << " cells x " << ec.n_paths
              << " paths, T=" << ec.t_horizon << ", threads=" << opts.threads << "\n";
    const ExitResult result = run_ensemble(ec, wave, spec, opts.threads);

    ReportWriter out("stonag-exit-v1");
    out.kv("eta", result.eta);
    out.kv("epsilon", result.epsilon);
    out.kv("t_horizon", result.t_horizon);
    out.kv("master_seed", static_cast<long long>(result.master_seed));
    out.kv("beta", spec.beta);
    out.blank();
    std::size_t total_errors = 0;
    for (const ExitCell& c : result.cells) {
        auto quantile = [&](double q) {
            if (c.exit_times.empty()) return -1.0;
            const auto idx = static_cast<std::size_t>(q * (c.exit_times.size() - 1));
            return c.exit_times[idx];
        };
        out.line("cell: sigma=" + format_double(c.sigma) +
                 " n_paths=" + std::to_string(c.path_count) +
                 " exits=" + std::to_string(c.exit_count) +
                 " errors=" + std::to_string(c.error_count) +
                 " p_hat=" + format_double(c.p_hat) +
                 " wilson_lo=" + format_double(c.wilson_lo) +
                 " wilson_hi=" + format_double(c.wilson_hi) +
                 " q10=" + format_double(quantile(0.1)) +
                 " q50=" + format_double(quantile(0.5)) +
                 " q90=" + format_double(quantile(0.9)));
        total_errors += c.error_count;
        std::cerr << "[stonag]   sigma=" << c.sigma << "  p_hat=" << c.p_hat << " (" << c.exit_count
                  << "/" << c.path_count << ")\n";
    }
    ctx.emit("exit_result.txt", out.str());

    ReportWriter fitrep("stonag-fit-v1");
    try {
        const ScalingFit fit = scaling_fit(result, ec.eta);
        fitrep.kv("kappa_hat", fit.slope);
        fitrep.kv("intercept", fit.intercept);
        fitrep.kv("r2", fit.r2);
        fitrep.kv("points_used", static_cast<long long>(fit.points_used));
        fitrep.kv("monotone_in_sigma", fit.monotone_increasing ? "yes" : "no");
        for (std::size_t i = 0; i < fit.x_values.size(); ++i)
            fitrep.line("point: x=" + format_double(fit.x_values[i]) +
                        " neg_log_p=" + format_double(fit.neg_log_p[i]) +
                        " bound_ok=" + std::string(fit.bound_ok[i] ? "yes" : "no"));
        for (const std::string& note : fit.notes) fitrep.kv("note", note);
    } catch (const std::invalid_argument& e) {
        fitrep.kv("fit_skipped", e.what());
    }
    ctx.emit("fit_report.txt", fitrep.str());
    ctx.finish();
    return total_errors == 0 ? 0 : 4;
}

// ------------------------------------------------------------ chaining ----

int cmd_chaining(const CommonOpts& opts) {
    KeyValueConfig cfg = load_config(opts);
    reject_unknown(cfg, {"experiment", "horizons", "dt", "paths", "seed", "n", "L", "a", "rho",
                         "T_list", "nu_list"});
    const std::string experiment = cfg.get_string("experiment", "ou");

    if (experiment == "metrics") {
        const std::vector<double> t_list = cfg.get_list("T_list", {2.0, 10.0, 100.0});
        const std::vector<double> nu_list = cfg.get_list("nu_list", {0.1, 0.2, 0.5, 1.0});
        KeyValueConfig resolved;
        resolved.set("experiment", experiment);
        resolved.set("T_list", join_list(t_list));
        resolved.set("nu_list", join_list(nu_list));
        RunContext ctx = make_context("chaining", opts, resolved, 0);

        ReportWriter rep("stonag-metric-v1");
        for (double T : t_list) {
            const IncrementMetric ou = make_ou_metric(T);
            rep.line("ou_metric: T=" + format_double(T) + " d_max=" + format_double(ou.d_max) +
                     " dudley=" + format_double(dudley_integral(T, ou)));
            for (double nu : nu_list)
                rep.line("covering: T=" + format_double(T) + " nu=" + format_double(nu) +
                         " N=" + std::to_string(covering_number(T, ou, nu)));
        }
        ctx.emit("metric_report.txt", rep.str());
        ctx.finish();
        return 0;
    }

    GrowthExperimentConfig gc;
    gc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", experiment == "ou" ? 7 : 9));
    if (experiment == "ou") {
        gc.process = GrowthProcess::scalar_ou;
        gc.horizons = cfg.get_list("horizons", {10.0, 100.0, 1000.0, 10000.0});
        gc.dt = cfg.get_double("dt", 0.05);
        gc.n_paths = static_cast<std::size_t>(cfg.get_int("paths", 2000));
    } else if (experiment == "convolution") {
        gc.process = GrowthProcess::semigroup_convolution;
        gc.horizons = cfg.get_list("horizons", {10.0, 100.0, 1000.0});
        gc.dt = cfg.get_double("dt", 0.05);
        gc.n_paths = static_cast<std::size_t>(cfg.get_int("paths", 120));
    } else {
        throw ConfigError("experiment must be one of: ou, convolution, metrics");
    }
    gc.validate();

    KeyValueConfig resolved;
    resolved.set("experiment", experiment);
    resolved.set("horizons", join_list(gc.horizons));
    resolved.set("dt", format_double(gc.dt));
    resolved.set("paths", std::to_string(gc.n_paths));
    resolved.set("seed", std::to_string(gc.seed));

    NagumoParams params;
    GridSpec grid(20.0, 256);
    if (experiment == "convolution") {
        params.a = cfg.get_double("a", 0.25);
        params.rho = cfg.get_double("rho", 1.0);
        const double L = cfg.get_double("L", 20.0);
        const auto n = static_cast<std::size_t>(cfg.get_int("n", 256));
        grid = GridSpec(L, n);
        params.validate();
        resolved.set("a", format_double(params.a));
        resolved.set("rho", format_double(params.rho));
        resolved.set("L", format_double(L));
        resolved.set("n", std::to_string(n));
    }
    RunContext ctx = make_context("chaining", opts, resolved, gc.seed);

    GrowthReport rep;
    if (experiment == "ou") {
        rep = sup_growth_experiment(gc, opts.threads);
    } else {
        const WaveProfile wave = solve_deterministic_wave(params, grid);
        const SpectralData spec = compute_spectral_data(wave, params);
        const NoiseSampler sampler = build_sampler(grid);
        ConvolutionContext cc{&wave, &spec, &params, &sampler};
        rep = sup_growth_experiment(gc, opts.threads, &cc);
    }

    ReportWriter out("stonag-growth-v1");
    out.kv("process", experiment);
    for (std::size_t i = 0; i < rep.horizons.size(); ++i)
        out.line("point: T=" + format_double(rep.horizons[i]) +
                 " mean_sup_sq=" + format_double(rep.mean_sup_sq[i]));
    out.kv("log_fit_alpha", rep.log_fit.slope);
    out.kv("log_fit_gamma", rep.log_fit.intercept);
    out.kv("log_fit_r2", rep.log_fit.r2);
    out.kv("log_fit_aic", rep.log_fit.aic);
    out.kv("linear_fit_slope", rep.linear_fit.slope);
    out.kv("linear_fit_intercept", rep.linear_fit.intercept);
    out.kv("linear_fit_r2", rep.linear_fit.r2);
    out.kv("linear_fit_aic", rep.linear_fit.aic);
    out.kv("log_preferred", rep.log_preferred ? "yes" : "no");
    ctx.emit("growth_report.txt", out.str());
    ctx.finish();
    return 0;
}

}

int main(int argc, char** argv) {
    CLI::App app{"stonag: traveling-wave meta-stability toolkit for the stochastic Nagumo equation"};
    app.require_subcommand(1);

    CommonOpts wave_opts, sim_opts, exit_opts, chain_opts;
    CLI::App* wave = app.add_subcommand("wave", "solve deterministic and stochastic wave profiles");
    add_common(wave, wave_opts);
    CLI::App* simulate = app.add_subcommand("simulate", "run one tracked SPDE path with diagnostics");
    add_common(simulate, sim_opts);
    CLI::App* exitcmd = app.add_subcommand("exit", "Monte Carlo first-exit ensemble and scaling fit");
    add_common(exitcmd, exit_opts);
    CLI::App* chaining = app.add_subcommand("chaining", "supremum-growth experiments and metric tables");
    add_common(chaining, chain_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors are configuration errors
    }

    try {
        if (wave->parsed()) return cmd_wave(wave_opts);
        if (simulate->parsed()) return cmd_simulate(sim_opts);
        if (exitcmd->parsed()) return cmd_exit(exit_opts);
        if (chaining->parsed()) return cmd_chaining(chain_opts);
    } catch (const stonag::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
