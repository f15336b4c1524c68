#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stonag/freezing.hpp"
#include "stonag/parallel.hpp"

namespace stonag {

/// Running value of the stability functional
///   N(t) = ||V(t)||_L2^2 + int_0^t e^{-eps(t-s)} ||V(s)||_H1^2 ds.
struct NormTracker {
    double l2_sq = 0.0;
    double h1_accum = 0.0;
    double epsilon = 0.0;
    double n_value = 0.0;
};

/// Left-endpoint exponential-discount update:
///   h1_accum <- e^{-eps dt} h1_accum + dt ||v||_H1^2.
inline NormTracker tracker_update_norms(NormTracker tr, double l2_sq, double h1_sq, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("tracker_update: dt must be > 0");
    tr.h1_accum = std::exp(-tr.epsilon * dt) * tr.h1_accum + dt * h1_sq;
    tr.l2_sq = l2_sq;
    tr.n_value = tr.l2_sq + tr.h1_accum;
    return tr;
}

inline NormTracker tracker_update(NormTracker tr, const GridFunction& v, double dt) {
    const double l2 = norm_l2(v);
    const double h1 = norm_h1(v);
    return tracker_update_norms(tr, l2 * l2, h1 * h1, dt);
}

/// Strict inequality, matching the infimum in the stopping time definition.
inline bool detect_exit(const NormTracker& tr, double eta) { return tr.n_value > eta; }

struct ExitConfig {
    double eta = 0.01;
    double epsilon = 0.0;  // 0 selects the beta/2 default
    std::vector<double> sigma_list;
    double t_horizon = 20.0;
    std::size_t n_paths = 400;
    std::uint64_t master_seed = 0;
    SimConfig sim;  // grid / dt / params template; sigma is overwritten per cell
    double delta_eta_guard = 0.1;

    double resolved_epsilon(double beta) const { return epsilon > 0.0 ? epsilon : 0.5 * beta; }

    void validate(double beta) const {
        if (!(eta > 0.0 && eta < delta_eta_guard))
            throw std::invalid_argument("ExitConfig: eta must be in (0, delta_eta_guard)");
        const double eps = resolved_epsilon(beta);
        if (!(eps > 0.0 && eps < beta))
            throw std::invalid_argument("ExitConfig: epsilon must lie in (0, beta)");
        if (!(t_horizon >= 2.0)) throw std::invalid_argument("ExitConfig: t_horizon must be >= 2");
        if (n_paths == 0) throw std::invalid_argument("ExitConfig: n_paths must be positive");
        if (sigma_list.empty()) throw std::invalid_argument("ExitConfig: sigma_list is empty");
    }
};

enum class PathEnd { survived, threshold_exit, wave_lost, failed };

struct PathOutcome {
    PathEnd end = PathEnd::survived;
    double t_exit = -1.0;
    std::string error;
};

/// One tracked exit path: SPDE + phase tracker + norm tracker, started at the
/// instantaneous stochastic wave. on_step(record, tracker) fires per step.
template <class OnStep>
PathOutcome run_tracked_exit_path(const SimConfig& cfg, const NoiseSampler& sampler,
                                  RandomStream rng, const StochasticWave& sw,
                                  const SpectralData& spec, double eta, double epsilon,
                                  OnStep&& on_step) {
    PathOutcome out;
    std::optional<TrackedPath> path;
    try {
        PathState init;
        init.u = sw.profile;
        path.emplace(cfg, sampler, std::move(rng), sw, spec, std::move(init));
    } catch (const std::exception& e) {
        out.end = PathEnd::failed;
        out.error = e.what();
        return out;
    }
    NormTracker tracker;
    tracker.epsilon = epsilon;
    const std::size_t steps = cfg.step_count();
    for (std::size_t k = 0; k < steps; ++k) {
        TrackedStepRecord rec;
        try {
            rec = path->step();
        } catch (const WaveLostError&) {
            out.end = PathEnd::wave_lost;
            out.t_exit = path->state().t;
            return out;
        } catch (const std::exception& e) {
            out.end = PathEnd::failed;
            out.error = e.what();
            return out;
        }
        tracker = tracker_update_norms(tracker, rec.v_l2 * rec.v_l2, rec.v_h1 * rec.v_h1, cfg.dt);
        on_step(rec, tracker);
        if (detect_exit(tracker, eta)) {
            out.end = PathEnd::threshold_exit;
            out.t_exit = rec.t;
            return out;
        }
    }
    return out;
}

struct ExitCell {
    double sigma = 0.0;
    std::size_t path_count = 0;
    std::size_t exit_count = 0;
    std::size_t error_count = 0;
    double p_hat = 0.0;
    double wilson_lo = 0.0;
    double wilson_hi = 0.0;
    std::vector<double> exit_times;  // ascending
    std::vector<std::string> errors;
};

struct ExitResult {
    double eta = 0.0;
    double epsilon = 0.0;
    double t_horizon = 0.0;
    std::uint64_t master_seed = 0;
    std::vector<ExitCell> cells;
};

/// 95% Wilson score interval.
inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n) {
    if (n == 0) return {0.0, 1.0};
    const double z = 1.959963984540054;
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + 0.5 * z2 / nn) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + 0.25 * z2 / (nn * nn)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

/// Seeded Monte Carlo ensemble over the sigma list. Per-path streams depend
/// only on (master_seed, global path index), and aggregation is an
/// order-independent merge, so the result is identical for any worker count.
inline ExitResult run_ensemble(const ExitConfig& cfg, const WaveProfile& det_wave,
                               const SpectralData& spec, unsigned threads = 1) {
    cfg.validate(spec.beta);
    const double eps = cfg.resolved_epsilon(spec.beta);

    ExitResult result;
    result.eta = cfg.eta;
    result.epsilon = eps;
    result.t_horizon = cfg.t_horizon;
    result.master_seed = cfg.master_seed;

    NoiseSampler sampler = build_sampler(cfg.sim.grid);

    for (std::size_t s = 0; s < cfg.sigma_list.size(); ++s) {
        const double sigma = cfg.sigma_list[s];
        NagumoParams params = cfg.sim.params;
        params.sigma = sigma;

        StochasticWave sw;
        if (sigma == 0.0) {
            sw = {det_wave.profile, det_wave.speed, 0.0, det_wave.derivative};
        } else {
            sw = solve_stochastic_wave(params, cfg.sim.grid, spec, det_wave);
        }

        std::vector<PathOutcome> outcomes(cfg.n_paths);
        parallel_for(cfg.n_paths, threads, [&](std::size_t j) {
            SimConfig sim = cfg.sim;
            sim.params = params;
            sim.t_end = cfg.t_horizon;
            RandomStream rng = make_stream(cfg.master_seed, s * cfg.n_paths + j);
            outcomes[j] = run_tracked_exit_path(sim, sampler, std::move(rng), sw, spec, cfg.eta,
                                                eps, [](const TrackedStepRecord&, const NormTracker&) {});
        });

        ExitCell cell;
        cell.sigma = sigma;
        for (const PathOutcome& o : outcomes) {
            switch (o.end) {
                case PathEnd::survived:
                    ++cell.path_count;
                    break;
                case PathEnd::threshold_exit:
                case PathEnd::wave_lost:
                    ++cell.path_count;
                    ++cell.exit_count;
                    cell.exit_times.push_back(o.t_exit);
                    break;
                case PathEnd::failed:
                    ++cell.error_count;
                    if (cell.errors.size() < 8) cell.errors.push_back(o.error);
                    break;
            }
        }
        std::sort(cell.exit_times.begin(), cell.exit_times.end());
        cell.p_hat = cell.path_count
                         ? static_cast<double>(cell.exit_count) / static_cast<double>(cell.path_count)
                         : 0.0;
        auto [lo, hi] = wilson_interval(cell.exit_count, cell.path_count);
        cell.wilson_lo = lo;
        cell.wilson_hi = hi;
        result.cells.push_back(std::move(cell));
    }
    return result;
}

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t points_used = 0;
    bool monotone_increasing = false;
    std::vector<std::string> notes;
    std::vector<double> x_values;          // eta / (sigma (sigma + sqrt(eta))) per used cell
    std::vector<double> neg_log_p;         // -ln p_hat per used cell
    std::vector<unsigned char> bound_ok;   // p_hat <= min(1, 2T e^{-slope x})
};

/// Regress -ln(p_hat) against x(sigma) = eta / (sigma (sigma + sqrt(eta))).
/// Degenerate cells (p_hat = 0 or 1) are excluded with a note.
inline ScalingFit scaling_fit(const ExitResult& res, double eta) {
    ScalingFit fit;
    std::vector<double> xs, ys, ps;
    for (const ExitCell& c : res.cells) {
        if (c.sigma <= 0.0) {
            fit.notes.push_back("sigma=0 cell excluded");
            continue;
        }
        if (!(c.p_hat > 0.0 && c.p_hat < 1.0)) {
            fit.notes.push_back("degenerate p_hat at sigma=" + std::to_string(c.sigma));
            continue;
        }
        xs.push_back(eta / (c.sigma * (c.sigma + std::sqrt(eta))));
        ys.push_back(-std::log(c.p_hat));
        ps.push_back(c.p_hat);
    }
    if (xs.size() < 3)
        throw std::invalid_argument("scaling_fit: need at least 3 usable (0 < p_hat < 1) cells");

    const auto n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i]; sy += ys[i]; sxx += xs[i] * xs[i]; sxy += xs[i] * ys[i];
    }
    const double det = n * sxx - sx * sx;
    if (det == 0.0) throw std::invalid_argument("scaling_fit: degenerate abscissae");
    fit.slope = (n * sxy - sx * sy) / det;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double ymean = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double pred = fit.slope * xs[i] + fit.intercept;
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - ymean) * (ys[i] - ymean);
    }
    fit.r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
    fit.points_used = xs.size();

    fit.monotone_increasing = true;
    const ExitCell* prev = nullptr;
    for (const ExitCell& c : res.cells) {
        if (c.sigma <= 0.0) continue;
        if (prev && !(c.p_hat > prev->p_hat)) fit.monotone_increasing = false;
        prev = &c;
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double bound = std::min(1.0, 2.0 * res.t_horizon * std::exp(-fit.slope * xs[i]));
        fit.bound_ok.push_back(ps[i] <= bound ? 1 : 0);
    }
    fit.x_values = std::move(xs);
    fit.neg_log_p = std::move(ys);
    return fit;
}

}
