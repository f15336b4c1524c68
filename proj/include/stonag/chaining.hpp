#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "stonag/noise.hpp"
#include "stonag/parallel.hpp"
#include "stonag/rng.hpp"
#include "stonag/wave.hpp"

namespace stonag {

/// Exact increment metric of the unit OU process X(t) = int_0^t e^{-(t-s)} dB_s:
///   d(t,s)^2 = (1/2)(2 - e^{-2t} - e^{-2s} - 2(e^{-|t-s|} - e^{-(t+s)})).
inline double ou_exact_metric_sq(double t, double s) {
    if (t < 0.0 || s < 0.0) throw std::invalid_argument("ou_exact_metric: t,s must be >= 0");
    const double tau = std::abs(t - s);
    const double v = 0.5 * (2.0 - std::exp(-2.0 * t) - std::exp(-2.0 * s) -
                            2.0 * (std::exp(-tau) - std::exp(-(t + s))));
    return std::max(0.0, v);
}

inline double ou_exact_metric(double t, double s) { return std::sqrt(ou_exact_metric_sq(t, s)); }

/// Increment metric on [0,T] together with its diameter.
struct IncrementMetric {
    std::function<double(double, double)> evaluator;
    double d_max = 0.0;
};

/// OU metric restricted to [0,T]. For a fixed gap tau the distance is largest
/// at the right end, so the diameter solves  e^{-tau} = e^{-2T} e^tau (e^tau - 1)
/// over the family (T - tau, T); the endpoint pair (0, T) never wins for T >= ln 2.
inline IncrementMetric make_ou_metric(double T) {
    if (!(T > 0.0)) throw std::invalid_argument("make_ou_metric: T must be > 0");
    IncrementMetric m;
    m.evaluator = [](double a, double b) { return ou_exact_metric(a, b); };
    auto fprime = [T](double tau) {
        return std::exp(-tau) - std::exp(-2.0 * T) * std::exp(tau) * (std::exp(tau) - 1.0);
    };
    double tau;
    if (fprime(T) >= 0.0) {
        tau = T;
    } else {
        double lo = 0.0, hi = T;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * T; ++it) {
            const double mid = 0.5 * (lo + hi);
            (fprime(mid) > 0.0 ? lo : hi) = mid;
        }
        tau = 0.5 * (lo + hi);
    }
    m.d_max = ou_exact_metric(T - tau, T);
    return m;
}

/// The chaining-lemma bound metric d(t,s) = d_scale * min(sqrt|t-s|, 1).
inline IncrementMetric make_bound_metric(double d_scale, double T) {
    if (!(d_scale > 0.0)) throw std::invalid_argument("make_bound_metric: scale must be > 0");
    IncrementMetric m;
    m.evaluator = [d_scale](double a, double b) {
        return d_scale * std::min(std::sqrt(std::abs(a - b)), 1.0);
    };
    m.d_max = d_scale * std::min(std::sqrt(T), 1.0);
    return m;
}

/// Exact-transition sampling of the unit OU process on a dt-grid:
///   X_{k+1} = e^{-dt} X_k + sqrt((1 - e^{-2dt})/2) N(0,1),  X_0 = 0.
inline std::vector<double> simulate_ou(double T, double dt, RandomStream& rng) {
    if (!(dt > 0.0)) throw std::invalid_argument("simulate_ou: dt must be > 0");
    const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
    const double decay = std::exp(-dt);
    const double vol = std::sqrt(0.5 * (1.0 - std::exp(-2.0 * dt)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> path(steps + 1);
    path[0] = 0.0;
    for (std::size_t k = 0; k < steps; ++k) path[k + 1] = decay * path[k] + vol * normal(rng);
    return path;
}

namespace detail {

inline void check_metric_monotone(double T, const IncrementMetric& m) {
    const double bases[] = {0.0, 0.37 * T, 0.71 * T};
    for (double b : bases) {
        double prev = 0.0;
        for (double h = T * 1e-6; b + h <= T; h *= 2.3) {
            const double d = m.evaluator(b, b + h);
            if (d < prev - 1e-12 * m.d_max)
                throw std::invalid_argument(
                    "covering_number: metric not monotone in |t-s|; greedy sweep is not exact");
            prev = d;
        }
    }
}

/// Greedy left-to-right covering count for monotone metrics. Interval ends
/// are located by warm-started bisection; once the interval length
/// stabilizes (stationary regime) the remaining count is taken in one jump.
inline std::size_t covering_count_unchecked(double T, const IncrementMetric& m, double nu) {
    const double d_end_start = m.evaluator(0.0, T);
    if (d_end_start <= nu) return 1;

    std::size_t count = 0;
    double pos = 0.0;
    double prev_len = -1.0;
    const std::size_t hard_cap = 2000000000ull;
    while (pos < T) {
        if (m.evaluator(pos, T) <= nu) {
            ++count;
            break;
        }
        // bracket the interval end
        double lo = pos;
        double step = (prev_len > 0.0) ? prev_len : std::min(1.0, T - pos);
        double hi = std::min(T, pos + step);
        while (m.evaluator(pos, hi) <= nu) {
            lo = hi;
            step *= 2.0;
            hi = std::min(T, pos + step);
            if (hi >= T && m.evaluator(pos, hi) <= nu) break;
        }
        for (int it = 0; it < 60 && (hi - lo) > 1e-9 * (hi - pos); ++it) {
            const double mid = 0.5 * (lo + hi);
            (m.evaluator(pos, mid) <= nu ? lo : hi) = mid;
        }
        const double len = lo - pos;
        if (!(len > 0.0)) throw std::runtime_error("covering_number: interval length underflow");
        ++count;
        pos = lo;

        if (prev_len > 0.0 && std::abs(len - prev_len) <= 1e-9 * len) {
            // lengths have stabilized; later greedy intervals are no shorter
            const double remaining = T - pos;
            const double whole = std::floor(remaining / len);
            count += static_cast<std::size_t>(whole);
            pos += whole * len;
            if (pos < T) ++count;  // final partial interval
            break;
        }
        prev_len = len;
        if (count > hard_cap) throw std::runtime_error("covering_number: count exceeds hard cap");
    }
    return count == 0 ? 1 : count;
}

}

/// Smallest number of d-intervals of length <= nu covering [0,T], by the
/// greedy sweep (exact for metrics monotone in |t-s|; checked by sampling).
inline std::size_t covering_number(double T, const IncrementMetric& metric, double nu) {
    if (!(nu > 0.0)) throw std::invalid_argument("covering_number: nu must be > 0");
    if (!(T > 0.0)) throw std::invalid_argument("covering_number: T must be > 0");
    detail::check_metric_monotone(T, metric);
    return detail::covering_count_unchecked(T, metric, nu);
}

namespace detail {

/// int_0^1 sqrt(A - alpha ln w) dw  =  sqrt(A) + (sqrt(pi alpha)/2) e^{A/alpha} erfc(sqrt(A/alpha)).
inline double log_sqrt_tail_closed_form(double A, double alpha) {
    const double q = A / alpha;
    return std::sqrt(A) + 0.5 * std::sqrt(3.14159265358979323846 * alpha) * std::exp(q) * std::erfc(std::sqrt(q));
}

}

/// Dudley entropy integral  int_0^{d_max} sqrt(ln N(T,d,nu)) dnu  for a
/// monotone increment metric. The coarsest covering levels are integrated
/// exactly from their breakpoints, the mid range by composite midpoint
/// quadrature on a log grid, and the deep tail (huge covering numbers) from
/// the locally fitted power law N ~ nu^-alpha, whose integral has the closed
/// form above. The integrand is 0 wherever N = 1.
inline double dudley_integral(double T, const IncrementMetric& metric) {
    detail::check_metric_monotone(T, metric);
    const double d = metric.d_max;
    if (!(d > 0.0)) return 0.0;
    auto count_at = [&](double nu) { return detail::covering_count_unchecked(T, metric, nu); };

    // breakpoint(k) = sup { nu <= hint : N(nu) >= k }  (N nonincreasing in nu)
    auto breakpoint = [&](std::size_t k, double hint) {
        if (count_at(hint * (1.0 - 1e-9)) >= k) return hint;
        double hi = hint, lo = hint;
        std::size_t n_lo = 0;
        for (int it = 0; it < 400; ++it) {
            lo *= 0.7;
            n_lo = count_at(lo);
            if (n_lo >= k) break;
            hi = lo;
            if (lo < 1e-13 * d)
                throw std::runtime_error("dudley_integral: breakpoint search failed (quadrature non-convergence)");
        }
        for (int it = 0; it < 60 && hi - lo > 1e-9 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (count_at(mid) >= k ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };

    double total = 0.0;

    // exact contribution of the coarsest covering levels
    const std::size_t k_probe = std::max<std::size_t>(count_at(d * (1.0 - 1e-9)), 1);
    const std::size_t k_stop = std::max<std::size_t>(2, k_probe) + 128;
    double nu_hi = breakpoint(2, d);  // integrand vanishes above this
    double nu_level = nu_hi;
    for (std::size_t k = 2; k <= k_stop; ++k) {
        const double nu_next = breakpoint(k + 1, nu_level);
        total += std::sqrt(std::log(static_cast<double>(k))) * (nu_level - nu_next);
        nu_level = nu_next;
    }

    // composite midpoint on a log grid down to covering numbers ~ n_cap
    const double n_cap = std::max<double>(16.0 * static_cast<double>(k_stop), 20000.0);
    double nu_lo = nu_level;
    {
        double lo = 1e-13 * d, hi = nu_level;
        for (int it = 0; it < 60 && hi - lo > 1e-6 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (static_cast<double>(count_at(mid)) >= n_cap ? lo : hi) = mid;
        }
        nu_lo = 0.5 * (lo + hi);
    }
    const int cells = 2000;
    if (nu_lo < nu_level) {
        const double ratio = std::log(nu_level / nu_lo) / cells;
        double left = nu_lo;
        for (int j = 0; j < cells; ++j) {
            const double right = nu_lo * std::exp(ratio * (j + 1));
            const double mid = std::sqrt(left * right);
            const auto nmid = static_cast<double>(count_at(mid));
            if (nmid > 1.0) total += std::sqrt(std::log(nmid)) * (right - left);
            left = right;
        }
    }

    // deep tail from the local power law N(nu) ~ nu^{-alpha}
    const auto n_ref = static_cast<double>(count_at(nu_lo));
    const auto n_ref2 = static_cast<double>(count_at(nu_lo * std::exp(-0.25)));
    const double alpha = std::log(n_ref2 / n_ref) / 0.25;
    if (!(alpha > 0.2 && alpha < 20.0))
        throw std::runtime_error("dudley_integral: tail exponent estimate failed (quadrature non-convergence)");
    total += nu_lo * detail::log_sqrt_tail_closed_form(std::log(n_ref), alpha);
    return total;
}

/// Moment hypothesis E[Z^{2p}] <= p^p Theta^{2p}  into the Chernoff tail
///   P(Z > vartheta) <= 2 exp(-vartheta^2 / (2 e Theta^2)).
inline double moment_to_tail(double theta, double vartheta) {
    if (!(theta > 0.0)) throw std::invalid_argument("moment_to_tail: theta must be > 0");
    return 2.0 * std::exp(-vartheta * vartheta / (2.0 * 2.718281828459045235360287 * theta * theta));
}

/// Tail bound P(Z > t) <= 2 A exp(-t^2/(2e Theta^2)) back into moments:
///   E[Z^{2p}] <= (p^p + ln(A)^p) (8 e Theta^2)^p.
inline double tail_to_moment(double A, double theta, int p) {
    if (!(A >= 2.0)) throw std::invalid_argument("tail_to_moment: A must be >= 2");
    if (!(theta > 0.0)) throw std::invalid_argument("tail_to_moment: theta must be > 0");
    if (p < 1) throw std::invalid_argument("tail_to_moment: p must be >= 1");
    const double e = 2.718281828459045235360287;
    const double pd = static_cast<double>(p);
    return (std::pow(pd, pd) + std::pow(std::log(A), pd)) * std::pow(8.0 * e * theta * theta, pd);
}

/// Maximum of N >= 2 variables under the same moment hypothesis:
///   E[max_i Y_i^{2p}] <= (p^p + ln(N)^p) (8 e Theta^2)^p.
inline double max_moment_bound(std::size_t N, double theta, int p) {
    if (N < 2) throw std::invalid_argument("max_moment_bound: N must be >= 2");
    return tail_to_moment(static_cast<double>(N), theta, p);
}

enum class GrowthProcess { scalar_ou, semigroup_convolution };

struct GrowthExperimentConfig {
    std::vector<double> horizons;
    double dt = 0.05;
    std::size_t n_paths = 2000;
    std::uint64_t seed = 0;
    GrowthProcess process = GrowthProcess::scalar_ou;

    void validate() const {
        if (horizons.size() < 3)
            throw std::invalid_argument("GrowthExperimentConfig: need >= 3 distinct horizons");
        for (std::size_t i = 0; i < horizons.size(); ++i) {
            if (!(horizons[i] >= 2.0))
                throw std::invalid_argument("GrowthExperimentConfig: horizons must be >= 2");
            if (i > 0 && !(horizons[i] > horizons[i - 1]))
                throw std::invalid_argument("GrowthExperimentConfig: horizons must be strictly increasing");
        }
        if (n_paths < 100) throw std::invalid_argument("GrowthExperimentConfig: n_paths must be >= 100");
        if (!(dt > 0.0)) throw std::invalid_argument("GrowthExperimentConfig: dt must be > 0");
    }
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double aic = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
    }
    LineFit f;
    const double det = n * sxx - sx * sx;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double ymean = sy / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double pred = f.slope * x[i] + f.intercept;
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - ymean) * (y[i] - ymean);
    }
    f.r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
    f.aic = n * std::log(std::max(ss_res, 1e-300) / n) + 2.0 * 2.0;
    return f;
}

struct GrowthReport {
    std::vector<double> horizons;
    std::vector<double> mean_sup_sq;  // E sup_{[0,T]} ||X||^2 estimates
    LineFit log_fit;                  // against ln T
    LineFit linear_fit;               // against T
    bool log_preferred = false;
};

/// Dependencies of the semigroup-convolution growth process
///   Y_{k+1} = S_CN(dt) Y_k + Pi( g(Phi_0) . xi_k ),
/// the constant-B stochastic convolution driven through the traveling-wave
/// semigroup. The injection is projected with the discretized operator's own
/// spectral pair: with the continuum psi_tw the neutral component of Y
/// random-walks (O(dx^2) leakage per step) and the measured growth turns
/// linear in T instead of logarithmic.
struct ConvolutionContext {
    const WaveProfile* wave = nullptr;
    const SpectralData* spec = nullptr;
    const NagumoParams* params = nullptr;
    const NoiseSampler* sampler = nullptr;
};

inline GrowthReport sup_growth_experiment(const GrowthExperimentConfig& cfg, unsigned threads = 1,
                                          const ConvolutionContext* ctx = nullptr) {
    cfg.validate();
    if (cfg.process == GrowthProcess::semigroup_convolution &&
        (!ctx || !ctx->wave || !ctx->spec || !ctx->params || !ctx->sampler))
        throw std::invalid_argument("sup_growth_experiment: convolution process needs its context");

    GrowthReport report;
    report.horizons = cfg.horizons;
    report.mean_sup_sq.resize(cfg.horizons.size(), 0.0);

    for (std::size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
        const double T = cfg.horizons[hi];
        const auto steps = static_cast<std::size_t>(std::ceil(T / cfg.dt - 1e-12));
        std::vector<double> sup_sq(cfg.n_paths, 0.0);

        if (cfg.process == GrowthProcess::scalar_ou) {
            const double decay = std::exp(-cfg.dt);
            const double vol = std::sqrt(0.5 * (1.0 - std::exp(-2.0 * cfg.dt)));
            parallel_for(cfg.n_paths, threads, [&](std::size_t j) {
                RandomStream rng = make_stream(cfg.seed, hi * cfg.n_paths + j);
                std::normal_distribution<double> normal(0.0, 1.0);
                double x = 0.0, best = 0.0;
                for (std::size_t k = 0; k < steps; ++k) {
                    x = decay * x + vol * normal(rng);
                    best = std::max(best, x * x);
                }
                sup_sq[j] = best;
            });
        } else {
            const GridSpec grid = ctx->wave->profile.grid;
            GridFunction bprofile(grid);
            for (std::size_t i = 0; i < grid.points; ++i)
                bprofile[i] = evaluate_g(ctx->wave->profile[i], *ctx->params);
            parallel_for(cfg.n_paths, threads, [&](std::size_t j) {
                SemigroupStepper stepper(*ctx->wave, *ctx->spec, *ctx->params, cfg.dt);
                NoiseStream stream(*ctx->sampler, make_stream(cfg.seed, hi * cfg.n_paths + j));
                GridFunction y(grid), xi(grid);
                double best = 0.0;
                for (std::size_t k = 0; k < steps; ++k) {
                    y = stepper.step(y);
                    stream.next(cfg.dt, xi);
                    for (std::size_t i = 0; i < grid.points; ++i) xi[i] *= bprofile[i];
                    const GridFunction forced = apply_discrete_projection_complement(xi, *ctx->spec);
                    for (std::size_t i = 0; i < grid.points; ++i) y[i] += forced[i];
                    best = std::max(best, inner_l2(y, y));
                }
                sup_sq[j] = best;
            });
        }

        double mean = 0.0;
        for (double v : sup_sq) mean += v;
        report.mean_sup_sq[hi] = mean / static_cast<double>(cfg.n_paths);
    }

    std::vector<double> lnT(cfg.horizons.size());
    for (std::size_t i = 0; i < cfg.horizons.size(); ++i) lnT[i] = std::log(cfg.horizons[i]);
    report.log_fit = fit_line(lnT, report.mean_sup_sq);
    report.linear_fit = fit_line(cfg.horizons, report.mean_sup_sq);
    report.log_preferred = report.log_fit.aic < report.linear_fit.aic;
    return report;
}

}
