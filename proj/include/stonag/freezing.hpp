#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "stonag/grid.hpp"
#include "stonag/noise.hpp"
#include "stonag/spde.hpp"
#include "stonag/wave.hpp"

namespace stonag {

/// Raised when the phase ansatz breaks down (pairing denominator below the
/// guard, or the front drifting into the boundary layer). Ensemble drivers
/// classify such paths as exited.
struct WaveLostError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// sigma-corrected instantaneous wave (Phi_sigma, c_sigma).
struct StochasticWave {
    GridFunction profile;
    double speed = 0.0;
    double sigma = 0.0;
    GridFunction derivative;
};

/// Phase tracker state: the phase Gamma, the frozen-frame perturbation
/// V = U(. + Gamma) - Phi_sigma, and the latest step diagnostics.
struct PhaseState {
    double gamma = 0.0;
    GridFunction v;
    double a_last = 0.0;
    double b_hs_sq_last = 0.0;
    double kappa_last = 1.0;
};

namespace detail {

constexpr double pairing_guard = 0.1;  // 10% of <Phi0', psi_tw> = 1

/// Shared intermediates of all phase pairings at a given (u, gamma).
struct PhaseCoefficients {
    GridFunction psi_gamma;  // psi_tw(. - gamma)
    GridFunction g;          // g(u)
    GridFunction q_g_psi;    // Q(g .* psi_gamma)
    double den = 0.0;        // <du, psi_gamma>
    double gq_pair = 0.0;    // <g .* Q(g psi_gamma), psi_gamma>
    double bhs = 0.0;        // ||b_bar||_HS^2 = gq_pair / den^2
    double a = 0.0;          // a_sigma(u, gamma)
};

inline void require_den(double den) {
    if (std::abs(den) < pairing_guard)
        throw WaveLostError("phase pairing denominator below guard (wave lost)");
}

}

/// K_sigma(u, gamma, c) =
///   rho u'' + c u' + f(u) + (sigma^2/2) ||b_bar||_HS^2 u''
///   - sigma^2 <du, psi_gamma>^{-1} d/dx[ g(u) Q(g(u) psi_gamma) ].
/// At sigma = 0 this is exactly the traveling-wave residual.
inline GridFunction k_sigma_residual(const GridFunction& phi, double gamma, double c,
                                     const SpectralData& spec, const NagumoParams& p) {
    GridFunction r = traveling_wave_residual(phi, c, p);
    if (p.sigma == 0.0) return r;

    const GridFunction psi_gamma = (gamma == 0.0) ? spec.psi_tw : shift(spec.psi_tw, -gamma);
    GridFunction g(phi.grid);
    for (std::size_t i = 0; i < phi.size(); ++i) g[i] = evaluate_g(phi[i], p);
    GridFunction z(phi.grid);
    for (std::size_t i = 0; i < phi.size(); ++i) z[i] = g[i] * psi_gamma[i];
    const GridFunction qz = convolve_gaussian(z);

    GridFunction gq(phi.grid);
    for (std::size_t i = 0; i < phi.size(); ++i) gq[i] = g[i] * qz[i];
    const double gq_pair = inner_l2(gq, psi_gamma);
    const double den = inner_l2(derivative(phi), psi_gamma);
    if (gq_pair != 0.0) detail::require_den(den);
    const double bhs = (gq_pair == 0.0) ? 0.0 : gq_pair / (den * den);

    const GridFunction d2 = second_derivative(phi);
    const GridFunction dgq = derivative(gq);
    const double s2 = p.sigma * p.sigma;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        r[i] += 0.5 * s2 * bhs * d2[i];
        if (gq_pair != 0.0) r[i] -= s2 / den * dgq[i];
    }
    return r;
}

namespace detail {

inline PhaseCoefficients compute_phase_coefficients(const GridFunction& u, double gamma, double c,
                                                    const SpectralData& spec,
                                                    const NagumoParams& p) {
    PhaseCoefficients w;
    w.psi_gamma = (gamma == 0.0) ? spec.psi_tw : shift(spec.psi_tw, -gamma);
    const GridFunction du = derivative(u);
    w.den = inner_l2(du, w.psi_gamma);

    w.g = GridFunction(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) w.g[i] = evaluate_g(u[i], p);
    GridFunction z(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) z[i] = w.g[i] * w.psi_gamma[i];
    w.q_g_psi = convolve_gaussian(z);
    GridFunction gq(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) gq[i] = w.g[i] * w.q_g_psi[i];
    w.gq_pair = inner_l2(gq, w.psi_gamma);
    if (w.gq_pair != 0.0) {
        require_den(w.den);
        w.bhs = w.gq_pair / (w.den * w.den);
    }

    // a_sigma = -<K_sigma(u, gamma, c), psi_gamma> / den
    GridFunction K = traveling_wave_residual(u, c, p);
    if (p.sigma != 0.0) {
        const GridFunction d2 = second_derivative(u);
        const GridFunction dgq = derivative(gq);
        const double s2 = p.sigma * p.sigma;
        for (std::size_t i = 0; i < u.size(); ++i) {
            K[i] += 0.5 * s2 * w.bhs * d2[i];
            if (w.gq_pair != 0.0) K[i] -= s2 / w.den * dgq[i];
        }
    }
    const double num = inner_l2(K, w.psi_gamma);
    if (num != 0.0) require_den(w.den);
    w.a = (num == 0.0) ? 0.0 : -num / w.den;
    return w;
}

inline double b_pair_from(const PhaseCoefficients& w, const GridFunction& noise) {
    double num = 0.0;
    for (std::size_t i = 0; i < noise.size(); ++i)
        num += w.g[i] * noise[i] * w.psi_gamma[i] * quad_weight(noise.grid, i);
    if (num == 0.0) return 0.0;
    require_den(w.den);
    return -num / w.den;
}

}

/// b_bar(u, gamma)[w] = -<du, psi_tw(.-gamma)>^{-1} <g(u) w, psi_tw(.-gamma)>.
inline double b_bar_pairing(const GridFunction& u, double gamma, const GridFunction& w,
                            const SpectralData& spec, const NagumoParams& p) {
    require_same_grid(u, w);
    const GridFunction psi_gamma = (gamma == 0.0) ? spec.psi_tw : shift(spec.psi_tw, -gamma);
    double num = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        num += evaluate_g(u[i], p) * w[i] * psi_gamma[i] * quad_weight(u.grid, i);
    if (num == 0.0) return 0.0;
    const double den = inner_l2(derivative(u), psi_gamma);
    detail::require_den(den);
    return -num / den;
}

/// ||b_bar(u, gamma)||_HS^2 = <du, psi_gamma>^{-2} <g Q(g psi_gamma), psi_gamma>.
inline double b_bar_hs_norm_sq(const GridFunction& u, double gamma, const SpectralData& spec,
                               const NagumoParams& p) {
    const GridFunction psi_gamma = (gamma == 0.0) ? spec.psi_tw : shift(spec.psi_tw, -gamma);
    GridFunction g(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = evaluate_g(u[i], p);
    const double num = hs_norm_sq_rank_one(g, psi_gamma);
    if (num == 0.0) return 0.0;
    const double den = inner_l2(derivative(u), psi_gamma);
    detail::require_den(den);
    return num / (den * den);
}

/// kappa_sigma = 1 + (sigma^2 / 2 rho) ||b_bar||_HS^2  (always >= 1).
inline double kappa_sigma(const GridFunction& u, double gamma, const SpectralData& spec,
                          const NagumoParams& p) {
    if (p.sigma == 0.0) return 1.0;
    return 1.0 + p.sigma * p.sigma / (2.0 * p.rho) * b_bar_hs_norm_sq(u, gamma, spec, p);
}

/// Newton solve of K_sigma(Phi, 0, c) = 0 with phase condition
/// <Phi - Phi_0, psi_tw> = 0, warm-started at the deterministic wave. The
/// O(sigma^2) nonlocal Jacobian blocks are frozen per iteration; the full
/// residual still converges below 1e-9.
inline StochasticWave solve_stochastic_wave(const NagumoParams& p, const GridSpec& grid,
                                            const SpectralData& spec, const WaveProfile& det_wave,
                                            NewtonReport* report = nullptr,
                                            double sigma_threshold = 0.5) {
    p.validate();
    if (p.sigma > sigma_threshold)
        throw std::invalid_argument("solve_stochastic_wave: sigma above the continuation threshold");
    if (!(det_wave.profile.grid == grid))
        throw std::invalid_argument("solve_stochastic_wave: grid mismatch");

    const std::size_t n = grid.points;
    const std::size_t m = n - 2;
    const double dx = grid.spacing;
    const double invdx2 = 1.0 / (dx * dx);
    const double inv2dx = 1.0 / (2.0 * dx);

    GridFunction phi = det_wave.profile;
    double c = det_wave.speed;

    std::vector<double> prow(m);
    for (std::size_t i = 1; i + 1 < n; ++i) prow[i - 1] = spec.psi_tw[i] * quad_weight(grid, i);

    auto phase_res = [&](const GridFunction& u) {
        GridFunction diff = u - det_wave.profile;
        return inner_l2(diff, spec.psi_tw);
    };

    std::vector<double> sub(m), dia(m), sup(m), dcol(m), rhs(m);
    double res_norm = 0.0;
    for (int it = 0; it < 80; ++it) {
        const GridFunction r = k_sigma_residual(phi, 0.0, c, spec, p);
        const double pres = phase_res(phi);
        res_norm = std::abs(pres);
        for (std::size_t i = 1; i + 1 < n; ++i) res_norm = std::max(res_norm, std::abs(r[i]));
        if (report) report->residual_history.push_back(res_norm);
        if (res_norm <= 1e-10) {
            if (report) report->converged = true;
            return {phi, c, p.sigma, derivative(phi)};
        }

        const double bhs = (p.sigma == 0.0) ? 0.0 : b_bar_hs_norm_sq(phi, 0.0, spec, p);
        const double rho_eff = p.rho + 0.5 * p.sigma * p.sigma * bhs;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            sub[i - 1] = rho_eff * invdx2 - c * inv2dx;
            dia[i - 1] = -2.0 * rho_eff * invdx2 + evaluate_f_prime(phi[i], p);
            sup[i - 1] = rho_eff * invdx2 + c * inv2dx;
            dcol[i - 1] = (phi[i + 1] - phi[i - 1]) * inv2dx;
            rhs[i - 1] = -r[i];
        }
        BorderedSolution step = solve_bordered_tridiagonal(sub, dia, sup, dcol, prow, 0.0, rhs, -pres);

        double lambda = 1.0;
        for (int back = 0; back < 10; ++back) {
            GridFunction trial = phi;
            for (std::size_t i = 0; i < m; ++i) trial[i + 1] += lambda * step.y[i];
            const GridFunction tr = k_sigma_residual(trial, 0.0, c + lambda * step.mu, spec, p);
            double tnorm = std::abs(phase_res(trial));
            for (std::size_t i = 1; i + 1 < n; ++i) tnorm = std::max(tnorm, std::abs(tr[i]));
            if (tnorm < res_norm || lambda < 1e-3) break;
            lambda *= 0.5;
        }
        for (std::size_t i = 0; i < m; ++i) phi[i + 1] += lambda * step.y[i];
        c += lambda * step.mu;
    }
    if (res_norm <= 1e-9) {
        if (report) report->converged = true;
        return {phi, c, p.sigma, derivative(phi)};
    }
    throw std::runtime_error("solve_stochastic_wave: no convergence, final residual " +
                             std::to_string(res_norm));
}

/// a_sigma(u, gamma) = -<du, psi_gamma>^{-1} <K_sigma(u, gamma, c_sigma), psi_gamma>.
inline double a_sigma(const GridFunction& u, double gamma, const StochasticWave& sw,
                      const SpectralData& spec, const NagumoParams& p) {
    return detail::compute_phase_coefficients(u, gamma, sw.speed, spec, p).a;
}

/// Gamma(0) such that <u0(. + Gamma) - Phi_sigma, psi_tw> = 0, by bracketed
/// root finding over |gamma| <= L/4.
inline double initial_phase(const GridFunction& u0, const StochasticWave& sw,
                            const SpectralData& spec) {
    require_same_grid(u0, sw.profile);
    const double L = u0.grid.half_length;
    auto h = [&](double gamma) {
        const GridFunction v = shift(u0, gamma) - sw.profile;
        return inner_l2(v, spec.psi_tw);
    };
    const int scan = 128;
    double lo = -0.25 * L, hi = 0.25 * L;
    double prev_g = lo, prev_h = h(lo);
    bool found = false;
    if (prev_h == 0.0) return lo;
    for (int k = 1; k <= scan; ++k) {
        const double gamma = lo + (hi - lo) * k / scan;
        const double val = h(gamma);
        if (val == 0.0) return gamma;
        if ((val < 0.0) != (prev_h < 0.0)) {
            lo = prev_g; hi = gamma;
            prev_h = h(lo);
            found = true;
            break;
        }
        prev_g = gamma; prev_h = val;
    }
    if (!found) throw std::runtime_error("initial_phase: no bracket within |gamma| <= L/4");

    double flo = prev_h, fhi = h(hi);
    double best = lo, fbest = flo;
    for (int it = 0; it < 200 && std::abs(fbest) > 1e-12; ++it) {
        // secant proposal, bisection fallback
        double mid = (fhi != flo) ? hi - fhi * (hi - lo) / (fhi - flo) : 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
        const double fmid = h(mid);
        if (std::abs(fmid) < std::abs(fbest)) { best = mid; fbest = fmid; }
        if ((fmid < 0.0) == (flo < 0.0)) { lo = mid; flo = fmid; }
        else { hi = mid; fhi = fmid; }
        if (hi - lo < 1e-14 * std::max(1.0, L)) break;
    }
    if (std::abs(fbest) > 1e-10)
        throw std::runtime_error("initial_phase: root finder stalled, |h| = " + std::to_string(std::abs(fbest)));
    return best;
}

/// One Euler-Maruyama step of the phase SDE
///   dGamma = [c_sigma + a_sigma(U, Gamma)] dt + sigma b_bar(U, Gamma) dW^Q,
/// consuming the identical increment xi as the SPDE step, followed by the
/// frozen-frame update V = U(. + Gamma) - Phi_sigma.
inline PhaseState phase_step(const PhaseState& ps, const PathState& state, const GridFunction& xi,
                             double dt, const StochasticWave& sw, const SpectralData& spec,
                             const NagumoParams& p) {
    const detail::PhaseCoefficients w =
        detail::compute_phase_coefficients(state.u, ps.gamma, sw.speed, spec, p);
    PhaseState out;
    out.gamma = ps.gamma + (sw.speed + w.a) * dt + p.sigma * detail::b_pair_from(w, xi);
    out.v = shift(state.u, out.gamma) - sw.profile;
    out.a_last = w.a;
    out.b_hs_sq_last = w.bhs;
    out.kappa_last = 1.0 + p.sigma * p.sigma / (2.0 * p.rho) * w.bhs;
    return out;
}

/// Per-step diagnostic record of a tracked run.
struct TrackedStepRecord {
    double t = 0.0;
    double gamma = 0.0;
    double v_l2 = 0.0;
    double v_h1 = 0.0;
    double a_sigma = 0.0;
    double b_hs_sq = 0.0;
    double kappa = 0.0;
    double orthogonality = 0.0;  // <V, psi_tw>, monitored (only enforced at t=0)
};

/// Coupled SPDE + phase tracker. Phase coefficients are evaluated at the
/// pre-step state (Ito convention); V is formed from the post-step field.
class TrackedPath {
public:
    TrackedPath(const SimConfig& cfg, const NoiseSampler& sampler, RandomStream rng,
                const StochasticWave& sw, const SpectralData& spec, PathState init)
        : cfg_(cfg), sw_(&sw), spec_(&spec),
          stepper_(cfg, sampler, std::move(rng)), state_(std::move(init)), xi_(cfg.grid) {
        phase_.gamma = initial_phase(state_.u, sw, spec);
        phase_.v = shift(state_.u, phase_.gamma) - sw.profile;
    }

    /// Advance one coupled step. Throws WaveLostError when the ansatz fails.
    TrackedStepRecord step() {
        const detail::PhaseCoefficients w =
            detail::compute_phase_coefficients(state_.u, phase_.gamma, sw_->speed, *spec_, cfg_.params);
        stepper_.step(state_, xi_);
        return finish_step_(w);
    }

    /// Same, with an externally supplied increment (resolution / equivariance
    /// studies drive both routes through here).
    TrackedStepRecord step_with_increment(const GridFunction& xi) {
        const detail::PhaseCoefficients w =
            detail::compute_phase_coefficients(state_.u, phase_.gamma, sw_->speed, *spec_, cfg_.params);
        xi_ = xi;
        stepper_.step_with_increment(state_, xi_);
        return finish_step_(w);
    }

    const PathState& state() const { return state_; }
    const PhaseState& phase() const { return phase_; }
    const GridFunction& last_increment() const { return xi_; }

private:
    TrackedStepRecord finish_step_(const detail::PhaseCoefficients& w) {
        const NagumoParams& p = cfg_.params;
        phase_.gamma += (sw_->speed + w.a) * cfg_.dt + p.sigma * detail::b_pair_from(w, xi_);
        // abort within 5 kernel widths of the boundary; the shift contract
        // (|delta| < L/2) caps the reach before that on narrow domains
        const double reach = std::min(cfg_.grid.half_length - 5.0, 0.49 * cfg_.grid.half_length);
        if (std::abs(phase_.gamma) > reach)
            throw WaveLostError("tracked front too close to the domain boundary");
        phase_.v = shift(state_.u, phase_.gamma) - sw_->profile;
        phase_.a_last = w.a;
        phase_.b_hs_sq_last = w.bhs;
        phase_.kappa_last = 1.0 + p.sigma * p.sigma / (2.0 * p.rho) * w.bhs;

        TrackedStepRecord rec;
        rec.t = state_.t;
        rec.gamma = phase_.gamma;
        rec.v_l2 = norm_l2(phase_.v);
        rec.v_h1 = norm_h1(phase_.v);
        rec.a_sigma = phase_.a_last;
        rec.b_hs_sq = phase_.b_hs_sq_last;
        rec.kappa = phase_.kappa_last;
        rec.orthogonality = inner_l2(phase_.v, spec_->psi_tw);
        return rec;
    }

    SimConfig cfg_;
    const StochasticWave* sw_;
    const SpectralData* spec_;
    SpdeStepper stepper_;
    PathState state_;
    PhaseState phase_;
    GridFunction xi_;
};

}
