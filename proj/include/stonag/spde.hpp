#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stonag/grid.hpp"
#include "stonag/noise.hpp"
#include "stonag/wave.hpp"

namespace stonag {

/// Semi-implicit Euler-Maruyama configuration for
///   dU = [rho U_xx + f(U)] dt + sigma g(U) dW^Q,  U(-L)=1, U(L)=0.
struct SimConfig {
    NagumoParams params;
    GridSpec grid;
    double dt = 0.005;
    double t_end = 10.0;
    std::uint64_t seed = 0;

    /// Returns soft warnings (the dt <= dx guideline is warned, not enforced).
    std::vector<std::string> validate() const {
        params.validate();
        if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be > 0");
        if (!(t_end >= 0.0)) throw std::invalid_argument("SimConfig: t_end must be >= 0");
        std::vector<std::string> warnings;
        if (dt > grid.spacing)
            warnings.push_back("dt exceeds dx; the semi-implicit scheme is stable but accuracy suffers");
        return warnings;
    }

    std::size_t step_count() const {
        return static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));
    }
};

struct PathState {
    GridFunction u;
    double t = 0.0;
    std::uint64_t increments_consumed = 0;
};

enum class InitialKind { exact_wave, perturbed_wave };

/// exact_wave: U(0) = Phi.  perturbed_wave adds the localized H1 bump
/// amplitude * sin(mode pi x / L) * sech(x).
inline PathState initial_condition(InitialKind kind, const WaveProfile& w, const GridSpec& grid,
                                   double amplitude = 0.0, int mode = 1,
                                   const NagumoParams& p = NagumoParams{},
                                   std::string* warning = nullptr) {
    if (!(w.profile.grid == grid)) throw std::invalid_argument("initial_condition: grid mismatch");
    PathState st;
    st.u = w.profile;
    if (kind == InitialKind::perturbed_wave && amplitude != 0.0) {
        const double L = grid.half_length;
        for (std::size_t i = 0; i < grid.points; ++i) {
            const double x = grid.x(i);
            st.u[i] += amplitude * std::sin(mode * 3.14159265358979323846 * x / L) / std::cosh(x);
        }
    }
    if (warning) {
        warning->clear();
        double lo = st.u[0], hi = st.u[0];
        for (double v : st.u.values) { lo = std::min(lo, v); hi = std::max(hi, v); }
        if (lo < p.chi_plateau_lo || hi > p.chi_plateau_hi)
            *warning = "initial data leaves the chi plateau; g is no longer u(1-u) on part of the state";
    }
    return st;
}

/// Prefactorized solver for (I - dt rho D2) on the interior with the
/// boundary rows pinned to the rest states.
class SpdeStepper {
public:
    SpdeStepper(const SimConfig& cfg, const NoiseSampler& sampler, RandomStream rng)
        : cfg_(cfg), stream_(sampler, std::move(rng)) {
        if (!(sampler.grid == cfg.grid)) throw std::invalid_argument("SpdeStepper: sampler grid mismatch");
        const std::size_t m = cfg.grid.points - 2;
        const double r = cfg.dt * cfg.params.rho / (cfg.grid.spacing * cfg.grid.spacing);
        r_ = r;
        // Thomas elimination coefficients for the constant matrix (1+2r, -r)
        cp_.resize(m);
        pivot_.resize(m);
        double beta = 1.0 + 2.0 * r;
        pivot_[0] = beta;
        cp_[0] = -r / beta;
        for (std::size_t i = 1; i < m; ++i) {
            beta = 1.0 + 2.0 * r + r * cp_[i - 1];
            pivot_[i] = beta;
            cp_[i] = -r / beta;
        }
        rhs_.resize(m);
    }

    /// Advance one step; the consumed increment is written to xi_out so the
    /// phase tracker can use the identical noise.
    void step(PathState& state, GridFunction& xi_out) {
        stream_.next(cfg_.dt, xi_out);
        step_with_increment(state, xi_out);
    }

    /// Deterministic core: (I - dt rho D2) U_new = U + dt f(U) + sigma g(U).xi
    void step_with_increment(PathState& state, const GridFunction& xi) {
        GridFunction& u = state.u;
        const std::size_t n = cfg_.grid.points;
        const std::size_t m = n - 2;
        const NagumoParams& p = cfg_.params;
        const double sigma = p.sigma;

        for (std::size_t i = 1; i + 1 < n; ++i) {
            double v = u[i] + cfg_.dt * evaluate_f(u[i], p);
            if (sigma != 0.0) v += sigma * evaluate_g(u[i], p) * xi[i];
            rhs_[i - 1] = v;
        }
        // Dirichlet contributions; the boundary values are frozen at the
        // initial data (the rest states 1 and 0 on tracked runs)
        rhs_[0] += r_ * u[0];
        rhs_[m - 1] += r_ * u[n - 1];

        // forward/back substitution with the cached factorization
        rhs_[0] /= pivot_[0];
        for (std::size_t i = 1; i < m; ++i) rhs_[i] = (rhs_[i] + r_ * rhs_[i - 1]) / pivot_[i];
        for (std::size_t i = m - 1; i-- > 0;) rhs_[i] -= cp_[i] * rhs_[i + 1];

        for (std::size_t i = 0; i < m; ++i) u[i + 1] = rhs_[i];
        state.t += cfg_.dt;
        state.increments_consumed += 1;
        if (!all_finite(u)) throw std::runtime_error("SpdeStepper: non-finite values (blow-up)");
    }

    const SimConfig& config() const { return cfg_; }

private:
    SimConfig cfg_;
    NoiseStream stream_;
    double r_ = 0.0;
    std::vector<double> cp_, pivot_, rhs_;
};

namespace detail {

template <class Obs>
bool notify(Obs&& obs, const PathState& st, const GridFunction& xi) {
    if constexpr (std::is_invocable_r_v<bool, Obs, const PathState&, const GridFunction&>) {
        return obs(st, xi);
    } else {
        obs(st, xi);
        return true;
    }
}

}

/// Iterate the stepper until t_end; observers see (state, xi) after every
/// step and may stop the run by returning false.
template <class... Obs>
PathState run_path(const SimConfig& cfg, const NoiseSampler& sampler, PathState initial,
                   Obs&&... obs) {
    SpdeStepper stepper(cfg, sampler, make_stream(cfg.seed, 0));
    GridFunction xi(cfg.grid);
    const std::size_t steps = cfg.step_count();
    for (std::size_t k = 0; k < steps; ++k) {
        stepper.step(initial, xi);
        bool keep_going = true;
        ((keep_going = keep_going && detail::notify(obs, initial, xi)), ...);
        if (!keep_going) break;
    }
    return initial;
}

}
