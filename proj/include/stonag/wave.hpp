#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stonag/grid.hpp"
#include "stonag/linalg.hpp"

namespace stonag {

/// Model parameters of the stochastic Nagumo equation
///   dU = [rho U_xx + f(U)] dt + sigma g(U) dW^Q,
/// f(u) = u(1-u)(u-a), g(u) = u(1-u) chi(u).
struct NagumoParams {
    double rho = 1.0;
    double a = 0.25;
    double sigma = 0.0;
    double chi_plateau_lo = -1.0;
    double chi_plateau_hi = 2.0;
    double chi_support_lo = -2.0;
    double chi_support_hi = 3.0;

    void validate() const {
        if (!(rho > 0.0)) throw std::invalid_argument("NagumoParams: rho must be > 0");
        if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("NagumoParams: a must be in (0,1)");
        if (!(sigma >= 0.0)) throw std::invalid_argument("NagumoParams: sigma must be >= 0");
        if (!(chi_support_lo < chi_plateau_lo && chi_plateau_lo < chi_plateau_hi &&
              chi_plateau_hi < chi_support_hi))
            throw std::invalid_argument("NagumoParams: chi plateau must lie strictly inside its support");
    }
};

inline double evaluate_f(double u, const NagumoParams& p) { return u * (1.0 - u) * (u - p.a); }

inline double evaluate_f_prime(double u, const NagumoParams& p) {
    return -3.0 * u * u + 2.0 * (1.0 + p.a) * u - p.a;
}

/// C^2 cut-off: 1 on the plateau, 0 outside the support, quintic smoothstep
/// in between. On-path solution values stay inside the plateau, so chi only
/// exists to keep g globally bounded and Lipschitz.
inline double evaluate_chi(double u, const NagumoParams& p) {
    auto smooth = [](double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); };
    if (u <= p.chi_support_lo || u >= p.chi_support_hi) return 0.0;
    if (u >= p.chi_plateau_lo && u <= p.chi_plateau_hi) return 1.0;
    if (u < p.chi_plateau_lo)
        return smooth((u - p.chi_support_lo) / (p.chi_plateau_lo - p.chi_support_lo));
    return smooth((p.chi_support_hi - u) / (p.chi_support_hi - p.chi_plateau_hi));
}

inline double evaluate_g(double u, const NagumoParams& p) {
    return u * (1.0 - u) * evaluate_chi(u, p);
}

/// Traveling front (profile, speed) with the profile derivative cached.
struct WaveProfile {
    GridFunction profile;  // Phi
    double speed = 0.0;    // c
    GridFunction derivative;  // Phi'
};

/// rho Phi'' + c Phi' + f(Phi), evaluated with the shared difference stencils.
inline GridFunction traveling_wave_residual(const GridFunction& phi, double c,
                                            const NagumoParams& p) {
    GridFunction r = second_derivative(phi);
    const GridFunction d1 = derivative(phi);
    for (std::size_t i = 0; i < phi.size(); ++i)
        r[i] = p.rho * r[i] + c * d1[i] + evaluate_f(phi[i], p);
    return r;
}

namespace detail {

struct PhaseRow {
    std::vector<double> weights;  // over interior unknowns
    double target;
};

/// Pointwise pin  Phi(0) = 1/2  expressed on the interior unknowns.
inline PhaseRow pointwise_phase_row(const GridSpec& g) {
    PhaseRow row{std::vector<double>(g.points - 2, 0.0), 0.5};
    const CubicStencil st = cubic_stencil(g, 0.0);
    for (int k = 0; k < 4; ++k) {
        const std::size_t idx = st.idx[k];
        if (idx == 0 || idx + 1 == g.points)
            throw std::invalid_argument("phase condition touches the boundary; grid too small");
        row.weights[idx - 1] += st.w[k];
    }
    return row;
}

}

struct NewtonReport {
    std::vector<double> residual_history;
    bool converged = false;
};

/// Solve the traveling-wave boundary value problem
///   rho Phi'' + c Phi' + f(Phi) = 0,  Phi(-L) = 1, Phi(L) = 0,  Phi(0) = 1/2,
/// with the speed c as an extra unknown (bordered Newton iteration).
inline WaveProfile solve_deterministic_wave(const NagumoParams& p, const GridSpec& grid,
                                            std::optional<WaveProfile> init = std::nullopt,
                                            NewtonReport* report = nullptr) {
    p.validate();
    const std::size_t n = grid.points;
    const std::size_t m = n - 2;
    const double dx = grid.spacing;
    const double invdx2 = 1.0 / (dx * dx);
    const double inv2dx = 1.0 / (2.0 * dx);

    GridFunction phi(grid);
    double c = 0.0;
    if (init) {
        phi = init->profile;
        if (!(phi.grid == grid)) throw std::invalid_argument("solve_deterministic_wave: init grid mismatch");
        c = init->speed;
    } else {
        phi = GridFunction::from_function(grid, [](double x) { return 0.5 * (1.0 - std::tanh(0.5 * x)); });
    }
    phi[0] = 1.0;
    phi[n - 1] = 0.0;

    const detail::PhaseRow phase = detail::pointwise_phase_row(grid);

    auto interior_residual = [&](const GridFunction& u, double cc, std::vector<double>& out) {
        for (std::size_t i = 1; i + 1 < n; ++i) {
            out[i - 1] = p.rho * (u[i + 1] - 2.0 * u[i] + u[i - 1]) * invdx2 +
                         cc * (u[i + 1] - u[i - 1]) * inv2dx + evaluate_f(u[i], p);
        }
    };
    auto phase_residual = [&](const GridFunction& u) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += phase.weights[i] * u[i + 1];
        return s - phase.target;
    };
    auto sup_norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s = std::max(s, std::abs(x));
        return s;
    };

    std::vector<double> res(m), rhs(m), sub(m), dia(m), sup(m), dcol(m);
    const int max_iter = 60;
    double res_norm = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        interior_residual(phi, c, res);
        const double pres = phase_residual(phi);
        res_norm = std::max(sup_norm(res), std::abs(pres));
        if (report) report->residual_history.push_back(res_norm);
        if (res_norm <= 1e-11) {
            if (report) report->converged = true;
            return {phi, c, derivative(phi)};
        }

        for (std::size_t i = 1; i + 1 < n; ++i) {
            sub[i - 1] = p.rho * invdx2 - c * inv2dx;
            dia[i - 1] = -2.0 * p.rho * invdx2 + evaluate_f_prime(phi[i], p);
            sup[i - 1] = p.rho * invdx2 + c * inv2dx;
            dcol[i - 1] = (phi[i + 1] - phi[i - 1]) * inv2dx;
        }
        for (std::size_t i = 0; i < m; ++i) rhs[i] = -res[i];

        BorderedSolution step =
            solve_bordered_tridiagonal(sub, dia, sup, dcol, phase.weights, 0.0, rhs, -pres);

        // damped update: halve the step while the residual grows
        double lambda = 1.0;
        GridFunction trial = phi;
        for (int back = 0; back < 12; ++back) {
            for (std::size_t i = 0; i < m; ++i) trial[i + 1] = phi[i + 1] + lambda * step.y[i];
            std::vector<double> tres(m);
            interior_residual(trial, c + lambda * step.mu, tres);
            const double tnorm = std::max(sup_norm(tres), std::abs(phase_residual(trial)));
            if (tnorm < res_norm || lambda < 1e-3) break;
            lambda *= 0.5;
        }
        for (std::size_t i = 0; i < m; ++i) phi[i + 1] += lambda * step.y[i];
        c += lambda * step.mu;
    }
    throw std::runtime_error("solve_deterministic_wave: Newton did not converge, final residual " +
                             std::to_string(res_norm));
}

/// Adjoint eigenfunction, spectral gap and neutral-mode diagnostics of the
/// discretized linearization  L_tw v = rho v'' + c v' + f'(Phi) v.
struct SpectralData {
    GridFunction psi_tw;        // adjoint eigenfunction, <Phi', psi_tw> = 1
    double beta = 0.0;          // half spectral gap
    double neutral_eigenvalue = 0.0;
    GridFunction neutral_mode;  // numerically computed kernel vector (unit sup-norm)
    GridFunction adjoint_null;  // discrete left null vector, <neutral_mode, adjoint_null> = 1
    double operator_scale = 0.0;  // inf-norm scale of the discretized operator
};

inline SpectralData compute_spectral_data(const WaveProfile& w, const NagumoParams& p) {
    const GridSpec& grid = w.profile.grid;
    const std::size_t n = grid.points;
    const std::size_t m = n - 2;
    const double dx = grid.spacing;
    const double invdx2 = 1.0 / (dx * dx);
    const double inv2dx = 1.0 / (2.0 * dx);

    // psi_tw from the closed form  kappa e^{-c xi / rho} Phi'(xi)
    GridFunction psi = GridFunction::from_function(grid, [&](double x) {
        return std::exp(-w.speed * x / p.rho);
    });
    for (std::size_t i = 0; i < n; ++i) psi[i] *= w.derivative[i];
    const double pairing = inner_l2(w.derivative, psi);
    if (pairing == 0.0) throw std::runtime_error("compute_spectral_data: degenerate normalization pairing");
    psi = (1.0 / pairing) * psi;

    // interior discretization of L_tw; the off-diagonal product is positive,
    // so a diagonal similarity makes it symmetric and the spectrum is real
    const double lo = p.rho * invdx2 - w.speed * inv2dx;
    const double hi = p.rho * invdx2 + w.speed * inv2dx;
    if (!(lo > 0.0 && hi > 0.0))
        throw std::runtime_error("compute_spectral_data: grid too coarse to symmetrize (need dx < 2 rho/|c|)");
    std::vector<double> dia(m), off(m - 1, std::sqrt(lo * hi));
    for (std::size_t i = 1; i + 1 < n; ++i)
        dia[i - 1] = -2.0 * p.rho * invdx2 + evaluate_f_prime(w.profile[i], p);

    const double lambda0 = symmetric_tridiagonal_eigenvalue(dia, off, m - 1);
    const double lambda1 = symmetric_tridiagonal_eigenvalue(dia, off, m - 2);
    if (!(lambda1 < 0.0))
        throw std::runtime_error("compute_spectral_data: nonpositive spectral gap");

    std::vector<double> vsym = symmetric_tridiagonal_eigenvector(dia, off, lambda0);
    // undo the similarity: right eigenvector r^i v_sym,i, left r^{-i} v_sym,i
    const double r = std::sqrt(lo / hi);
    GridFunction mode(grid), left(grid);
    double fwd = 1.0, bwd = 1.0, sup = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        mode[i + 1] = vsym[i] * fwd;
        left[i + 1] = vsym[i] * bwd;
        fwd *= r;
        bwd /= r;
        sup = std::max(sup, std::abs(mode[i + 1]));
    }
    for (std::size_t i = 0; i < n; ++i) mode[i] /= sup;
    // orient like Phi' (sup-normalized)
    const double dsup = max_abs(w.derivative);
    double agree = 0.0;
    for (std::size_t i = 0; i < n; ++i) agree += mode[i] * (w.derivative[i] / dsup);
    if (agree < 0.0)
        for (std::size_t i = 0; i < n; ++i) mode[i] = -mode[i];
    // normalize the discrete spectral pairing <mode, left> = 1
    const double discrete_pair = inner_l2(mode, left);
    if (discrete_pair == 0.0)
        throw std::runtime_error("compute_spectral_data: degenerate discrete spectral pair");
    for (std::size_t i = 0; i < n; ++i) left[i] /= discrete_pair;

    double scale = 0.0;
    for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, std::abs(dia[i]) + lo + hi);

    SpectralData out;
    out.psi_tw = std::move(psi);
    out.beta = -0.5 * lambda1;
    out.neutral_eigenvalue = lambda0;
    out.neutral_mode = std::move(mode);
    out.adjoint_null = std::move(left);
    out.operator_scale = scale;
    return out;
}

/// Complement of the *discrete* spectral projection: the Crank-Nicolson
/// evolution preserves this orthogonality to rounding, where the continuum
/// psi_tw version leaks O(dx^2) per step. The stochastic-convolution growth
/// experiments need the exact version; the phase tracker keeps psi_tw.
inline GridFunction apply_discrete_projection_complement(const GridFunction& v,
                                                         const SpectralData& s) {
    require_same_grid(v, s.adjoint_null);
    const double coeff = inner_l2(v, s.adjoint_null);
    GridFunction out = v;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] -= coeff * s.neutral_mode[i];
    return out;
}

/// P_tw v = <v, psi_tw> Phi';   this returns  Pi v = v - P_tw v.
inline GridFunction apply_projection_complement(const GridFunction& v, const SpectralData& s,
                                                const WaveProfile& w) {
    require_same_grid(v, s.psi_tw);
    const double coeff = inner_l2(v, s.psi_tw);
    GridFunction out = v;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] -= coeff * w.derivative[i];
    return out;
}

/// One Crank-Nicolson step of  v_t = L_tw v  with homogeneous Dirichlet ends.
/// The factorization is cached, so repeated steps are two O(n) sweeps.
class SemigroupStepper {
public:
    SemigroupStepper(const WaveProfile& w, const SpectralData&, const NagumoParams& p, double dt)
        : grid_(w.profile.grid), dt_(dt) {
        if (!(dt > 0.0)) throw std::invalid_argument("SemigroupStepper: dt must be > 0");
        const std::size_t n = grid_.points;
        const double dx = grid_.spacing;
        const double invdx2 = 1.0 / (dx * dx);
        const double inv2dx = 1.0 / (2.0 * dx);
        const std::size_t m = n - 2;
        lo_ = p.rho * invdx2 - w.speed * inv2dx;
        hi_ = p.rho * invdx2 + w.speed * inv2dx;
        dia_.resize(m);
        for (std::size_t i = 1; i + 1 < n; ++i)
            dia_[i - 1] = -2.0 * p.rho * invdx2 + evaluate_f_prime(w.profile[i], p);
        std::vector<double> sub(m, -0.5 * dt * lo_), dia(m), sup(m, -0.5 * dt * hi_);
        for (std::size_t i = 0; i < m; ++i) dia[i] = 1.0 - 0.5 * dt * dia_[i];
        lu_.emplace(std::move(sub), std::move(dia), std::move(sup));
    }

    GridFunction step(const GridFunction& v) const {
        require_same_grid_(v);
        const std::size_t n = grid_.points;
        const std::size_t m = n - 2;
        std::vector<double> rhs(m);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double Lv = lo_ * v[i - 1] + dia_[i - 1] * v[i] + hi_ * v[i + 1];
            rhs[i - 1] = v[i] + 0.5 * dt_ * Lv;
        }
        lu_->solve(rhs);
        GridFunction out(grid_);
        for (std::size_t i = 0; i < m; ++i) out[i + 1] = rhs[i];
        return out;
    }

    double dt() const { return dt_; }

private:
    void require_same_grid_(const GridFunction& v) const {
        if (!(v.grid == grid_)) throw std::invalid_argument("SemigroupStepper: grid mismatch");
    }
    GridSpec grid_;
    double dt_;
    double lo_ = 0.0, hi_ = 0.0;
    std::vector<double> dia_;
    mutable std::optional<TridiagonalLU> lu_;
};

inline GridFunction semigroup_step(const GridFunction& v, double dt, const SpectralData& s,
                                   const WaveProfile& w, const NagumoParams& p) {
    return SemigroupStepper(w, s, p, dt).step(v);
}

/// Empirical stand-in for the semigroup constant M: max over sampled
/// projected directions and times of ||S(t)v|| / ||v||. Diagnostic only.
inline double estimate_semigroup_bound(const WaveProfile& w, const SpectralData& s,
                                       const NagumoParams& p) {
    const GridSpec& grid = w.profile.grid;
    std::uint64_t st = 0x9E3779B97F4A7C15ull;
    auto uniform = [&st]() {
        st ^= st << 13; st ^= st >> 7; st ^= st << 17;
        return static_cast<double>(st >> 11) / 9007199254740992.0 - 0.5;
    };
    double worst = 1.0;
    const double dt = 0.05;
    SemigroupStepper stepper(w, s, p, dt);
    for (int trial = 0; trial < 4; ++trial) {
        GridFunction v(grid);
        for (std::size_t i = 1; i + 1 < grid.points; ++i)
            v[i] = uniform() * std::exp(-0.05 * grid.x(i) * grid.x(i));
        v = apply_projection_complement(v, s, w);
        const double base = norm_l2(v);
        for (int k = 1; k <= 100; ++k) {
            v = stepper.step(v);
            worst = std::max(worst, norm_l2(v) / base);
        }
    }
    return worst;
}

}
