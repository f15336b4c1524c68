#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "stonag/fft.hpp"

namespace stonag {

/// Uniform grid on [-L, L] with n points, dx = 2L/(n-1).
struct GridSpec {
    double half_length = 0.0;
    std::size_t points = 0;
    double spacing = 0.0;

    GridSpec() = default;
    GridSpec(double L, std::size_t n) : half_length(L), points(n) {
        if (!(L > 0.0)) throw std::invalid_argument("GridSpec: half_length must be > 0");
        if (n < 16) throw std::invalid_argument("GridSpec: need at least 16 points");
        spacing = 2.0 * L / static_cast<double>(n - 1);
    }

    double x(std::size_t i) const { return -half_length + spacing * static_cast<double>(i); }

    bool operator==(const GridSpec& o) const {
        return half_length == o.half_length && points == o.points;
    }
};

/// Real-valued function sampled on a uniform grid.
struct GridFunction {
    GridSpec grid;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(const GridSpec& g) : grid(g), values(g.points, 0.0) {}
    GridFunction(const GridSpec& g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != g.points)
            throw std::invalid_argument("GridFunction: value count does not match grid");
    }

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    template <class F>
    static GridFunction from_function(const GridSpec& g, F&& f) {
        GridFunction out(g);
        for (std::size_t i = 0; i < g.points; ++i) out.values[i] = f(g.x(i));
        return out;
    }
};

inline void require_same_grid(const GridFunction& u, const GridFunction& v) {
    if (!(u.grid == v.grid)) throw std::invalid_argument("grid mismatch");
}

/// Trapezoidal quadrature weight at node i (includes dx).
inline double quad_weight(const GridSpec& g, std::size_t i) {
    return (i == 0 || i + 1 == g.points) ? 0.5 * g.spacing : g.spacing;
}

/// Trapezoidal approximation of the L2 pairing  ∫ u v dx.
inline double inner_l2(const GridFunction& u, const GridFunction& v) {
    require_same_grid(u, v);
    const std::size_t n = u.size();
    const double dx = u.grid.spacing;
    double interior = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) interior += u[i] * v[i];
    return dx * (interior + 0.5 * (u[0] * v[0] + u[n - 1] * v[n - 1]));
}

inline double norm_l2(const GridFunction& u) { return std::sqrt(std::max(0.0, inner_l2(u, u))); }

/// First derivative: central differences, second-order one-sided at the ends.
inline GridFunction derivative(const GridFunction& u) {
    const std::size_t n = u.size();
    if (n < 3) throw std::invalid_argument("derivative: need at least 3 points");
    const double dx = u.grid.spacing;
    GridFunction out(u.grid);
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx);
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (u[i + 1] - u[i - 1]) / (2.0 * dx);
    out[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dx);
    return out;
}

/// Second derivative: central differences, one-sided at the ends.
inline GridFunction second_derivative(const GridFunction& u) {
    const std::size_t n = u.size();
    if (n < 4) throw std::invalid_argument("second_derivative: need at least 4 points");
    const double dx2 = u.grid.spacing * u.grid.spacing;
    GridFunction out(u.grid);
    out[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / dx2;
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / dx2;
    out[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / dx2;
    return out;
}

inline double norm_h1(const GridFunction& u) {
    const GridFunction du = derivative(u);
    return std::sqrt(std::max(0.0, inner_l2(u, u) + inner_l2(du, du)));
}

/// Cubic Lagrange stencil for evaluating a grid function at arbitrary x.
/// Out-of-range nodes are clamped (constant continuation of the tails).
struct CubicStencil {
    std::size_t idx[4];
    double w[4];
};

inline CubicStencil cubic_stencil(const GridSpec& g, double x) {
    const std::size_t n = g.points;
    CubicStencil st;
    double pos = (x + g.half_length) / g.spacing;
    if (pos <= 0.0) {
        st.idx[0] = st.idx[1] = st.idx[2] = st.idx[3] = 0;
        st.w[0] = 1.0; st.w[1] = st.w[2] = st.w[3] = 0.0;
        return st;
    }
    if (pos >= static_cast<double>(n - 1)) {
        st.idx[0] = st.idx[1] = st.idx[2] = st.idx[3] = n - 1;
        st.w[0] = 1.0; st.w[1] = st.w[2] = st.w[3] = 0.0;
        return st;
    }
    const auto j = static_cast<std::ptrdiff_t>(std::floor(pos));
    const double t = pos - static_cast<double>(j);
    st.w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    st.w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    st.w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    st.w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
    const auto last = static_cast<std::ptrdiff_t>(n - 1);
    for (int k = 0; k < 4; ++k) {
        std::ptrdiff_t i = j - 1 + k;
        st.idx[k] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, last));
    }
    return st;
}

inline double evaluate_at(const GridFunction& u, double x) {
    const CubicStencil st = cubic_stencil(u.grid, x);
    return st.w[0] * u[st.idx[0]] + st.w[1] * u[st.idx[1]] + st.w[2] * u[st.idx[2]] +
           st.w[3] * u[st.idx[3]];
}

/// shift(u, delta)(x) = u(x + delta), cubic interpolation, constant tails.
inline GridFunction shift(const GridFunction& u, double delta) {
    if (!(std::abs(delta) < 0.5 * u.grid.half_length))
        throw std::invalid_argument("shift: |delta| must be < L/2");
    GridFunction out(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = evaluate_at(u, u.grid.x(i) + delta);
    return out;
}

namespace detail {

/// Gaussian kernel samples e^{-(k*dx)^2} out to where they vanish in double
/// precision (|r| <= 7.5 covers e^{-r^2} < 1e-24).
inline std::vector<double> gaussian_kernel_samples(double dx, std::size_t n) {
    std::size_t reach = static_cast<std::size_t>(std::ceil(7.5 / dx));
    reach = std::min(reach, n - 1);
    std::vector<double> k(reach + 1);
    for (std::size_t r = 0; r <= reach; ++r) k[r] = std::exp(-(r * dx) * (r * dx));
    return k;
}

}

/// [Qu](x) = ∫ e^{-(x-y)^2} u(y) dy by direct (truncated) summation with the
/// same trapezoidal weights as inner_l2, so Q is exactly self-adjoint in the
/// discrete pairing.
inline GridFunction convolve_gaussian(const GridFunction& u) {
    const std::size_t n = u.size();
    const double dx = u.grid.spacing;
    const std::vector<double> kern = detail::gaussian_kernel_samples(dx, n);
    const auto reach = static_cast<std::ptrdiff_t>(kern.size() - 1);

    std::vector<double> wu(n);
    for (std::size_t j = 0; j < n; ++j) wu[j] = quad_weight(u.grid, j) * u[j];

    GridFunction out(u.grid);
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const std::ptrdiff_t jlo = std::max<std::ptrdiff_t>(0, i - reach);
        const std::ptrdiff_t jhi = std::min<std::ptrdiff_t>(n - 1, i + reach);
        double acc = 0.0;
        for (std::ptrdiff_t j = jlo; j <= jhi; ++j) acc += kern[std::abs(i - j)] * wu[j];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

/// Same operator through a zero-padded FFT; agrees with the direct sum to
/// rounding. Kept as an independent route for cross-checks.
inline GridFunction convolve_gaussian_fft(const GridFunction& u) {
    const std::size_t n = u.size();
    const double dx = u.grid.spacing;
    const std::size_t m = next_power_of_two(2 * n);

    std::vector<std::complex<double>> uf(m, 0.0), kf(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) uf[j] = quad_weight(u.grid, j) * u[j];
    for (std::size_t r = 0; r < m; ++r) {
        const double d = dx * static_cast<double>(std::min(r, m - r));
        kf[r] = std::exp(-d * d);
    }
    fft_radix2(uf, -1);
    fft_radix2(kf, -1);
    for (std::size_t p = 0; p < m; ++p) uf[p] *= kf[p];
    fft_radix2(uf, +1);

    GridFunction out(u.grid);
    for (std::size_t i = 0; i < n; ++i) out[i] = uf[i].real() / static_cast<double>(m);
    return out;
}

// small vector helpers shared by the solvers and steppers

inline GridFunction operator+(GridFunction a, const GridFunction& b) {
    require_same_grid(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline GridFunction operator-(GridFunction a, const GridFunction& b) {
    require_same_grid(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

inline GridFunction operator*(double s, GridFunction a) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= s;
    return a;
}

inline double max_abs(const GridFunction& u) {
    double m = 0.0;
    for (double v : u.values) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(const GridFunction& u) {
    for (double v : u.values)
        if (!std::isfinite(v)) return false;
    return true;
}

}
