#pragma once

#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "stonag/fft.hpp"
#include "stonag/grid.hpp"
#include "stonag/rng.hpp"

namespace stonag {

/// Spatially correlated, white-in-time Gaussian increments with
///   E[xi(x) xi(y)] = dt * e^{-(x-y)^2},
/// sampled by circulant embedding of the kernel on a padded periodic grid.
struct NoiseSampler {
    GridSpec grid;
    std::size_t pad_factor = 2;
    std::size_t embed_size = 0;           // power of two, >= pad_factor * n
    std::vector<double> spectral_factor;  // sqrt of the embedded kernel spectrum
    double clipped_mass = 0.0;            // clipped negative spectral mass / total
};

inline NoiseSampler build_sampler(const GridSpec& grid, std::size_t pad_factor = 2) {
    if (pad_factor < 2) throw std::invalid_argument("build_sampler: pad_factor must be >= 2");
    NoiseSampler s;
    s.grid = grid;
    s.pad_factor = pad_factor;
    const std::size_t m = next_power_of_two(pad_factor * grid.points);
    s.embed_size = m;

    std::vector<std::complex<double>> spec(m);
    for (std::size_t r = 0; r < m; ++r) {
        const double d = grid.spacing * static_cast<double>(std::min(r, m - r));
        spec[r] = std::exp(-d * d);
    }
    fft_radix2(spec, -1);

    double neg = 0.0, total = 0.0;
    s.spectral_factor.resize(m);
    for (std::size_t p = 0; p < m; ++p) {
        const double lambda = spec[p].real();
        total += std::abs(lambda);
        if (lambda < 0.0) {
            neg += -lambda;
            s.spectral_factor[p] = 0.0;
        } else {
            s.spectral_factor[p] = std::sqrt(lambda);
        }
    }
    s.clipped_mass = (total > 0.0) ? neg / total : 0.0;
    if (s.clipped_mass > 1e-8)
        throw std::runtime_error("build_sampler: clipped spectral mass exceeds 1e-8; increase padding");
    return s;
}

namespace detail {

/// One embedded transform yields two independent unit-covariance fields
/// (real and imaginary parts), each restricted to the physical grid.
inline void sample_field_pair(const NoiseSampler& s, RandomStream& rng,
                              std::vector<double>& field_re, std::vector<double>& field_im,
                              std::vector<std::complex<double>>& work) {
    const std::size_t m = s.embed_size;
    const std::size_t n = s.grid.points;
    work.resize(m);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t p = 0; p < m; ++p) {
        const double re = normal(rng);
        const double im = normal(rng);
        work[p] = s.spectral_factor[p] * std::complex<double>(re, im);
    }
    fft_radix2(work, +1);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    field_re.resize(n);
    field_im.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        field_re[i] = work[i].real() * scale;
        field_im[i] = work[i].imag() * scale;
    }
}

}

/// One-shot increment draw (unit-variance field scaled by sqrt(dt)).
inline GridFunction sample_increment(const NoiseSampler& s, double dt, RandomStream& rng) {
    if (!(dt > 0.0)) throw std::invalid_argument("sample_increment: dt must be > 0");
    std::vector<double> re, im;
    std::vector<std::complex<double>> work;
    detail::sample_field_pair(s, rng, re, im, work);
    GridFunction out(s.grid);
    const double root_dt = std::sqrt(dt);
    for (std::size_t i = 0; i < s.grid.points; ++i) out[i] = root_dt * re[i];
    return out;
}

/// Stateful increment stream for the time steppers. Serves the real and the
/// imaginary field of each embedded transform in turn, so consecutive steps
/// cost one FFT per two increments. Fully determined by the engine seed.
class NoiseStream {
public:
    NoiseStream(const NoiseSampler& sampler, RandomStream rng)
        : s_(&sampler), rng_(std::move(rng)) {}

    void next(double dt, GridFunction& out) {
        if (!(dt > 0.0)) throw std::invalid_argument("NoiseStream::next: dt must be > 0");
        if (!have_cached_) {
            detail::sample_field_pair(*s_, rng_, current_, cached_, work_);
            have_cached_ = true;
        } else {
            current_.swap(cached_);
            have_cached_ = false;
        }
        out.grid = s_->grid;
        out.values.resize(s_->grid.points);
        const double root_dt = std::sqrt(dt);
        for (std::size_t i = 0; i < out.values.size(); ++i) out[i] = root_dt * current_[i];
    }

    GridFunction next(double dt) {
        GridFunction out(s_->grid);
        next(dt, out);
        return out;
    }

    const NoiseSampler& sampler() const { return *s_; }

private:
    const NoiseSampler* s_;
    RandomStream rng_;
    bool have_cached_ = false;
    std::vector<double> current_, cached_;
    std::vector<std::complex<double>> work_;
};

/// Hilbert-Schmidt norm of the multiplication operator w -> h.w composed
/// with sqrt(Q): the discrete trace  sum_x h(x)^2 q(0) dx  with q(0) = 1.
inline double hs_norm_sq_multiplier(const GridFunction& h) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * h[i] * quad_weight(h.grid, i);
    return acc;
}

/// Hilbert-Schmidt norm of the rank-one functional w -> <h.w, psi>:
///   sum_k <h sqrt(Q) e_k, psi>^2 = <h Q(h psi), psi>.
inline double hs_norm_sq_rank_one(const GridFunction& h, const GridFunction& psi) {
    require_same_grid(h, psi);
    GridFunction z(h.grid);
    for (std::size_t i = 0; i < h.size(); ++i) z[i] = h[i] * psi[i];
    GridFunction qz = convolve_gaussian(z);
    for (std::size_t i = 0; i < h.size(); ++i) qz[i] *= h[i];
    return inner_l2(qz, psi);
}

}
