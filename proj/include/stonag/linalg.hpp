#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace stonag {

/// Tridiagonal system solver (Thomas algorithm, no pivoting).
/// sub[i] = A(i,i-1) (sub[0] ignored), diag[i] = A(i,i), sup[i] = A(i,i+1)
/// (sup[n-1] ignored). Requires a well-conditioned, pivot-free matrix;
/// the Crank-Nicolson and semi-implicit matrices used here are strictly
/// diagonally dominant.
inline void solve_tridiagonal(const std::vector<double>& sub,
                              const std::vector<double>& diag,
                              const std::vector<double>& sup,
                              std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    if (n == 0) return;
    std::vector<double> cp(n), dp(n);
    double beta = diag[0];
    if (beta == 0.0) throw std::runtime_error("solve_tridiagonal: zero pivot");
    cp[0] = sup[0] / beta;
    dp[0] = rhs[0] / beta;
    for (std::size_t i = 1; i < n; ++i) {
        beta = diag[i] - sub[i] * cp[i - 1];
        if (beta == 0.0) throw std::runtime_error("solve_tridiagonal: zero pivot");
        cp[i] = (i + 1 < n ? sup[i] : 0.0) / beta;
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / beta;
    }
    rhs[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = dp[i] - cp[i] * rhs[i + 1];
}

/// LU factorization of a tridiagonal matrix with partial (adjacent-row)
/// pivoting. Pivoting introduces a second superdiagonal. Tolerates the
/// near-singular Jacobians that appear when Newton closes in on a wave
/// profile whose linearization has an almost-neutral mode.
class TridiagonalLU {
public:
    TridiagonalLU(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup)
        : n_(diag.size()), d_(std::move(diag)), u1_(std::move(sup)), u2_(n_, 0.0),
          mult_(n_, 0.0), swapped_(n_, 0) {
        std::vector<double>& a = sub;
        for (std::size_t k = 0; k + 1 < n_; ++k) {
            double below = a[k + 1];
            if (std::abs(d_[k]) >= std::abs(below)) {
                swapped_[k] = 0;
                double m = (d_[k] != 0.0) ? below / d_[k] : 0.0;
                mult_[k] = m;
                d_[k + 1] -= m * u1_[k];
                if (k + 2 < n_) u1_[k + 1] -= m * u2_[k];
            } else {
                swapped_[k] = 1;
                // pivot row becomes the old row k+1
                std::swap(d_[k], below);       // d_[k] = old sub, below = old diag[k]
                double new_u1 = d_[k + 1];
                double new_u2 = (k + 2 < n_) ? u1_[k + 1] : 0.0;
                double old_u1 = u1_[k];
                double old_u2 = u2_[k];
                u1_[k] = new_u1;
                u2_[k] = new_u2;
                double m = below / d_[k];
                mult_[k] = m;
                d_[k + 1] = old_u1 - m * new_u1;
                if (k + 2 < n_) u1_[k + 1] = old_u2 - m * new_u2;
            }
        }
        for (std::size_t k = 0; k < n_; ++k)
            if (d_[k] == 0.0) d_[k] = std::numeric_limits<double>::min();
    }

    void solve(std::vector<double>& rhs) const {
        for (std::size_t k = 0; k + 1 < n_; ++k) {
            if (swapped_[k]) std::swap(rhs[k], rhs[k + 1]);
            rhs[k + 1] -= mult_[k] * rhs[k];
        }
        for (std::size_t i = n_; i-- > 0;) {
            double v = rhs[i];
            if (i + 1 < n_) v -= u1_[i] * rhs[i + 1];
            if (i + 2 < n_) v -= u2_[i] * rhs[i + 2];
            rhs[i] = v / d_[i];
        }
    }

private:
    std::size_t n_;
    std::vector<double> d_, u1_, u2_, mult_;
    std::vector<unsigned char> swapped_;
};

/// Solve the bordered system
///   [ A  p ] [y ]   [b]
///   [ q' r ] [mu] = [s]
/// with A tridiagonal, by block (Schur) elimination plus one pass of
/// iterative refinement in the full system. The refinement matters: A is
/// allowed to be nearly singular (neutral translation mode) as long as the
/// bordered matrix is well conditioned.
struct BorderedSolution {
    std::vector<double> y;
    double mu = 0.0;
};

inline BorderedSolution solve_bordered_tridiagonal(
    const std::vector<double>& sub, const std::vector<double>& diag, const std::vector<double>& sup,
    const std::vector<double>& col, const std::vector<double>& row, double corner,
    const std::vector<double>& rhs, double rhs_last) {
    const std::size_t n = diag.size();
    TridiagonalLU lu(sub, diag, sup);

    auto apply_A = [&](const std::vector<double>& x, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = diag[i] * x[i];
            if (i > 0) v += sub[i] * x[i - 1];
            if (i + 1 < n) v += sup[i] * x[i + 1];
            out[i] = v;
        }
    };
    auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
        return s;
    };

    std::vector<double> y1 = rhs, y2 = col;
    lu.solve(y1);
    lu.solve(y2);
    double denom = corner - dot(row, y2);
    if (denom == 0.0) throw std::runtime_error("solve_bordered_tridiagonal: singular bordered system");
    double mu = (rhs_last - dot(row, y1)) / denom;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = y1[i] - mu * y2[i];

    // one refinement pass on the full (n+1)-system
    std::vector<double> Ay(n);
    apply_A(y, Ay);
    std::vector<double> res(n);
    for (std::size_t i = 0; i < n; ++i) res[i] = rhs[i] - Ay[i] - col[i] * mu;
    double res_last = rhs_last - dot(row, y) - corner * mu;
    std::vector<double> e1 = res;
    lu.solve(e1);
    double dmu = (res_last - dot(row, e1)) / denom;
    for (std::size_t i = 0; i < n; ++i) y[i] += e1[i] - dmu * y2[i];
    mu += dmu;

    return {std::move(y), mu};
}

/// Number of eigenvalues of the symmetric tridiagonal (diag, off) strictly
/// below x (Sturm count via the LDL^T recurrence).
inline std::size_t sturm_count_below(const std::vector<double>& diag,
                                     const std::vector<double>& off, double x) {
    const std::size_t n = diag.size();
    std::size_t cnt = 0;
    double q = diag[0] - x;
    if (q < 0) ++cnt;
    for (std::size_t i = 1; i < n; ++i) {
        if (q == 0.0) q = std::numeric_limits<double>::min();
        q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        if (q < 0) ++cnt;
    }
    return cnt;
}

/// m-th smallest eigenvalue (0-based) of a symmetric tridiagonal matrix by
/// Sturm bisection.
inline double symmetric_tridiagonal_eigenvalue(const std::vector<double>& diag,
                                               const std::vector<double>& off, std::size_t m) {
    const std::size_t n = diag.size();
    if (m >= n) throw std::invalid_argument("symmetric_tridiagonal_eigenvalue: index out of range");
    double lo = diag[0], hi = diag[0];
    for (std::size_t i = 0; i < n; ++i) {
        double radius = 0.0;
        if (i > 0) radius += std::abs(off[i - 1]);
        if (i + 1 < n) radius += std::abs(off[i]);
        lo = std::min(lo, diag[i] - radius);
        hi = std::max(hi, diag[i] + radius);
    }
    double scale = std::max({std::abs(lo), std::abs(hi), 1.0});
    for (int it = 0; it < 200 && hi - lo > 1e-15 * scale; ++it) {
        double mid = 0.5 * (lo + hi);
        if (sturm_count_below(diag, off, mid) <= m)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Eigenvector of a symmetric tridiagonal matrix for a computed eigenvalue,
/// by shifted inverse iteration. Returns a unit-2-norm vector.
inline std::vector<double> symmetric_tridiagonal_eigenvector(const std::vector<double>& diag,
                                                             const std::vector<double>& off,
                                                             double lambda) {
    const std::size_t n = diag.size();
    std::vector<double> sub(n, 0.0), d(n), sup(n, 0.0);
    const double shift = lambda + 1e-12 * std::max(1.0, std::abs(lambda));
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = diag[i] - shift;
        if (i > 0) sub[i] = off[i - 1];
        if (i + 1 < n) sup[i] = off[i];
    }
    TridiagonalLU lu(sub, d, sup);
    std::vector<double> v(n);
    // deterministic pseudo-random start, avoids accidental orthogonality
    std::uint64_t s = 0x2545F4914F6CDD1Dull;
    for (std::size_t i = 0; i < n; ++i) {
        s ^= s << 13; s ^= s >> 7; s ^= s << 17;
        v[i] = static_cast<double>(s >> 11) / 9007199254740992.0 - 0.5;
    }
    for (int it = 0; it < 6; ++it) {
        lu.solve(v);
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw std::runtime_error("symmetric_tridiagonal_eigenvector: inverse iteration failed");
        for (double& x : v) x /= norm;
    }
    return v;
}

}
