#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "stonag/fft.hpp"
#include "stonag/linalg.hpp"

using namespace stonag;

namespace {

// dense Gaussian elimination with partial pivoting, oracle for the
// structured solvers
std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(A[i][k]) > std::abs(A[piv][k])) piv = i;
        std::swap(A[k], A[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = A[i][k] / A[k][k];
            for (std::size_t j = k; j < n; ++j) A[i][j] -= m * A[k][j];
            b[i] -= m * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double v = b[i];
        for (std::size_t j = i + 1; j < n; ++j) v -= A[i][j] * x[j];
        x[i] = v / A[i][i];
    }
    return x;
}

}

TEST_CASE("Thomas solve matches dense elimination") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 5 + trial;
        std::vector<double> sub(n), dia(n), sup(n), rhs(n);
        std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            dia[i] = 4.0 + u(rng);
            sub[i] = u(rng);
            sup[i] = u(rng);
            rhs[i] = u(rng);
            A[i][i] = dia[i];
            if (i > 0) A[i][i - 1] = sub[i];
            if (i + 1 < n) A[i][i + 1] = sup[i];
        }
        const std::vector<double> expect = dense_solve(A, rhs);
        std::vector<double> got = rhs;
        solve_tridiagonal(sub, dia, sup, got);
        for (std::size_t i = 0; i < n; ++i) REQUIRE(got[i] == Catch::Approx(expect[i]).margin(1e-12));
    }
}

TEST_CASE("pivoted tridiagonal LU handles rows that need swapping") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 4 + trial % 9;
        std::vector<double> sub(n), dia(n), sup(n), rhs(n);
        std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            dia[i] = 0.3 * u(rng);  // weak diagonal forces pivoting
            sub[i] = u(rng);
            sup[i] = u(rng);
            rhs[i] = u(rng);
            A[i][i] = dia[i];
            if (i > 0) A[i][i - 1] = sub[i];
            if (i + 1 < n) A[i][i + 1] = sup[i];
        }
        const std::vector<double> expect = dense_solve(A, rhs);
        TridiagonalLU lu(sub, dia, sup);
        std::vector<double> got = rhs;
        lu.solve(got);
        for (std::size_t i = 0; i < n; ++i) REQUIRE(got[i] == Catch::Approx(expect[i]).margin(1e-9));
    }
}

TEST_CASE("bordered solver survives a nearly singular tridiagonal block") {
    const std::size_t n = 60;
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    // A = T - mu I with mu an eigenvalue-ish shift: near-singular block
    std::vector<double> sub(n, 1.0), dia(n), sup(n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        dia[i] = -2.0 + 1e-9 * u(rng);
    // smallest |eigenvalue| of the -2/1/1 Laplacian is ~ (pi/(n+1))^2 scale
    const double shift = -2.0 + 2.0 * std::cos(3.14159265358979323846 / (n + 1));
    for (std::size_t i = 0; i < n; ++i) dia[i] -= shift;

    std::vector<double> col(n), row(n), rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        col[i] = u(rng);
        row[i] = u(rng);
        rhs[i] = u(rng);
    }
    const double corner = 0.1;
    const double rhs_last = u(rng);

    BorderedSolution sol = solve_bordered_tridiagonal(sub, dia, sup, col, row, corner, rhs, rhs_last);

    std::vector<std::vector<double>> A(n + 1, std::vector<double>(n + 1, 0.0));
    std::vector<double> b(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        A[i][i] = dia[i];
        if (i > 0) A[i][i - 1] = sub[i];
        if (i + 1 < n) A[i][i + 1] = sup[i];
        A[i][n] = col[i];
        A[n][i] = row[i];
        b[i] = rhs[i];
    }
    A[n][n] = corner;
    b[n] = rhs_last;
    const std::vector<double> expect = dense_solve(A, b);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(sol.y[i] == Catch::Approx(expect[i]).margin(1e-7));
    REQUIRE(sol.mu == Catch::Approx(expect[n]).margin(1e-7));
}

TEST_CASE("Sturm bisection reproduces Laplacian eigenvalues") {
    // -2/1/1 tridiagonal of size n has eigenvalues -2 + 2 cos(k pi/(n+1))
    const std::size_t n = 200;
    std::vector<double> dia(n, -2.0), off(n - 1, 1.0);
    for (std::size_t m : {n - 1, n - 2, std::size_t(0)}) {
        const double got = symmetric_tridiagonal_eigenvalue(dia, off, m);
        const double k = static_cast<double>(n - m);
        const double expect = -2.0 + 2.0 * std::cos(k * 3.14159265358979323846 / (n + 1));
        REQUIRE(got == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("inverse iteration returns a matching eigenvector") {
    const std::size_t n = 120;
    std::vector<double> dia(n), off(n - 1, 1.0);
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (std::size_t i = 0; i < n; ++i) dia[i] = -2.0 + u(rng);

    const double lambda = symmetric_tridiagonal_eigenvalue(dia, off, n - 1);
    const std::vector<double> v = symmetric_tridiagonal_eigenvector(dia, off, lambda);

    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double tv = dia[i] * v[i];
        if (i > 0) tv += off[i - 1] * v[i - 1];
        if (i + 1 < n) tv += off[i] * v[i + 1];
        resid = std::max(resid, std::abs(tv - lambda * v[i]));
    }
    REQUIRE(resid < 1e-10);
}

TEST_CASE("radix-2 FFT round trip and known transform") {
    std::vector<std::complex<double>> a(64);
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& z : a) z = {u(rng), u(rng)};
    auto b = a;
    fft_radix2(b, -1);
    fft_radix2(b, +1);
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(b[i].real() / 64.0 == Catch::Approx(a[i].real()).margin(1e-12));
        REQUIRE(b[i].imag() / 64.0 == Catch::Approx(a[i].imag()).margin(1e-12));
    }

    // delta -> all ones
    std::vector<std::complex<double>> d(16, 0.0);
    d[0] = 1.0;
    fft_radix2(d, -1);
    for (auto& z : d) {
        REQUIRE(z.real() == Catch::Approx(1.0).margin(1e-14));
        REQUIRE(z.imag() == Catch::Approx(0.0).margin(1e-14));
    }
}

TEST_CASE("FFT rejects non power of two") {
    std::vector<std::complex<double>> a(63);
    REQUIRE_THROWS_AS(fft_radix2(a, -1), std::invalid_argument);
}
