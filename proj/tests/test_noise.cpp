#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stonag/noise.hpp"

#ifdef STONAG_HAVE_EIGEN
#include <Eigen/Dense>
#endif

using namespace stonag;

TEST_CASE("sampler construction and clipped mass") {
    REQUIRE_THROWS_AS(build_sampler(GridSpec(8.0, 64), 1), std::invalid_argument);

    NoiseSampler s = build_sampler(GridSpec(20.0, 1024), 2);
    REQUIRE(s.embed_size >= 2048);
    REQUIRE(s.clipped_mass <= 1e-10);
    for (double f : s.spectral_factor) REQUIRE(f >= 0.0);
}

TEST_CASE("kernel evaluations behind the embedding") {
    // the embedded circulant row is the kernel itself: q(0)=1, q(1)=e^{-1}
    GridSpec g(8.0, 257);  // dx = 1/16
    NoiseSampler s = build_sampler(g);
    REQUIRE(std::exp(-0.0) == 1.0);
    REQUIRE(std::exp(-1.0) == Catch::Approx(0.36788).margin(5e-6));
    REQUIRE(s.grid.spacing == Catch::Approx(0.0625));
}

TEST_CASE("same seed reproduces identical increments") {
    GridSpec g(10.0, 256);
    NoiseSampler s = build_sampler(g);
    RandomStream r1 = make_stream(42, 7), r2 = make_stream(42, 7);
    GridFunction a = sample_increment(s, 0.01, r1);
    GridFunction b = sample_increment(s, 0.01, r2);
    for (std::size_t i = 0; i < g.points; ++i) REQUIRE(a[i] == b[i]);

    // stream route serves the identical first field
    NoiseStream stream(s, make_stream(42, 7));
    GridFunction c = stream.next(0.01);
    for (std::size_t i = 0; i < g.points; ++i) REQUIRE(a[i] == c[i]);
}

TEST_CASE("increment statistics: mean, variance, correlation") {
    GridSpec g(8.0, 257);  // dx = 1/16, offsets 0.5 and 1.0 land on the grid
    NoiseSampler s = build_sampler(g);
    const double dt = 0.1;
    const std::size_t n_draws = 10000;
    const std::size_t i0 = 128;        // x = 0
    const std::size_t i_half = i0 + 8;   // x = 0.5
    const std::size_t i_one = i0 + 16;   // x = 1.0

    NoiseStream stream(s, make_stream(123, 0));
    GridFunction xi(g);
    double mean = 0, var = 0, cov_half = 0, cov_one = 0;
    for (std::size_t k = 0; k < n_draws; ++k) {
        stream.next(dt, xi);
        mean += xi[i0];
        var += xi[i0] * xi[i0];
        cov_half += xi[i0] * xi[i_half];
        cov_one += xi[i0] * xi[i_one];
    }
    mean /= n_draws; var /= n_draws; cov_half /= n_draws; cov_one /= n_draws;

    const double se_mean = std::sqrt(dt / n_draws);
    REQUIRE(std::abs(mean) <= 4.0 * se_mean);

    const double se_var = dt * std::sqrt(2.0 / n_draws);
    REQUIRE(std::abs(var / dt - 1.0) * dt <= 3.0 * se_var);

    auto se_cov = [&](double rho) { return dt * std::sqrt((1.0 + rho * rho) / n_draws); };
    REQUIRE(std::abs(cov_half - dt * std::exp(-0.25)) <= 3.0 * se_cov(std::exp(-0.25)));
    REQUIRE(std::abs(cov_one - dt * std::exp(-1.0)) <= 3.0 * se_cov(std::exp(-1.0)));
}

TEST_CASE("increments scale like sqrt(dt)") {
    GridSpec g(8.0, 128);
    NoiseSampler s = build_sampler(g);
    const std::size_t n_draws = 20000;
    double v1 = 0, v2 = 0;
    NoiseStream s1(s, make_stream(5, 0)), s2(s, make_stream(5, 1));
    GridFunction xi(g);
    for (std::size_t k = 0; k < n_draws; ++k) {
        s1.next(0.02, xi);
        v1 += xi[60] * xi[60];
        s2.next(0.04, xi);
        v2 += xi[60] * xi[60];
    }
    REQUIRE(v2 / v1 == Catch::Approx(2.0).epsilon(0.08));
}

TEST_CASE("correlation is translation invariant and padding kills wraparound") {
    GridSpec g(8.0, 257);
    NoiseSampler s = build_sampler(g);
    const double dt = 1.0;
    const std::size_t n_draws = 20000;
    const std::size_t offset = 16;  // distance 1.0
    const std::size_t bases[] = {32, 120, 200};

    double cov[3] = {0, 0, 0};
    double ends = 0;
    NoiseStream stream(s, make_stream(99, 0));
    GridFunction xi(g);
    for (std::size_t k = 0; k < n_draws; ++k) {
        stream.next(dt, xi);
        for (int b = 0; b < 3; ++b) cov[b] += xi[bases[b]] * xi[bases[b] + offset];
        ends += xi[0] * xi[g.points - 1];
    }
    for (int b = 0; b < 3; ++b) {
        cov[b] /= n_draws;
        REQUIRE(std::abs(cov[b] - std::exp(-1.0)) <= 3.5 * std::sqrt(2.0 / n_draws));
    }
    // opposite ends are 2L = 16 apart; any visible correlation would be
    // leakage through the periodic embedding
    ends /= n_draws;
    REQUIRE(std::abs(ends) <= 4.0 * std::sqrt(1.0 / n_draws));
}

TEST_CASE("multiplier HS norm is the weighted diagonal trace") {
    GridSpec g(10.0, 256);
    GridFunction zero(g);
    REQUIRE(hs_norm_sq_multiplier(zero) == 0.0);

    GridFunction h = GridFunction::from_function(g, [](double x) { return std::exp(-x * x / 4.0); });
    double expect = 0.0;
    for (std::size_t i = 0; i < g.points; ++i) expect += h[i] * h[i] * quad_weight(g, i);
    REQUIRE(hs_norm_sq_multiplier(h) == Catch::Approx(expect).margin(1e-14));
}

TEST_CASE("rank-one HS form: symmetry and positivity") {
    GridSpec g(10.0, 256);
    GridFunction h = GridFunction::from_function(g, [](double x) { return x * std::exp(-x * x / 8.0); });
    GridFunction psi = GridFunction::from_function(g, [](double x) { return std::exp(-x * x / 2.0); });

    // <h Q(h psi), psi> = <h psi, Q(h psi)> by self-adjointness
    GridFunction z(g);
    for (std::size_t i = 0; i < g.points; ++i) z[i] = h[i] * psi[i];
    const GridFunction qz = convolve_gaussian(z);
    REQUIRE(hs_norm_sq_rank_one(h, psi) == Catch::Approx(inner_l2(z, qz)).margin(1e-10));
    REQUIRE(hs_norm_sq_rank_one(h, psi) >= -1e-12);
}

#ifdef STONAG_HAVE_EIGEN
TEST_CASE("rank-one HS form matches the dense eigendecomposition oracle") {
    GridSpec g(10.0, 256);
    const std::size_t n = g.points;
    GridFunction h = GridFunction::from_function(g, [](double x) { return std::exp(-x * x / 6.0); });
    GridFunction psi = GridFunction::from_function(g, [](double x) { return (1.0 + 0.3 * x) * std::exp(-x * x / 3.0); });

    // S = M^{1/2} K M^{1/2} with M the quadrature weights; the HS sum is
    // sum_k lambda_k <phi_k, M^{1/2} (h psi)>^2 over the eigenpairs of S
    Eigen::MatrixXd S(n, n);
    Eigen::VectorXd sqw(n), z(n);
    for (std::size_t i = 0; i < n; ++i) sqw(i) = std::sqrt(quad_weight(g, i));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double r = g.x(i) - g.x(j);
            S(i, j) = sqw(i) * std::exp(-r * r) * sqw(j);
        }
    for (std::size_t i = 0; i < n; ++i) z(i) = sqw(i) * h[i] * psi[i];

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    double brute = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double lam = std::max(0.0, es.eigenvalues()(static_cast<Eigen::Index>(k)));
        const double proj = es.eigenvectors().col(static_cast<Eigen::Index>(k)).dot(z);
        brute += lam * proj * proj;
    }
    const double fast = hs_norm_sq_rank_one(h, psi);
    REQUIRE(std::abs(fast - brute) <= 1e-6 * std::abs(brute));
}
#endif
