#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "stonag/grid.hpp"

using namespace stonag;

namespace {

GridFunction random_decaying(const GridSpec& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GridFunction f(g);
    for (std::size_t i = 0; i < g.points; ++i) {
        const double x = g.x(i);
        f[i] = u(rng) * std::exp(-0.1 * x * x);
    }
    return f;
}

}

TEST_CASE("GridSpec validates its invariants") {
    REQUIRE_THROWS_AS(GridSpec(-1.0, 64), std::invalid_argument);
    REQUIRE_THROWS_AS(GridSpec(1.0, 8), std::invalid_argument);
    GridSpec g(10.0, 101);
    REQUIRE(g.spacing == Catch::Approx(0.2));
    REQUIRE(g.x(0) == Catch::Approx(-10.0));
    REQUIRE(g.x(100) == Catch::Approx(10.0));
}

TEST_CASE("inner product: zero, constants, Gaussian") {
    GridSpec g1(1.0, 201);
    GridFunction zero(g1);
    REQUIRE(inner_l2(zero, zero) == 0.0);

    GridFunction one = GridFunction::from_function(g1, [](double) { return 1.0; });
    REQUIRE(inner_l2(one, one) == Catch::Approx(2.0).margin(1e-12));

    // <e^{-x^2}, e^{-x^2}> = sqrt(pi/2) = 1.2533141373155003
    GridSpec g2(10.0, 2001);
    GridFunction gauss = GridFunction::from_function(g2, [](double x) { return std::exp(-x * x); });
    REQUIRE(inner_l2(gauss, gauss) == Catch::Approx(1.2533141373155003).margin(1e-6));
}

TEST_CASE("inner product symmetry is exact") {
    GridSpec g(5.0, 257);
    std::mt19937_64 rng(7);
    for (int t = 0; t < 10; ++t) {
        GridFunction u = random_decaying(g, rng), v = random_decaying(g, rng);
        REQUIRE(inner_l2(u, v) == inner_l2(v, u));
    }
}

TEST_CASE("inner product rejects mismatched grids") {
    GridFunction a{GridSpec(1.0, 64)}, b{GridSpec(2.0, 64)};
    REQUIRE_THROWS_AS(inner_l2(a, b), std::invalid_argument);
}

TEST_CASE("H1 norm of sin on [-pi, pi]") {
    GridSpec g(3.14159265358979323846, 4001);
    GridFunction s = GridFunction::from_function(g, [](double x) { return std::sin(x); });
    const double h1 = norm_h1(s);
    // int sin^2 + cos^2 = 2 pi
    REQUIRE(h1 * h1 == Catch::Approx(2.0 * 3.14159265358979323846).epsilon(0.02));
}

TEST_CASE("norm_h1 >= norm_l2 always") {
    GridSpec g(5.0, 129);
    std::mt19937_64 rng(8);
    for (int t = 0; t < 100; ++t) {
        GridFunction u = random_decaying(g, rng);
        REQUIRE(norm_h1(u) >= norm_l2(u));
    }
}

TEST_CASE("derivatives: constants, linear, convergence order") {
    GridSpec g(2.0, 129);
    GridFunction c = GridFunction::from_function(g, [](double) { return 3.5; });
    REQUIRE(max_abs(derivative(c)) < 1e-12);
    REQUIRE(max_abs(second_derivative(c)) < 1e-11);

    GridFunction lin = GridFunction::from_function(g, [](double x) { return x; });
    GridFunction dlin = derivative(lin);
    for (std::size_t i = 0; i < g.points; ++i) REQUIRE(dlin[i] == Catch::Approx(1.0).margin(1e-12));

    auto interior_error = [](std::size_t n) {
        GridSpec gr(2.0, n);
        GridFunction s = GridFunction::from_function(gr, [](double x) { return std::sin(x); });
        GridFunction ds = derivative(s);
        double err = 0.0;
        for (std::size_t i = 1; i + 1 < gr.points; ++i)
            err = std::max(err, std::abs(ds[i] - std::cos(gr.x(i))));
        return err;
    };
    const double e1 = interior_error(129), e2 = interior_error(257);
    REQUIRE(e1 / e2 == Catch::Approx(4.0).epsilon(0.15));

    auto interior_error2 = [](std::size_t n) {
        GridSpec gr(2.0, n);
        GridFunction s = GridFunction::from_function(gr, [](double x) { return std::sin(x); });
        GridFunction d2 = second_derivative(s);
        double err = 0.0;
        for (std::size_t i = 1; i + 1 < gr.points; ++i)
            err = std::max(err, std::abs(d2[i] + std::sin(gr.x(i))));
        return err;
    };
    REQUIRE(interior_error2(129) / interior_error2(257) == Catch::Approx(4.0).epsilon(0.15));
}

TEST_CASE("shift: identity, inverse composition, analytic translate") {
    GridSpec g(20.0, 2048);
    GridFunction front = GridFunction::from_function(g, [](double x) { return 0.5 * (1.0 - std::tanh(x)); });

    GridFunction same = shift(front, 0.0);
    for (std::size_t i = 0; i < g.points; ++i) REQUIRE(same[i] == Catch::Approx(front[i]).margin(1e-14));

    const double d = 0.37;
    GridFunction back = shift(shift(front, d), -d);
    const double dx3 = std::pow(g.spacing, 3.0);
    for (std::size_t i = 0; i < g.points; ++i)
        REQUIRE(std::abs(back[i] - front[i]) < 10.0 * dx3);

    GridFunction moved = shift(front, 0.5);
    double err = 0.0;
    for (std::size_t i = 0; i < g.points; ++i) {
        const double x = g.x(i);
        if (std::abs(x) > 18.0) continue;  // constant-extension zone
        err = std::max(err, std::abs(moved[i] - 0.5 * (1.0 - std::tanh(x + 0.5))));
    }
    REQUIRE(err < 1e-4);

    REQUIRE_THROWS_AS(shift(front, 11.0), std::invalid_argument);
}

TEST_CASE("Gaussian convolution: kernel reproduction, constant, linearity") {
    GridSpec g(10.0, 513);
    // spike of unit mass at the center
    GridFunction spike(g);
    const std::size_t mid = 256;
    spike[mid] = 1.0 / g.spacing;
    GridFunction qs = convolve_gaussian(spike);
    double err = 0.0;
    for (std::size_t i = 0; i < g.points; ++i) {
        const double r = g.x(i) - g.x(mid);
        err = std::max(err, std::abs(qs[i] - std::exp(-r * r)));
    }
    REQUIRE(err < 1e-6);

    GridSpec wide(30.0, 1024);
    GridFunction one = GridFunction::from_function(wide, [](double) { return 1.0; });
    GridFunction qone = convolve_gaussian(one);
    const double sqrt_pi = 1.7724538509055160273;
    for (std::size_t i = 0; i < wide.points; ++i) {
        if (std::abs(wide.x(i)) > 20.0) continue;
        REQUIRE(qone[i] == Catch::Approx(sqrt_pi).margin(1e-4));
    }

    std::mt19937_64 rng(9);
    GridFunction u = random_decaying(g, rng), v = random_decaying(g, rng);
    const double a = 1.7, b = -0.4;
    GridFunction w(g);
    for (std::size_t i = 0; i < g.points; ++i) w[i] = a * u[i] + b * v[i];
    GridFunction lhs = convolve_gaussian(w);
    GridFunction qu = convolve_gaussian(u), qv = convolve_gaussian(v);
    for (std::size_t i = 0; i < g.points; ++i)
        REQUIRE(lhs[i] == Catch::Approx(a * qu[i] + b * qv[i]).margin(1e-13));
}

TEST_CASE("direct and FFT convolution routes agree to 1e-10") {
    GridSpec g(15.0, 700);  // deliberately not a power of two
    std::mt19937_64 rng(10);
    GridFunction u = random_decaying(g, rng);
    GridFunction a = convolve_gaussian(u), b = convolve_gaussian_fft(u);
    for (std::size_t i = 0; i < g.points; ++i) REQUIRE(std::abs(a[i] - b[i]) < 1e-10);
}

TEST_CASE("Q is self-adjoint and positive semi-definite") {
    GridSpec g(12.0, 384);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        GridFunction u = random_decaying(g, rng), v = random_decaying(g, rng);
        const double lhs = inner_l2(convolve_gaussian(u), v);
        const double rhs = inner_l2(u, convolve_gaussian(v));
        REQUIRE(std::abs(lhs - rhs) <= 1e-10 * norm_l2(u) * norm_l2(v));
        REQUIRE(inner_l2(convolve_gaussian(u), u) >= -1e-10);
    }
}
