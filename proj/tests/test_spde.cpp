#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stonag/spde.hpp"

using namespace stonag;

namespace {

WaveProfile reference_wave(const GridSpec& grid, double a = 0.25) {
    NagumoParams p;
    p.a = a;
    return solve_deterministic_wave(p, grid);
}

SimConfig make_config(const GridSpec& grid, double sigma, double dt, double t_end,
                      std::uint64_t seed) {
    SimConfig cfg;
    cfg.params.a = 0.25;
    cfg.params.sigma = sigma;
    cfg.grid = grid;
    cfg.dt = dt;
    cfg.t_end = t_end;
    cfg.seed = seed;
    return cfg;
}

}

TEST_CASE("initial conditions: exact wave and perturbation norm") {
    GridSpec grid(20.0, 512);
    WaveProfile w = reference_wave(grid);

    PathState exact = initial_condition(InitialKind::exact_wave, w, grid);
    REQUIRE(norm_h1(exact.u - w.profile) == 0.0);

    PathState zero_amp = initial_condition(InitialKind::perturbed_wave, w, grid, 0.0, 1);
    REQUIRE(norm_h1(zero_amp.u - w.profile) == 0.0);

    const double amp = 0.01;
    PathState pert = initial_condition(InitialKind::perturbed_wave, w, grid, amp, 1);
    GridFunction bump = GridFunction::from_function(grid, [&](double x) {
        return std::sin(3.14159265358979323846 * x / grid.half_length) / std::cosh(x);
    });
    const double direct = amp * amp * (std::pow(norm_h1(bump), 2.0));
    const double measured = std::pow(norm_h1(pert.u - w.profile), 2.0);
    REQUIRE(std::abs(measured - direct) < 1e-10);

    std::string warning;
    initial_condition(InitialKind::perturbed_wave, w, grid, 0.01, 1, NagumoParams{}, &warning);
    REQUIRE(warning.empty());
    initial_condition(InitialKind::perturbed_wave, w, grid, 30.0, 1, NagumoParams{}, &warning);
    REQUIRE(!warning.empty());
}

TEST_CASE("rest states are fixed points of the deterministic stepper") {
    GridSpec grid(10.0, 128);
    SimConfig cfg = make_config(grid, 0.0, 0.01, 1.0, 1);
    NoiseSampler sampler = build_sampler(grid);

    for (double level : {0.0, 1.0}) {
        PathState st;
        st.u = GridFunction::from_function(grid, [&](double) { return level; });
        SpdeStepper stepper(cfg, sampler, make_stream(1, 0));
        GridFunction xi(grid);
        for (int k = 0; k < 10; ++k) {
            stepper.step(st, xi);
            for (std::size_t i = 0; i < grid.points; ++i)
                REQUIRE(std::abs(st.u[i] - level) < 1e-14 * (k + 1));
        }
    }
}

TEST_CASE("deterministic front translates without losing shape") {
    struct Level { std::size_t n; double dt; };
    for (const Level lv : {Level{512, 0.01}, Level{1024, 0.005}}) {
        GridSpec grid(20.0, lv.n);
        WaveProfile w = reference_wave(grid);
        SimConfig cfg = make_config(grid, 0.0, lv.dt, 10.0, 3);
        NoiseSampler sampler = build_sampler(grid);
        PathState st = initial_condition(InitialKind::exact_wave, w, grid);
        st = run_path(cfg, sampler, std::move(st));

        // min over shifts of the sup distance to the original profile
        auto shape_err = [&](double delta) {
            const GridFunction back = shift(st.u, delta);
            double sup = 0.0;
            for (std::size_t i = 0; i < grid.points; ++i) {
                if (std::abs(grid.x(i)) > grid.half_length - 2.0) continue;
                sup = std::max(sup, std::abs(back[i] - w.profile[i]));
            }
            return sup;
        };
        double lo = w.speed * 10.0 - 0.5, hi = w.speed * 10.0 + 0.5;
        for (int it = 0; it < 60; ++it) {
            const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            (shape_err(m1) < shape_err(m2) ? hi = m2 : lo = m1);
        }
        const double err = shape_err(0.5 * (lo + hi));
        const double dx2 = grid.spacing * grid.spacing;
        REQUIRE(err <= 5.0 * dx2 + 5.0 * lv.dt);
    }
}

TEST_CASE("comparison principle at sigma = 0") {
    GridSpec grid(20.0, 256);
    WaveProfile w = reference_wave(grid);
    SimConfig cfg = make_config(grid, 0.0, 0.01, 5.0, 4);
    NoiseSampler sampler = build_sampler(grid);

    PathState st = initial_condition(InitialKind::perturbed_wave, w, grid, 0.2, 2);
    for (std::size_t i = 0; i < grid.points; ++i) st.u[i] = std::clamp(st.u[i], 0.0, 1.0);
    const double slack = 10.0 * grid.spacing * grid.spacing;
    st = run_path(cfg, sampler, std::move(st), [&](const PathState& s, const GridFunction&) {
        for (std::size_t i = 0; i < grid.points; ++i) {
            REQUIRE(s.u[i] >= -slack);
            REQUIRE(s.u[i] <= 1.0 + slack);
        }
    });
}

TEST_CASE("run_path bookkeeping and determinism") {
    GridSpec grid(10.0, 128);
    WaveProfile w = reference_wave(grid);
    NoiseSampler sampler = build_sampler(grid);

    SimConfig cfg0 = make_config(grid, 0.05, 0.01, 0.0, 7);
    PathState st0 = initial_condition(InitialKind::exact_wave, w, grid);
    PathState done = run_path(cfg0, sampler, st0);
    REQUIRE(done.t == 0.0);
    REQUIRE(done.increments_consumed == 0);
    for (std::size_t i = 0; i < grid.points; ++i) REQUIRE(done.u[i] == st0.u[i]);

    SimConfig cfg = make_config(grid, 0.05, 0.03, 1.0, 7);
    std::size_t calls = 0;
    PathState a = run_path(cfg, sampler, st0, [&](const PathState&, const GridFunction&) { ++calls; });
    REQUIRE(calls == static_cast<std::size_t>(std::ceil(1.0 / 0.03)));

    PathState b = run_path(cfg, sampler, st0);
    REQUIRE(a.t == b.t);
    for (std::size_t i = 0; i < grid.points; ++i) REQUIRE(a.u[i] == b.u[i]);
}

TEST_CASE("consumed increments replay the sampler stream exactly") {
    GridSpec grid(10.0, 128);
    WaveProfile w = reference_wave(grid);
    NoiseSampler sampler = build_sampler(grid);
    SimConfig cfg = make_config(grid, 0.1, 0.02, 0.5, 11);

    std::vector<GridFunction> seen;
    PathState st = initial_condition(InitialKind::exact_wave, w, grid);
    run_path(cfg, sampler, st, [&](const PathState&, const GridFunction& xi) { seen.push_back(xi); });

    NoiseStream replay(sampler, make_stream(cfg.seed, 0));
    GridFunction xi(grid);
    for (const GridFunction& s : seen) {
        replay.next(cfg.dt, xi);
        for (std::size_t i = 0; i < grid.points; ++i) REQUIRE(s[i] == xi[i]);
    }
}

TEST_CASE("one-path self-convergence is first order in dt") {
    GridSpec grid(20.0, 256);
    WaveProfile w = reference_wave(grid);
    NoiseSampler sampler = build_sampler(grid);
    const double T = 1.0;
    const double dt_fine = 0.005;

    double ratio_sum = 0.0;
    const int paths = 8;
    for (int pth = 0; pth < paths; ++pth) {
        // shared Brownian path: finest increments, coarser ones by summation
        NoiseStream stream(sampler, make_stream(1000 + pth, 0));
        const std::size_t fine_steps = static_cast<std::size_t>(T / dt_fine);
        std::vector<GridFunction> fine(fine_steps, GridFunction(grid));
        for (auto& xi : fine) stream.next(dt_fine, xi);

        auto run_level = [&](int coarsen) {
            SimConfig cfg = make_config(grid, 0.1, dt_fine * coarsen, T, 0);
            SpdeStepper stepper(cfg, sampler, make_stream(0, 0));
            PathState st = initial_condition(InitialKind::exact_wave, w, grid);
            for (std::size_t k = 0; k < fine_steps; k += coarsen) {
                GridFunction xi(grid);
                for (int j = 0; j < coarsen; ++j)
                    for (std::size_t i = 0; i < grid.points; ++i) xi[i] += fine[k + j][i];
                stepper.step_with_increment(st, xi);
            }
            return st.u;
        };
        const GridFunction u4 = run_level(4), u2 = run_level(2), u1 = run_level(1);
        const double d1 = norm_l2(u4 - u2), d2 = norm_l2(u2 - u1);
        ratio_sum += d1 / d2;
    }
    const double mean_ratio = ratio_sum / paths;
    REQUIRE(mean_ratio == Catch::Approx(2.0).epsilon(0.3));
}

TEST_CASE("blow-up is flagged") {
    GridSpec grid(10.0, 128);
    SimConfig cfg = make_config(grid, 0.0, 10.0, 100.0, 1);
    NoiseSampler sampler = build_sampler(grid);
    PathState st;
    st.u = GridFunction::from_function(grid, [](double) { return 5.0; });
    SpdeStepper stepper(cfg, sampler, make_stream(1, 0));
    GridFunction xi(grid);
    bool threw = false;
    try {
        for (int k = 0; k < 100; ++k) stepper.step(st, xi);
    } catch (const std::runtime_error&) {
        threw = true;
    }
    REQUIRE(threw);
}
