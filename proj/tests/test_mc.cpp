#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "volfactor/mc.hpp"
#include "volfactor/pde2d.hpp"

using namespace volfactor;

namespace {

std::vector<double> tgrid(double T = 1.0, int n = 1601) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = T * i / double(n - 1);
    return g;
}

SimConfig small_config(long paths = 20000, int steps = 200, std::uint64_t seed = 42) {
    SimConfig c;
    c.n_paths = paths;
    c.n_steps = steps;
    c.seed = seed;
    c.scheme = CorrelationScheme{0.5, 0.0, -0.5, -1.0, 0.1};
    c.antithetic = true;
    return c;
}

} // namespace

TEST_CASE("path rng: determinism and moments") {
    PathRng a(7, 123), b(7, 123), c(7, 124);
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal();
        CHECK(x == b.normal());
    }
    double s = 0, ss = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = c.normal();
        s += x;
        ss += x * x;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(ss / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("fully correlated factors move in lockstep from a diagonal start") {
    SimConfig c = small_config(16, 50);
    c.scheme.eps = 0.0;
    const ModelInstance model{ChackoViceira{}};
    const auto b = simulate_factor_paths(model, c.scheme, c, 10.0, 10.0);
    for (int p = 0; p < b.n_paths; ++p)
        for (int k = 0; k <= b.n_steps; ++k)
            CHECK(std::abs(b.z1_at(p, k) - b.z2_at(p, k)) < 1e-9);
}

TEST_CASE("deterministic factor when the vol-of-vol vanishes") {
    ChackoViceira m;
    m.beta_bar = 0.0;
    SimConfig c = small_config(8, 2000);
    const auto b = simulate_factor_paths(ModelInstance{m}, c.scheme, c, 10.0, 10.0);
    const double analytic = m.m + (10.0 - m.m) * std::exp(-1.0);
    for (int p = 0; p < b.n_paths; ++p)
        CHECK(b.z1_at(p, b.n_steps) == doctest::Approx(analytic).epsilon(1e-3));
}

TEST_CASE("factor terminal mean against the mean-reverting closed form") {
    SimConfig c = small_config(20000, 100);
    const ChackoViceira m;
    const auto b = simulate_factor_paths(ModelInstance{m}, c.scheme, c, 10.0, 10.0);
    double s = 0, ss = 0;
    for (int p = 0; p < b.n_paths; ++p) {
        const double v = b.z1_at(p, b.n_steps);
        s += v;
        ss += v * v;
    }
    const double mean = s / b.n_paths;
    const double se = std::sqrt((ss / b.n_paths - mean * mean) / b.n_paths);
    const double analytic = m.m + (10.0 - m.m) * std::exp(-1.0);
    CHECK(std::abs(mean - analytic) < 3 * se + 0.05);   // 3 se plus O(dt) euler allowance
}

TEST_CASE("expected utility: degenerate cases") {
    const ModelInstance model{ChackoViceira{}};
    const auto consts = distortion_constants(-1.0, 0.5);
    SimConfig c = small_config(1000, 10);
    WealthState init{0.0, 2.0, 10.0, 10.0};

    const auto zero = estimate_expected_utility(model, consts, [](const WealthState&) {
        return 0.0;
    }, c, init);
    CHECK(zero.mean == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(zero.std_error == 0.0);

    WealthState at_T{1.0, 2.0, 10.0, 10.0};
    const auto terminal = estimate_expected_utility(model, consts, [](const WealthState&) {
        return 1.0;
    }, c, at_T);
    CHECK(terminal.mean == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(terminal.std_error == 0.0);
}

TEST_CASE("expected utility under pi0 matches the closed-form value at eps = 0") {
    const ChackoViceira m;
    const auto consts = distortion_constants(-1.0, 0.5);
    const auto ric = solve_AB(consts, m, 0.5, tgrid());
    SimConfig c = small_config(40000, 250);
    c.scheme.eps = 0.0;
    Strategy strat = [&](const WealthState& s) {
        return pi0_diagonal(s, ric, consts, m, 0.5);
    };
    WealthState init{0.0, 1.0, 10.0, 10.0};
    const auto est = estimate_expected_utility(ModelInstance{m}, consts, strat, c, init);
    const double closed = -std::pow(psi0_tilde(0.0, 10.0, ric), consts.q);
    CHECK(std::abs(est.mean - closed) < 3 * est.std_error);
}

TEST_CASE("blow-up strategies raise NonFiniteUtility") {
    const ModelInstance model{ChackoViceira{}};
    const auto consts = distortion_constants(-1.0, 0.5);
    SimConfig c = small_config(64, 20);
    Strategy bad = [](const WealthState& s) { return s.x * 1e200; };
    CHECK_THROWS_AS(estimate_expected_utility(model, consts, bad, c, {0.0, 1.0, 10.0, 10.0}),
                    NonFiniteUtility);
}

TEST_CASE("feynman-kac estimator") {
    const ChackoViceira m;
    const auto consts = distortion_constants(-1.0, 0.5);
    const ModelInstance model{m};
    SimConfig c = small_config(40000, 250);

    SUBCASE("empty integral at t = T") {
        const auto est = feynman_kac_psi0(model, consts, 0.5, m.T, 5.0, 5.0, c);
        CHECK(est.mean == 1.0);
        CHECK(est.std_error == 0.0);
    }
    SUBCASE("zero sharpe ratio gives exactly one") {
        ChackoViceira m0 = m;
        m0.mu_bar = 0.0;
        const auto est = feynman_kac_psi0(ModelInstance{m0}, consts, 0.5, 0.0, 5.0, 5.0, c);
        CHECK(est.mean == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("diagonal start against the closed form") {
        const auto ric = solve_AB(consts, m, 0.5, tgrid());
        const auto est = feynman_kac_psi0(model, consts, 0.5, 0.0, 10.0, 10.0, c);
        CHECK(std::abs(est.mean - psi0_tilde(0.0, 10.0, ric)) < 3 * est.std_error);
    }
}

TEST_CASE("identical seeds are bit-identical across thread counts") {
    const ModelInstance model{ChackoViceira{}};
    const auto consts = distortion_constants(-1.0, 0.5);
    SimConfig c = small_config(6000, 50);
    Strategy strat = [](const WealthState& s) { return 0.02 * s.x * (s.z1 + s.z2); };
    WealthState init{0.0, 1.0, 10.0, 10.0};
    setenv("VOLFACTOR_THREADS", "1", 1);
    const auto a = estimate_expected_utility(model, consts, strat, c, init);
    setenv("VOLFACTOR_THREADS", "2", 1);
    const auto b = estimate_expected_utility(model, consts, strat, c, init);
    setenv("VOLFACTOR_THREADS", "3", 1);
    const auto d = estimate_expected_utility(model, consts, strat, c, init);
    unsetenv("VOLFACTOR_THREADS");
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    CHECK(a.mean == d.mean);
}

TEST_CASE("antithetic pairs cut the variance of a monotone payoff") {
    ChackoViceira m;
    m.mu_bar = 0.0;   // lambda = 0 control case
    const ModelInstance model{m};
    const auto consts = distortion_constants(-1.0, 0.5);
    Strategy strat = [](const WealthState& s) { return 0.02 * s.x * (s.z1 + s.z2); };
    WealthState init{0.0, 1.0, 10.0, 10.0};
    SimConfig plain = small_config(30000, 50);
    plain.antithetic = false;
    SimConfig anti = plain;
    anti.antithetic = true;
    const auto ep = estimate_expected_utility(model, consts, strat, plain, init);
    const auto ea = estimate_expected_utility(model, consts, strat, anti, init);
    // same total path budget: se_anti^2 accounts for pair averaging
    const double var_plain = ep.std_error * ep.std_error * ep.n_effective;
    const double var_anti = 2.0 * ea.std_error * ea.std_error * ea.n_effective;
    CHECK(var_anti / var_plain < 0.6);
}

TEST_CASE("weak convergence: doubling the steps moves the estimate within noise") {
    const ChackoViceira m;
    const auto consts = distortion_constants(-1.0, 0.5);
    const auto ric = solve_AB(consts, m, 0.5, tgrid());
    Strategy strat = [&](const WealthState& s) { return pi0_diagonal(s, ric, consts, m, 0.5); };
    WealthState init{0.0, 1.0, 10.0, 10.0};
    SimConfig c1 = small_config(20000, 125);
    SimConfig c2 = small_config(20000, 250);
    const auto a = estimate_expected_utility(ModelInstance{m}, consts, strat, c1, init);
    const auto b = estimate_expected_utility(ModelInstance{m}, consts, strat, c2, init);
    CHECK(std::abs(a.mean - b.mean) < 2 * std::max(a.std_error, b.std_error) + 1e-3);
}

TEST_CASE("near-optimality gap at eps = 0 sits inside the noise band") {
    const ChackoViceira m;
    const auto consts = distortion_constants(-1.0, 0.5);
    const auto coeffs = make_coefficients(m);
    CorrelationScheme sc{0.5, 0.0, -0.5, -1.0, 0.0};
    Grid2D g{100.0, 41, 60, 1.75};
    const auto psi0 = solve_psi0_2d(coeffs, consts, sc.rho, g);
    const auto psif = solve_psi_full(coeffs, consts, sc, g);
    SimConfig c = small_config(20000, 100);
    c.scheme = sc;
    const auto gap = near_optimality_gap(ModelInstance{m}, sc, consts, psif, psi0, c,
                                         {0.0, 1.0, 10.0, 10.0});
    CHECK(gap.escaped_paths <= 20);   // within the 0.1% allowance
    CHECK(gap.gap >= -3.0 * gap.std_error);
    CHECK(std::abs(gap.gap) < 3.0 * gap.std_error + 2e-3);
}
