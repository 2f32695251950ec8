#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "volfactor/two_asset.hpp"

using namespace volfactor;

namespace {

std::vector<double> tgrid(double T = 1.0, int n = 1601) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = T * i / double(n - 1);
    return g;
}

TwoAssetModel single_stock_embedding() {
    // asset 2 disabled: its drift, base correlations and slopes all vanish
    TwoAssetModel m;
    m.mu_bar1 = 0.05;
    m.sigma_bar1 = 0.2;
    m.mu_bar2 = 0.0;
    m.sigma_bar2 = 0.25;
    m.rhoW12 = 0.0;
    m.rho1 = 0.5;
    m.rho2 = 0.0;
    m.rho_slope[0][0] = 0.0;     // stock-1 to factor-1 slope
    m.rho_slope[0][1] = -0.5;    // stock-1 to factor-2 slope
    m.rho_slope[1][0] = m.rho_slope[1][1] = 0.0;
    m.rho12B_slope = -1.0;
    return m;
}

} // namespace

TEST_CASE("two-asset distortion exponent") {
    CHECK(q_two_asset(-1.0, 0.5, 0.5, 0.0).q == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(q_two_asset(-1.0, 0.0, 0.0, 0.3).q == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(q_two_asset(-1.0, 0.5, 0.5, 1.0), FullyCorrelatedStocks);
    CHECK_THROWS_AS(q_two_asset(0.0, 0.5, 0.5, 0.0), InvalidExponent);
    // one-stock reduction
    CHECK(q_two_asset(-1.0, 0.5, 0.0, 0.0).q
          == doctest::Approx(distortion_constants(-1.0, 0.5).q).epsilon(1e-15));
}

TEST_CASE("effective lambdas") {
    TwoAssetModel m;
    m.mu_bar1 = m.mu_bar2 = 0.05;
    m.sigma_bar1 = m.sigma_bar2 = 0.2;
    m.rhoW12 = 0.0;
    m.rho1 = m.rho2 = 0.5;
    auto [lam_sq, lam_bb] = effective_lambdas(m);
    CHECK(lam_sq == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(lam_bb == doctest::Approx(0.25).epsilon(1e-15));

    // one-asset degeneration
    auto e = effective_lambdas(single_stock_embedding());
    CHECK(e.first == doctest::Approx(0.0625).epsilon(1e-15));
    CHECK(e.second == doctest::Approx(0.125).epsilon(1e-15));   // rho lambda_bar

    // equal stock-factor correlations: lam_bb = rho (l1 + l2) / (1 + rhoW)
    oracles::Lcg gen(3);
    for (int i = 0; i < 1000; ++i) {
        TwoAssetModel r;
        r.mu_bar1 = gen.uniform(0.01, 0.2);
        r.mu_bar2 = gen.uniform(0.01, 0.2);
        r.sigma_bar1 = gen.uniform(0.1, 0.5);
        r.sigma_bar2 = gen.uniform(0.1, 0.5);
        r.rhoW12 = gen.uniform(-0.9, 0.9);
        const double rho = gen.uniform(-0.9, 0.9);
        r.rho1 = r.rho2 = rho;
        const auto [sq, bb] = effective_lambdas(r);
        CHECK(bb == doctest::Approx(rho * (r.lambda_bar1() + r.lambda_bar2())
                                    / (1.0 + r.rhoW12)).epsilon(1e-10));
        CHECK(sq >= 0.0);
    }
}

TEST_CASE("two-asset maximizer") {
    TwoAssetModel m;
    m.rhoW12 = 0.0;
    m.rho1 = m.rho2 = 0.0;
    WealthState st{0.3, 2.0, 8.0, 8.0};
    ValueDerivs vd{1.0, -2.0, 0.0, 0.0};
    auto [p1, p2] = pi_star_two_asset(st, vd, m);
    const double s = st.z1 + st.z2;
    CHECK(p1 == doctest::Approx(-(m.mu_bar1 * s / (m.sigma_bar1 * m.sigma_bar1))
                                * vd.v_x / vd.v_xx).epsilon(1e-12));
    CHECK(p2 == doctest::Approx(-(m.mu_bar2 * s / (m.sigma_bar2 * m.sigma_bar2))
                                * vd.v_x / vd.v_xx).epsilon(1e-12));

    // symmetric inputs give a symmetric allocation
    TwoAssetModel sym;
    sym.mu_bar1 = sym.mu_bar2 = 0.04;
    sym.sigma_bar1 = sym.sigma_bar2 = 0.3;
    sym.rhoW12 = 0.4;
    sym.rho1 = sym.rho2 = 0.5;
    ValueDerivs vds{1.0, -1.5, 0.2, 0.2};
    auto [q1, q2] = pi_star_two_asset(st, vds, sym);
    CHECK(q1 == doctest::Approx(q2).epsilon(1e-13));

    CHECK_THROWS_AS(pi_star_two_asset(st, ValueDerivs{1.0, 0.5, 0.0, 0.0}, m),
                    SingularHessian);
}

TEST_CASE("maximizer first-order condition at random valid inputs") {
    oracles::Lcg gen(17);
    for (int trial = 0; trial < 200; ++trial) {
        TwoAssetModel m;
        m.mu_bar1 = gen.uniform(0.01, 0.1);
        m.mu_bar2 = gen.uniform(0.01, 0.1);
        m.sigma_bar1 = gen.uniform(0.15, 0.4);
        m.sigma_bar2 = gen.uniform(0.15, 0.4);
        m.rhoW12 = gen.uniform(-0.8, 0.8);
        m.rho1 = gen.uniform(-0.7, 0.7);
        m.rho2 = gen.uniform(-0.7, 0.7);
        WealthState st{0.0, 1.0, gen.uniform(1.0, 40.0), gen.uniform(1.0, 40.0)};
        ValueDerivs vd{gen.uniform(0.2, 2.0), gen.uniform(-3.0, -0.2),
                       gen.uniform(-0.5, 0.5), gen.uniform(-0.5, 0.5)};
        auto [p1, p2] = pi_star_two_asset(st, vd, m);
        // quadratic objective: sum mu_i pi_i v_x + 1/2 sum rho^W_ij pi_i pi_j s_i s_j v_xx
        //                      + sum_ik rho_ik pi_i s_i beta_k v_xk
        const double s = st.z1 + st.z2;
        const double sig[2] = {m.sigma_bar1 / std::sqrt(s), m.sigma_bar2 / std::sqrt(s)};
        const double mu[2] = {m.mu_bar1, m.mu_bar2};
        const double beta[2] = {m.beta_bar * std::sqrt(2 * st.z1),
                                m.beta_bar * std::sqrt(2 * st.z2)};
        const double rho[2] = {m.rho1, m.rho2};
        const double vxk[2] = {vd.v_x1, vd.v_x2};
        const double pi[2] = {p1, p2};
        double scale = 0.0;
        for (int i = 0; i < 2; ++i) {
            const int j = 1 - i;
            double grad = mu[i] * vd.v_x
                        + sig[i] * (pi[i] * sig[i] + m.rhoW12 * pi[j] * sig[j]) * vd.v_xx;
            for (int k = 0; k < 2; ++k) grad += rho[i] * sig[i] * beta[k] * vxk[k];
            scale = std::max({scale, std::abs(mu[i] * vd.v_x),
                              std::abs(pi[i] * sig[i] * sig[i] * vd.v_xx)});
            CHECK(std::abs(grad) <= 1e-10 * std::max(scale, 1.0));
        }
    }
}

TEST_CASE("diagonal engine equivalence and degeneration to one stock") {
    const auto m = single_stock_embedding();
    const auto ric2 = solve_CD_two_asset(m, -1.0, tgrid());
    const auto corr2 = solve_C1D1_two_asset(m, -1.0, ric2);

    const ChackoViceira one;
    const auto consts = distortion_constants(-1.0, 0.5);
    const CorrelationScheme scheme{0.5, 0.0, -0.5, -1.0, 0.1};
    const auto ric1 = solve_AB(consts, one, 0.5, tgrid());
    const auto corr1 = solve_A1B1(ric1, scheme, consts);

    for (int k = 0; k <= 40; ++k) {
        const double t = k / 40.0;
        CHECK(std::abs(ric2.A(t) - ric1.A(t)) <= 1e-8);
        CHECK(std::abs(ric2.B(t) - ric1.B(t)) <= 1e-8);
        CHECK(std::abs(corr2.A1(t) - corr1.A1(t)) <= 1e-8);
        CHECK(std::abs(corr2.B1(t) - corr1.B1(t)) <= 1e-8);
        for (double z : {0.0, 10.0, 60.0}) {
            CHECK(std::abs(psi0_tilde(t, z, ric2) - psi0_tilde(t, z, ric1)) <= 1e-8);
            CHECK(std::abs(psi1_tilde(t, z, ric2, corr2) - psi1_tilde(t, z, ric1, corr1))
                  <= 1e-8);
        }
    }
    for (double z : {1.0, 10.0, 50.0}) {
        WealthState st{0.25, 2.0, z, z};
        const auto [pa, pb] = pi0_two_asset_diagonal(st, ric2, m, -1.0);
        CHECK(std::abs(pa - pi0_diagonal(st, ric1, consts, one, 0.5)) <= 1e-8);
        CHECK(pb == doctest::Approx(0.0));
    }
}

TEST_CASE("two-asset psi0 surface: terminal value, trivial potential, diagonal closed form") {
    TwoAssetModel m;
    m.mu_bar1 = 0.05;
    m.mu_bar2 = 0.03;
    m.sigma_bar1 = 0.2;
    m.sigma_bar2 = 0.25;
    m.rhoW12 = 0.3;
    m.rho1 = 0.5;
    m.rho2 = 0.4;   // asymmetric stock-factor correlations
    Grid2D g{100.0, 81, 100, 1.75};
    const auto psi0 = solve_psi0_two_asset(m, -1.0, g);
    for (int i = 0; i < psi0.n(); i += 4)
        for (int j = 0; j < psi0.n(); j += 4) CHECK(psi0.node(g.n_t, i, j) == 1.0);

    // the diagonal restriction follows the shared Riccati engine with the
    // effective quantities; this pins the drift convention 2 G lambda_bb beta z
    const auto ric = solve_CD_two_asset(m, -1.0, tgrid());
    double sup = 0.0;
    for (int i = 0; i < psi0.n(); ++i) {
        const double z = g.z(i);
        if (z > g.z_max) break;
        const double cf = psi0_tilde(0.0, z, ric);
        sup = std::max(sup, std::abs(psi0.node(0, i, i) - cf) / cf);
    }
    CHECK(sup <= 1e-3);

    TwoAssetModel m0 = m;
    m0.mu_bar1 = m0.mu_bar2 = 0.0;
    Grid2D gs{50.0, 41, 40, 1.5};
    const auto flat = solve_psi0_two_asset(m0, -1.0, gs);
    for (int i = 0; i < flat.n(); i += 5)
        for (int j = 0; j < flat.n(); j += 5)
            CHECK(flat.node(0, i, j) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pi0 from a flat terminal surface and decoupling") {
    TwoAssetModel m;
    m.mu_bar1 = 0.05;
    m.mu_bar2 = 0.03;
    m.sigma_bar1 = 0.2;
    m.sigma_bar2 = 0.25;
    m.rhoW12 = 0.3;
    m.rho1 = 0.5;
    m.rho2 = 0.4;
    Grid2D g{60.0, 25, 10, 1.2};
    PsiSurface ones(g, m.T, 1);
    for (int k = 0; k <= g.n_t; ++k)
        for (auto& v : ones.level_by_time(k)) v = 1.0;

    WealthState st{m.T, 2.0, 9.0, 16.0};
    const double s = st.z1 + st.z2;
    const auto [p1, p2] = pi0_two_asset(st, ones, m, -1.0);
    const double lam1 = m.lambda_bar1() * std::sqrt(s), lam2 = m.lambda_bar2() * std::sqrt(s);
    const double w = 1 - m.rhoW12 * m.rhoW12;
    CHECK(p1 == doctest::Approx(st.x * (lam1 - lam2 * m.rhoW12)
                                / (2.0 * w * (m.sigma_bar1 / std::sqrt(s)))).epsilon(1e-12));
    CHECK(p2 == doctest::Approx(st.x * (lam2 - lam1 * m.rhoW12)
                                / (2.0 * w * (m.sigma_bar2 / std::sqrt(s)))).epsilon(1e-12));

    // uncorrelated case reduces to the Merton pair
    TwoAssetModel dec = m;
    dec.rhoW12 = 0.0;
    dec.rho1 = dec.rho2 = 0.0;
    const auto [d1, d2] = pi0_two_asset(st, ones, dec, -1.0);
    CHECK(d1 == doctest::Approx(st.x * m.mu_bar1 * s / (2.0 * m.sigma_bar1 * m.sigma_bar1))
                    .epsilon(1e-12));
    CHECK(d2 == doctest::Approx(st.x * m.mu_bar2 * s / (2.0 * m.sigma_bar2 * m.sigma_bar2))
                    .epsilon(1e-12));
}

TEST_CASE("two-asset first-order source") {
    TwoAssetModel m;
    m.rho1 = 0.5;
    m.rho2 = 0.4;
    m.rhoW12 = 0.3;
    m.rho_slope[0][0] = 0.1;
    m.rho_slope[0][1] = -0.3;
    m.rho_slope[1][0] = 0.2;
    m.rho_slope[1][1] = -0.1;
    m.rho12B_slope = -1.0;

    SUBCASE("no slopes, no source") {
        TwoAssetModel z = m;
        z.rho_slope[0][0] = z.rho_slope[0][1] = z.rho_slope[1][0] = z.rho_slope[1][1] = 0.0;
        z.rho12B_slope = 0.0;
        PsiPointDerivsLite d{0.8, 0.3, -0.2, 0.05, 9.0, 12.0};
        CHECK(psi1_source_two_asset(d, z, -1.0) == 0.0);
    }
    SUBCASE("constant psi0 kills every term") {
        PsiPointDerivsLite d{0.8, 0.0, 0.0, 0.0, 9.0, 12.0};
        CHECK(psi1_source_two_asset(d, m, -1.0) == 0.0);
    }
    SUBCASE("single-asset degeneration matches the one-stock source") {
        auto e = single_stock_embedding();
        const auto consts = distortion_constants(-1.0, 0.5);
        oracles::Lcg gen(29);
        for (int i = 0; i < 100; ++i) {
            PsiPointDerivsLite d{gen.uniform(0.3, 1.2), gen.uniform(-0.1, 0.1),
                                 gen.uniform(-0.1, 0.1), gen.uniform(-0.02, 0.02),
                                 gen.uniform(0.5, 60.0), gen.uniform(0.5, 60.0)};
            const double two = psi1_source_two_asset(d, e, -1.0);
            // displayed one-stock f1
            const double rho = 0.5, r1 = 0.0, r2 = -0.5, r12 = -1.0;
            const double b1 = 5.0 * std::sqrt(2 * d.z1), b2 = 5.0 * std::sqrt(2 * d.z2);
            const double lam = 0.25 * std::sqrt(d.z1 + d.z2);
            const double one = consts.q * consts.gamma * rho / d.p0
                                   * (b1 * b2 * d.p0_1 * d.p0_2 * (r1 - rho * r12 + r2)
                                      + b1 * b1 * r1 * d.p0_1 * d.p0_1
                                      + b2 * b2 * r2 * d.p0_2 * d.p0_2)
                             + consts.gamma * lam * (r1 * b1 * d.p0_1 + r2 * b2 * d.p0_2)
                             + r12 * b1 * b2 * d.p0_12;
            CHECK(two == doctest::Approx(one).epsilon(1e-12));
        }
    }
}

TEST_CASE("two-asset psi1 surface solves with a zero-slope sanity check") {
    TwoAssetModel m;
    m.rho1 = 0.5;
    m.rho2 = 0.4;
    m.rhoW12 = 0.3;
    m.rho_slope[0][1] = -0.5;
    m.rho12B_slope = -1.0;
    Grid2D g{50.0, 41, 40, 1.5};
    const auto psi0 = solve_psi0_two_asset(m, -1.0, g);
    const auto psi1 = solve_psi1_two_asset(m, -1.0, psi0, g);
    for (int i = 0; i < psi1.n(); i += 5)
        for (int j = 0; j < psi1.n(); j += 5) CHECK(psi1.node(g.n_t, i, j) == 0.0);
    CHECK(std::abs(psi1.node(0, 10, 10)) > 0.0);

    TwoAssetModel z = m;
    z.rho_slope[0][0] = z.rho_slope[0][1] = z.rho_slope[1][0] = z.rho_slope[1][1] = 0.0;
    z.rho12B_slope = 0.0;
    const auto none = solve_psi1_two_asset(z, -1.0, psi0, g);
    for (int i = 0; i < none.n(); i += 5)
        for (int j = 0; j < none.n(); j += 5)
            CHECK(std::abs(none.node(0, i, j)) < 1e-14);
}
