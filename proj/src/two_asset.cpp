#include "volfactor/two_asset.hpp"

#include <cmath>

namespace volfactor {

namespace {

double rw_check(const TwoAssetModel& m) {
    if (std::abs(m.rhoW12) >= 1.0)
        throw FullyCorrelatedStocks("|rhoW12| must be < 1");
    return 1.0 - m.rhoW12 * m.rhoW12;
}

} // namespace

DistortionConstants q_two_asset(double p, double rho1, double rho2, double rhoW12) {
    if (!(p < 1.0) || p == 0.0)
        throw InvalidExponent("power utility exponent requires p < 1, p != 0");
    if (std::abs(rhoW12) >= 1.0)
        throw FullyCorrelatedStocks("|rhoW12| must be < 1");
    const double gamma = p / (1.0 - p);
    const double r = (rho1 * rho1 + rho2 * rho2 - 2.0 * rho1 * rho2 * rhoW12)
                   / (1.0 - rhoW12 * rhoW12);
    const double denom = 1.0 + gamma * r;
    if (!(denom > 0.0))
        throw InvalidExponent("two-asset distortion exponent undefined: 1 + Gamma R <= 0");
    return {p, gamma, 1.0 / denom};
}

std::pair<double, double> effective_lambdas(const TwoAssetModel& m) {
    const double w = rw_check(m);
    const double l1 = m.lambda_bar1(), l2 = m.lambda_bar2();
    const double lam_sq = (l1 * l1 - 2.0 * l1 * l2 * m.rhoW12 + l2 * l2) / w;
    const double lam_bb = (l1 * (m.rho1 - m.rho2 * m.rhoW12) + l2 * (m.rho2 - m.rho1 * m.rhoW12)) / w;
    return {lam_sq, lam_bb};
}

DiagonalParams diagonal_params_two_asset(const TwoAssetModel& m, double p) {
    const auto consts = q_two_asset(p, m.rho1, m.rho2, m.rhoW12);
    const auto [lam_sq, lam_bb] = effective_lambdas(m);
    return {consts.gamma, consts.q, lam_bb, lam_sq, m.beta_bar, m.m, m.T};
}

SourceSlopes source_slopes_two_asset(const TwoAssetModel& m) {
    const double w = rw_check(m);
    const double c1 = m.rho1 - m.rho2 * m.rhoW12;
    const double c2 = m.rho2 - m.rho1 * m.rhoW12;
    const double s1sum = m.rho_slope[0][0] + m.rho_slope[0][1];
    const double s2sum = m.rho_slope[1][0] + m.rho_slope[1][1];
    const double S = c1 * s1sum + c2 * s2sum;
    const double Rrho = m.rho1 * m.rho1 + m.rho2 * m.rho2 - 2.0 * m.rho1 * m.rho2 * m.rhoW12;
    const double l1 = m.lambda_bar1(), l2 = m.lambda_bar2();
    return {(2.0 * S - Rrho * m.rho12B_slope) / w,
            ((l1 - l2 * m.rhoW12) * s1sum + (l2 - l1 * m.rhoW12) * s2sum) / w,
            m.rho12B_slope};
}

std::pair<double, double> pi_star_two_asset(const WealthState& state, const ValueDerivs& vd,
                                            const TwoAssetModel& m, double eps) {
    rw_check(m);
    if (!(vd.v_xx < 0.0))
        throw SingularHessian("maximizer needs v_xx < 0");
    const double s = state.z1 + state.z2;
    if (!(s > 0.0)) throw DomainError("z1 + z2 must be positive");
    const double sig[2] = {m.sigma_bar1 / std::sqrt(s), m.sigma_bar2 / std::sqrt(s)};
    const double mu[2] = {m.mu_bar1, m.mu_bar2};
    const double beta[2] = {m.beta_bar * std::sqrt(2.0 * state.z1),
                            m.beta_bar * std::sqrt(2.0 * state.z2)};
    const double rho_base[2] = {m.rho1, m.rho2};
    const double vxk[2] = {vd.v_x1, vd.v_x2};
    double pi[2];
    for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        double hedge_i = 0.0, hedge_j = 0.0;
        for (int k = 0; k < 2; ++k) {
            hedge_i += beta[k] * (rho_base[i] + m.rho_slope[i][k] * eps) * vxk[k];
            hedge_j += beta[k] * (rho_base[j] + m.rho_slope[j][k] * eps) * vxk[k];
        }
        pi[i] = (sig[j] * (sig[i] * hedge_i + mu[i] * vd.v_x)
                 - m.rhoW12 * sig[i] * (sig[j] * hedge_j + mu[j] * vd.v_x))
              / ((m.rhoW12 * m.rhoW12 - 1.0) * sig[i] * sig[i] * sig[j] * vd.v_xx);
    }
    return {pi[0], pi[1]};
}

namespace {

Pde2dCoefficients two_asset_coefficients(const TwoAssetModel& m, double p) {
    const double w = 1.0 - m.rhoW12 * m.rhoW12;
    const auto consts = q_two_asset(p, m.rho1, m.rho2, m.rhoW12);
    const double c1 = m.rho1 - m.rho2 * m.rhoW12;
    const double c2 = m.rho2 - m.rho1 * m.rhoW12;
    const double l1 = m.lambda_bar1(), l2 = m.lambda_bar2();
    const double bb = m.beta_bar;
    auto lam1 = [l1](double z1, double z2) { return l1 * std::sqrt(z1 + z2); };
    auto lam2 = [l2](double z1, double z2) { return l2 * std::sqrt(z1 + z2); };
    Pde2dCoefficients co;
    co.diff1 = [bb](double z) { return bb * bb * z; };
    co.diff2 = co.diff1;
    co.cross = [bb](double z1, double z2) { return 2.0 * bb * bb * std::sqrt(z1 * z2); };
    auto tilt = [=](double z1, double z2) {
        return consts.gamma * (lam1(z1, z2) * c1 + lam2(z1, z2) * c2) / w;
    };
    co.drift1 = [=, mm = m.m](double z1, double z2) {
        return (mm - z1) + tilt(z1, z2) * bb * std::sqrt(2.0 * z1);
    };
    co.drift2 = [=, mm = m.m](double z1, double z2) {
        return (mm - z2) + tilt(z1, z2) * bb * std::sqrt(2.0 * z2);
    };
    co.potential = [=](double z1, double z2) {
        const double a = lam1(z1, z2), b = lam2(z1, z2);
        return consts.gamma / (2.0 * consts.q) * (a * a - 2.0 * a * b * m.rhoW12 + b * b) / w;
    };
    return co;
}

} // namespace

PsiSurface solve_psi0_two_asset(const TwoAssetModel& m, double p, const Grid2D& grid,
                                const Pde2dOptions& opts, SolveDiagnostics* diag) {
    return solve_linear_2d(two_asset_coefficients(m, p), grid, m.T, 1.0, nullptr, opts, diag);
}

RiccatiSolution solve_CD_two_asset(const TwoAssetModel& m, double p,
                                   const std::vector<double>& time_grid) {
    return solve_AB(diagonal_params_two_asset(m, p), time_grid);
}

CorrectionSolution solve_C1D1_two_asset(const TwoAssetModel& m, double p,
                                        const RiccatiSolution& riccati) {
    (void)p;
    return solve_A1B1(riccati, source_slopes_two_asset(m));
}

std::pair<double, double> pi0_two_asset(const WealthState& state, const PsiSurface& psi0,
                                        const TwoAssetModel& m, double p) {
    rw_check(m);
    const double s = state.z1 + state.z2;
    if (!(s > 0.0)) throw DomainError("z1 + z2 must be positive");
    const auto consts = q_two_asset(p, m.rho1, m.rho2, m.rhoW12);
    double g1 = 0.0, g2 = 0.0;
    const double psi = psi0.value_grad(state.t, state.z1, state.z2, &g1, &g2);
    const double w = 1.0 - m.rhoW12 * m.rhoW12;
    const double sig[2] = {m.sigma_bar1 / std::sqrt(s), m.sigma_bar2 / std::sqrt(s)};
    const double lam[2] = {m.lambda_bar1() * std::sqrt(s), m.lambda_bar2() * std::sqrt(s)};
    const double beta[2] = {m.beta_bar * std::sqrt(2.0 * state.z1),
                            m.beta_bar * std::sqrt(2.0 * state.z2)};
    const double rho_base[2] = {m.rho1, m.rho2};
    const double g[2] = {g1, g2};
    double out[2];
    for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        double hedge = 0.0;
        for (int k = 0; k < 2; ++k)
            hedge += beta[k] * (rho_base[i] - rho_base[j] * m.rhoW12) * g[k];
        out[i] = state.x
               * (consts.q * hedge + psi * (lam[i] - lam[j] * m.rhoW12))
               / ((1.0 - p) * w * sig[i] * psi);
    }
    return {out[0], out[1]};
}

std::pair<double, double> pi0_two_asset_diagonal(const WealthState& state,
                                                 const RiccatiSolution& riccati,
                                                 const TwoAssetModel& m, double p) {
    rw_check(m);
    const double z = state.z1;
    const auto consts = q_two_asset(p, m.rho1, m.rho2, m.rhoW12);
    const double w = 1.0 - m.rhoW12 * m.rhoW12;
    const double C = riccati.A(state.t);
    const double lb[2] = {m.lambda_bar1(), m.lambda_bar2()};
    const double rho_base[2] = {m.rho1, m.rho2};
    const double sb[2] = {m.sigma_bar1, m.sigma_bar2};
    double out[2];
    for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        out[i] = 2.0 * state.x * z
               * (consts.q * C * m.beta_bar * (rho_base[i] - rho_base[j] * m.rhoW12)
                  + (lb[i] - lb[j] * m.rhoW12))
               / ((1.0 - p) * w * sb[i]);
    }
    return {out[0], out[1]};
}

double psi1_source_two_asset(const PsiPointDerivsLite& d, const TwoAssetModel& m, double p) {
    const double w = rw_check(m);
    const auto consts = q_two_asset(p, m.rho1, m.rho2, m.rhoW12);
    const double s = d.z1 + d.z2;
    const double lam[2] = {m.lambda_bar1() * std::sqrt(s), m.lambda_bar2() * std::sqrt(s)};
    const double beta[2] = {m.beta_bar * std::sqrt(2.0 * d.z1), m.beta_bar * std::sqrt(2.0 * d.z2)};
    const double c1 = m.rho1 - m.rho2 * m.rhoW12;
    const double c2 = m.rho2 - m.rho1 * m.rhoW12;
    const double Rrho = m.rho1 * m.rho1 + m.rho2 * m.rho2 - 2.0 * m.rho1 * m.rho2 * m.rhoW12;
    const double pk[2] = {d.p0_1, d.p0_2};
    double quad = 0.0, lin = 0.0;
    for (int k = 0; k < 2; ++k) {
        quad += beta[k] * beta[k] * (c1 * m.rho_slope[0][k] + c2 * m.rho_slope[1][k]) * pk[k] * pk[k];
        lin += ((lam[0] - lam[1] * m.rhoW12) * m.rho_slope[0][k]
                + (lam[1] - lam[0] * m.rhoW12) * m.rho_slope[1][k]) * beta[k] * pk[k];
    }
    const double s1sum = m.rho_slope[0][0] + m.rho_slope[0][1];
    const double s2sum = m.rho_slope[1][0] + m.rho_slope[1][1];
    quad += beta[0] * beta[1] * d.p0_1 * d.p0_2
          * (c1 * s1sum + c2 * s2sum - Rrho * m.rho12B_slope);
    return consts.q * consts.gamma / (w * d.p0) * quad
         + consts.gamma / w * lin
         + m.rho12B_slope * beta[0] * beta[1] * d.p0_12;
}

PsiSurface solve_psi1_two_asset(const TwoAssetModel& m, double p, const PsiSurface& psi0,
                                const Grid2D& grid, const Pde2dOptions& opts,
                                SolveDiagnostics* diag) {
    if (psi0.time_stride() != 1)
        throw DomainError("two-asset psi1 source needs a stride-1 psi0 surface");
    const auto co = two_asset_coefficients(m, p);
    const int n = psi0.n();
    LevelSource src = [&, n](int k, std::vector<double>& out) {
        out.resize(std::size_t(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                PsiPointDerivsLite d{psi0.node(k, i, j), psi0.d1(k, i, j), psi0.d2(k, i, j),
                                     psi0.d12(k, i, j), psi0.grid().z(i), psi0.grid().z(j)};
                out[i * n + j] = psi1_source_two_asset(d, m, p);
            }
    };
    return solve_linear_2d(co, grid, m.T, 0.0, src, opts, diag);
}

} // namespace volfactor
