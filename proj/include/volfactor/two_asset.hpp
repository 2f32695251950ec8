#pragma once

#include <utility>

#include "volfactor/closed_form.hpp"
#include "volfactor/grid.hpp"
#include "volfactor/model.hpp"
#include "volfactor/pde2d.hpp"

namespace volfactor {

// two stocks, two square-root factors; stocks correlated at rhoW12, stock i to
// factor k at rho_i + rho_slope[i][k] eps, factor-factor at 1 + rho12B_slope eps
struct TwoAssetModel {
    double mu_bar1 = 0.05, mu_bar2 = 0.03;
    double sigma_bar1 = 0.2, sigma_bar2 = 0.25;
    double m = 26.0, beta_bar = 5.0, T = 1.0;
    double rhoW12 = 0.0;
    double rho1 = 0.5, rho2 = 0.5;
    double rho_slope[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    double rho12B_slope = -1.0;

    double lambda_bar1() const { return mu_bar1 / sigma_bar1; }
    double lambda_bar2() const { return mu_bar2 / sigma_bar2; }
};

// q = (1 + Gamma (rho1^2 + rho2^2 - 2 rho1 rho2 rhoW) / (1 - rhoW^2))^-1
DistortionConstants q_two_asset(double p, double rho1, double rho2, double rhoW12);

// (lambda_sq_eff, lambda_bar_bar)
std::pair<double, double> effective_lambdas(const TwoAssetModel& model);

// the shared diagonal engine with the two-asset effective quantities
DiagonalParams diagonal_params_two_asset(const TwoAssetModel& model, double p);
SourceSlopes source_slopes_two_asset(const TwoAssetModel& model);

struct ValueDerivs {
    double v_x, v_xx, v_x1, v_x2;
};

// the displayed two-asset maximizer; eps sets rho_ik = rho_i + slope eps
std::pair<double, double> pi_star_two_asset(const WealthState& state, const ValueDerivs& vd,
                                            const TwoAssetModel& model, double eps = 0.0);

PsiSurface solve_psi0_two_asset(const TwoAssetModel& model, double p, const Grid2D& grid,
                                const Pde2dOptions& opts = {}, SolveDiagnostics* diag = nullptr);

// diagonal closed forms psi0 = exp(C z + D), psi1 = (C1 z + D1) psi0 through
// the shared Riccati/quadrature engine
RiccatiSolution solve_CD_two_asset(const TwoAssetModel& model, double p,
                                   const std::vector<double>& time_grid);
CorrectionSolution solve_C1D1_two_asset(const TwoAssetModel& model, double p,
                                        const RiccatiSolution& riccati);

// the displayed first-order approximation at the base correlations
std::pair<double, double> pi0_two_asset(const WealthState& state, const PsiSurface& psi0,
                                        const TwoAssetModel& model, double p);
// closed-form variant on the diagonal
std::pair<double, double> pi0_two_asset_diagonal(const WealthState& state,
                                                 const RiccatiSolution& riccati,
                                                 const TwoAssetModel& model, double p);

struct PsiPointDerivsLite {
    double p0, p0_1, p0_2, p0_12;
    double z1, z2;
};

// pointwise two-asset first-order source from psi0 values/derivatives
double psi1_source_two_asset(const PsiPointDerivsLite& d, const TwoAssetModel& model, double p);

PsiSurface solve_psi1_two_asset(const TwoAssetModel& model, double p, const PsiSurface& psi0,
                                const Grid2D& grid, const Pde2dOptions& opts = {},
                                SolveDiagnostics* diag = nullptr);

} // namespace volfactor
