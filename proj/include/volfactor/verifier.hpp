#pragma once

#include <functional>
#include <vector>

#include "volfactor/closed_form.hpp"
#include "volfactor/grid.hpp"
#include "volfactor/model.hpp"

namespace volfactor {

// psi0/psi1 values and derivatives at one point, inputs to Phi and Theta^2
struct PsiPointDerivs {
    double p0, p0_1, p0_2, p0_12;
    double p1, p1_1, p1_2, p1_12;
    double beta1, beta2, lambda;
};

// the displayed second-order expansion coefficient Phi
double phi_term(const PsiPointDerivs& d, const DistortionConstants& consts,
                const CorrelationScheme& scheme);

// Theta^2 = q^2 rho^2 (psi1 sum beta_i psi0_i - psi0 sum beta_i psi1_i)^2
double theta_sq(const PsiPointDerivs& d, const DistortionConstants& consts,
                const CorrelationScheme& scheme);

PsiPointDerivs derivs_from_surfaces(const PsiSurface& psi0, const PsiSurface& psi1,
                                    int k_time, int i, int j,
                                    const GeneralCoefficients& coeffs);

// closed-form surrogates on the diagonal (psi_i = psi_z/2, psi_ij = psi_zz/4)
PsiPointDerivs derivs_from_closed(double t, double z, const RiccatiSolution& riccati,
                                  const CorrectionSolution& correction,
                                  const ChackoViceira& model);

struct MSample {
    PsiPointDerivs d;
    double t;
    double lambda_sq;
};

// M > sup |Phi + p Theta^2| / (2 (1-p) psi0^2 inf[1 + (G/2q) lambda^2 s]) x 1.5,
// s = T - t for 0<p<1, s = -t for p<0; floor 1e-8
double choose_M(const std::vector<MSample>& samples, const DistortionConstants& consts,
                const CorrelationScheme& scheme, double T);

// Q^pi applied to a scalar field by central differences; steps are absolute in
// (t, z), relative in x. Throws StepTooSmall when the second differences lose
// more than six digits to rounding at the requested steps.
struct QPoint {
    double t, x, z1, z2;
};
struct QSteps {
    double dt = 1e-3;
    double dx_rel = 1e-4;
    double dz = 1e-3;
};
using ScalarField = std::function<double(double t, double x, double z1, double z2)>;

double apply_Q(double pi_value, const ScalarField& v, const GeneralCoefficients& coeffs,
               const PerturbedCorrelations& pc, const QPoint& pt, const QSteps& steps);

// fourth-order grid-stencil residual of Q^{pi0}[(x^p/p)(psi0 + eps psi1)^q] / x^p
// at a grid node; the production path for the order regression
double grid_q_residual(const PsiSurface& psi0, const PsiSurface& psi1, double eps,
                       const DistortionConstants& consts, const GeneralCoefficients& coeffs,
                       const CorrelationScheme& scheme, int k_time, int i, int j,
                       bool zero_strategy = false);

struct ResidualOrder {
    std::vector<std::pair<double, double>> sup_by_eps;
    double noise_floor = 0.0;       // sup residual at eps = 0
    double fitted_order = 0.0;      // log-log slope over the trusted eps
    std::vector<double> trusted_eps;  // residual >= 3x floor; all eps when fewer than 2 qualify
};

ResidualOrder residual_order_regression(const std::vector<double>& eps_list,
                                        const PsiSurface& psi0, const PsiSurface& psi1,
                                        const DistortionConstants& consts,
                                        const GeneralCoefficients& coeffs,
                                        const CorrelationScheme& scheme,
                                        bool zero_strategy = false);

struct SubSuperPair {
    double M = 0.0;
    bool p_negative = true;   // p<0 uses M(-t); 0<p<1 uses M(T-t)
    double eps = 0.0;
    const PsiSurface* psi0 = nullptr;
    const PsiSurface* psi1 = nullptr;
};

struct SandwichResult {
    double violation_fraction = 0.0;
    long n_checked = 0;
    double max_violation = 0.0;   // worst |deviation| - slack
};

// pointwise v- <= v_pde <= v+ on the band |z1 - z2| <= band_frac * z_cap, z <= z_cap,
// compared through the distorted bases
SandwichResult sandwich_check(const SubSuperPair& pair, const PsiSurface& psi_full,
                              double band_frac = 0.2, double z_cap = -1.0);

// eps^2-coefficient comparison: numerically assembled residual/eps^2 vs the
// prediction (q/p) psi0^{q-1} Phi / (2 (1-p) psi0^2)
struct PhiComparison {
    double t, z;
    double assembled_c2;
    double phi_predicted;
};

std::vector<PhiComparison> phi_consistency(const PsiSurface& psi0, const PsiSurface& psi1,
                                           const DistortionConstants& consts,
                                           const GeneralCoefficients& coeffs,
                                           const CorrelationScheme& scheme);

} // namespace volfactor
