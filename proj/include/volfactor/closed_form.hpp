#pragma once

#include <utility>
#include <vector>

#include "volfactor/model.hpp"
#include "volfactor/time_fn.hpp"

namespace volfactor {

// Effective scalar parameters of the diagonal (z1 = z2 = z) value PDE
//   psi_t + (m - z) psi_z + beta^2 z psi_zz + 2 G kappa beta z psi_z
//         + (G lambda_sq / q) z psi = 0.
// One stock: kappa = rho * lambda_bar, lambda_sq = lambda_bar^2. The two-asset
// diagonal maps onto the same engine with its effective quantities.
struct DiagonalParams {
    double gamma;
    double q;
    double coupling;     // kappa
    double lambda_sq;
    double beta_bar;
    double m;
    double T;
};

DiagonalParams diagonal_params(const DistortionConstants& consts,
                               const ChackoViceira& model, double rho);

// Slope aggregates for the first-order source
//   fbar1(t) = (q G beta^2 A^2 / 2) s2 + G beta A s1 + (beta^2 A^2 / 2) s0.
// One stock: s2 = 2 rho (r1 + r2) - rho^2 r12, s1 = lambda_bar (r1 + r2), s0 = r12.
struct SourceSlopes {
    double s2 = 0.0, s1 = 0.0, s0 = 0.0;
};

SourceSlopes source_slopes(const CorrelationScheme& scheme,
                           const DistortionConstants& consts,
                           const ChackoViceira& model);

std::pair<double, double> riccati_roots(const DiagonalParams& par);
std::pair<double, double> riccati_roots(const DistortionConstants& consts,
                                        const ChackoViceira& model, double rho);

// A, B of psi0_tilde = exp(A z + B); closed form through the roots when the
// discriminant is positive, backward RK4 on the sample grid otherwise.
class RiccatiSolution {
public:
    RiccatiSolution(DiagonalParams par, const std::vector<double>& time_grid);

    double A(double t) const;
    double B(double t) const;
    double intA(double t) const;   // int_0^t A(u) du
    double a_plus() const { return a_plus_; }
    double a_minus() const { return a_minus_; }
    bool closed_form() const { return closed_form_; }
    const DiagonalParams& params() const { return par_; }
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& A_samples() const { return a_samples_; }

private:
    DiagonalParams par_;
    double a_plus_ = 0.0, a_minus_ = 0.0;
    bool closed_form_ = true;
    std::vector<double> grid_;
    std::vector<double> a_samples_;
    SampledTimeFn a_fn_, b_fn_, int_a_fn_;
};

RiccatiSolution solve_AB(const DistortionConstants& consts, const ChackoViceira& model,
                         double rho, const std::vector<double>& time_grid);
RiccatiSolution solve_AB(const DiagonalParams& par, const std::vector<double>& time_grid);

double fbar1(double t, const RiccatiSolution& riccati, const SourceSlopes& slopes);
double fbar1(double t, const RiccatiSolution& riccati, const CorrelationScheme& scheme,
             const DistortionConstants& consts);

// A1(t) = int_t^T exp(int_t^s (2 A beta^2 - 1 + 2 G kappa beta) du) fbar1(s) ds,
// B1(t) = m int_t^T A1(s) ds; composite quadrature on the riccati sample grid.
class CorrectionSolution {
public:
    CorrectionSolution() = default;
    CorrectionSolution(SampledTimeFn a1, SampledTimeFn b1, SourceSlopes slopes)
        : a1_(std::move(a1)), b1_(std::move(b1)), slopes_(slopes) {}

    double A1(double t) const { return a1_(t); }
    double B1(double t) const { return b1_(t); }
    const SourceSlopes& slopes() const { return slopes_; }

private:
    SampledTimeFn a1_, b1_;
    SourceSlopes slopes_;
};

CorrectionSolution solve_A1B1(const RiccatiSolution& riccati, const SourceSlopes& slopes);
CorrectionSolution solve_A1B1(const RiccatiSolution& riccati, const CorrelationScheme& scheme,
                              const DistortionConstants& consts);

double psi0_tilde(double t, double z, const RiccatiSolution& riccati);
double psi1_tilde(double t, double z, const RiccatiSolution& riccati,
                  const CorrectionSolution& correction);

// (x^p/p) (psi0_tilde + eps psi1_tilde [order>=1])^q on the diagonal.
double value_approx(const WealthState& state, int order, const RiccatiSolution& riccati,
                    const CorrectionSolution* correction, const DistortionConstants& consts,
                    double eps);

// pi0 = 2 x z (lambda_bar + rho q beta_bar A(t)) / ((1-p) sigma_bar)
double pi0_diagonal(const WealthState& state, const RiccatiSolution& riccati,
                    const DistortionConstants& consts, const ChackoViceira& model,
                    double rho);

class PsiSurface;

// pi0 = x / ((1-p) sigma) (lambda + rho q (beta1 psi_1 + beta2 psi_2) / psi)
double pi0_general(const WealthState& state, const PsiSurface& psi0,
                   const DistortionConstants& consts, const GeneralCoefficients& coeffs,
                   double rho);

} // namespace volfactor
