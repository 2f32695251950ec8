#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "volfactor/closed_form.hpp"
#include "volfactor/grid.hpp"
#include "volfactor/model.hpp"

namespace volfactor {

struct Pde2dOptions {
    double theta = 0.5;
    int time_stride = 1;
    // consistent O(dz^2) viscosity added where the cross stencil breaks
    // positivity; 0 disables (default, see diagnostics)
    double artificial_diffusion = 0.0;
};

struct SolveDiagnostics {
    long positivity_stencil_failures = 0;   // nodes where a_i < |c|/2
    double added_diffusion = 0.0;
    double min_value = 0.0;
    double max_value = 0.0;
};

// generic linear operator a1(z1) u_11 + a2(z2) u_22 + c(z1,z2) u_12
//   + b1(z1,z2) u_1 + b2(z1,z2) u_2 + V(z1,z2) u
struct Pde2dCoefficients {
    std::function<double(double)> diff1, diff2;
    std::function<double(double, double)> cross;
    std::function<double(double, double)> drift1, drift2;
    std::function<double(double, double)> potential;
};

using LevelSource = std::function<void(int k_time, std::vector<double>& out)>;

PsiSurface solve_linear_2d(const Pde2dCoefficients& co, const Grid2D& grid, double T,
                           double terminal, const LevelSource& source,
                           const Pde2dOptions& opts = {}, SolveDiagnostics* diag = nullptr);

// zeroth-order equation at the fully correlated base point (rho12 = 1)
PsiSurface solve_psi0_2d(const GeneralCoefficients& coeffs, const DistortionConstants& consts,
                         double rho, const Grid2D& grid, const Pde2dOptions& opts = {},
                         SolveDiagnostics* diag = nullptr);

// first-order correction: same operator, source f1 from the psi0 surface
PsiSurface solve_psi1_2d(const GeneralCoefficients& coeffs, const DistortionConstants& consts,
                         const CorrelationScheme& scheme, const PsiSurface& psi0,
                         const Grid2D& grid, const Pde2dOptions& opts = {},
                         SolveDiagnostics* diag = nullptr);

// fully nonlinear benchmark equation at the perturbed correlations; IMEX with
// the gradient bracket lagged plus one fixed-point re-correction per step
PsiSurface solve_psi_full(const GeneralCoefficients& coeffs, const DistortionConstants& consts,
                          const CorrelationScheme& scheme, const Grid2D& grid,
                          const Pde2dOptions& opts = {}, SolveDiagnostics* diag = nullptr);

// the displayed first-order source evaluated from a psi0 level
void f1_source_level(const GeneralCoefficients& coeffs, const DistortionConstants& consts,
                     const CorrelationScheme& scheme, const PsiSurface& psi0, int k_time,
                     std::vector<double>& out);

struct DiagonalErrorRow {
    double z, psi, psi0, psi0_eps_psi1, err0, err1;
};

// samples along (0, z, z) for z <= z_max (reported region)
std::vector<DiagonalErrorRow> diagonal_error_curves(const PsiSurface& psi_full,
                                                    const PsiSurface& psi0,
                                                    const PsiSurface& psi1, double eps);

} // namespace volfactor
