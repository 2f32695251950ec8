#pragma once

#include <functional>
#include <vector>

#include "volfactor/closed_form.hpp"
#include "volfactor/model.hpp"

namespace volfactor {

// 1-D backward theta-scheme for the diagonal equation
//   u_t + (m - z) u_z + beta^2 z u_zz + 2 G kappa beta z u_z + (G lamsq/q) z u + src = 0,
// solved on [0, z_top + pad] with the reported region [0, z_top]. Used as an
// independent numerical oracle against the closed forms.
struct Pde1dOptions {
    double theta = 0.5;
    double pad = -1.0;   // < 0: pad = z_top
};

struct Pde1dResult {
    std::vector<double> z;                    // all nodes (padded)
    int n_inner;                              // nodes with z <= z_top
    std::vector<std::vector<double>> levels;  // levels[k] at t_k, k = 0..n_t
    double dt;
};

Pde1dResult solve_diagonal_1d(const DiagonalParams& par, double z_top, int n_z, int n_t,
                              double terminal,
                              const std::function<double(double t, double z)>& source,
                              const Pde1dOptions& opts = {});

Pde1dResult solve_psi0_tilde_1d(const DistortionConstants& consts, const ChackoViceira& model,
                                double rho, double z_top, int n_z, int n_t,
                                const Pde1dOptions& opts = {});

Pde1dResult solve_psi1_tilde_1d(const DistortionConstants& consts, const ChackoViceira& model,
                                const CorrelationScheme& scheme, const RiccatiSolution& riccati,
                                double z_top, int n_z, int n_t, const Pde1dOptions& opts = {});

} // namespace volfactor
