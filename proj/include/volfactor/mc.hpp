#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "volfactor/grid.hpp"
#include "volfactor/model.hpp"

namespace volfactor {

struct SimConfig {
    long n_paths = 100000;
    int n_steps = 500;
    std::uint64_t seed = 12345;
    CorrelationScheme scheme;
    bool antithetic = true;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n_effective = 0;
};

// counter-based per-path stream: splitmix64(seed, path) -> pcg32 -> Box-Muller
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path_index);
    double normal();
    double uniform();   // (0, 1)

private:
    std::uint32_t next_u32();
    std::uint64_t state_, inc_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// lower-triangular factor L with C = L L^T for the (W, B1, B2) correlation
// matrix; eigenvalue clipping admits the rank-deficient boundary (D = 0).
struct CorrFactor {
    double l[3][3];
    void apply(const double g[3], double out[3]) const;
};

CorrFactor correlation_factor(double rho1, double rho2, double rho12);

struct PathBundle {
    int n_paths = 0, n_steps = 0;
    double dt = 0.0;
    // row-major [path][step]; z at step edges (n_steps+1), w increments per step
    std::vector<double> z1, z2, w_inc;
    double z1_at(int p, int k) const { return z1[std::size_t(p) * (n_steps + 1) + k]; }
    double z2_at(int p, int k) const { return z2[std::size_t(p) * (n_steps + 1) + k]; }
    double w_at(int p, int k) const { return w_inc[std::size_t(p) * n_steps + k]; }
};

// full-truncation Euler for the square-root factors; test-scale (materializes paths)
PathBundle simulate_factor_paths(const ModelInstance& model, const CorrelationScheme& scheme,
                                 const SimConfig& config, double z1_0, double z2_0);

using Strategy = std::function<double(const WealthState&)>;

// wealth evolved in log space, d log X = (pi/X) mu dt - (pi/X)^2 sigma^2/2 dt + (pi/X) sigma dW
McEstimate estimate_expected_utility(const ModelInstance& model, const DistortionConstants& consts,
                                     const Strategy& strategy, const SimConfig& config,
                                     const WealthState& initial);
McEstimate estimate_expected_utility(const ModelInstance& model, const DistortionConstants& consts,
                                     const Strategy& strategy, const SimConfig& config,
                                     const WealthState& initial, long* escaped_paths);

// E-tilde[ exp((G/2q) int_t^T lambda^2 ds) ] under the fully correlated tilted dynamics
McEstimate feynman_kac_psi0(const ModelInstance& model, const DistortionConstants& consts,
                            double rho, double t, double z1, double z2, const SimConfig& config);

struct GapResult {
    double gap = 0.0;
    double std_error = 0.0;
    double v_pde = 0.0;
    McEstimate utility;
    long escaped_paths = 0;
};

GapResult near_optimality_gap(const ModelInstance& model, const CorrelationScheme& scheme,
                              const DistortionConstants& consts, const PsiSurface& psi_full,
                              const PsiSurface& psi0_surface, const SimConfig& config,
                              const WealthState& initial);

// worker cap: VOLFACTOR_THREADS, else hardware_concurrency
int worker_count();

} // namespace volfactor
