#pragma once

#include <cmath>
#include <vector>

#include "volfactor/errors.hpp"

namespace volfactor {

// Uniform tensor grid on the padded box [0, pad_factor * z_max]^2. n_z nodes
// cover the reported region [0, z_max]; the pad uses the same spacing.
struct Grid2D {
    double z_max = 100.0;
    int n_z = 201;
    int n_t = 400;
    double pad_factor = 1.75;

    double dz() const { return z_max / double(n_z - 1); }
    int n_total() const { return int(std::lround((n_z - 1) * pad_factor)) + 1; }
    double z_pad_max() const { return dz() * (n_total() - 1); }
    double z(int i) const { return dz() * i; }
    double dt(double T) const { return T / double(n_t); }
};

// Gridded psi-type function of (t, z1, z2). Time levels may be stored with a
// stride; level 0 (t = 0) and the terminal level are always stored.
class PsiSurface {
public:
    PsiSurface() = default;
    PsiSurface(const Grid2D& grid, double T, int time_stride = 1);

    const Grid2D& grid() const { return grid_; }
    double horizon() const { return T_; }
    int time_stride() const { return stride_; }
    int stored_levels() const { return int(levels_.size()); }
    bool stores_level(int k_time) const { return k_time % stride_ == 0; }

    std::vector<double>& level_by_time(int k_time);
    const std::vector<double>& level_by_time(int k_time) const;
    double t_of(int k_time) const { return T_ * double(k_time) / double(grid_.n_t); }

    int n() const { return n_; }
    double node(int k_time, int i, int j) const { return level_by_time(k_time)[i * n_ + j]; }

    // central differences interior, second-order one-sided at edges
    double d1(int k_time, int i, int j) const;
    double d2(int k_time, int i, int j) const;
    double d11(int k_time, int i, int j) const;
    double d22(int k_time, int i, int j) const;
    double d12(int k_time, int i, int j) const;

    // bilinear in z, linear in t between stored levels; OutOfDomain outside the box
    double value(double t, double z1, double z2) const;
    // value plus bilinear interpolation of the node gradients
    double value_grad(double t, double z1, double z2, double* g1, double* g2) const;

    bool positive_type = true;   // psi-type surfaces stay > 0

private:
    double level_value(int s, double z1, double z2, double* g1, double* g2) const;

    Grid2D grid_;
    double T_ = 1.0;
    int stride_ = 1;
    int n_ = 0;
    std::vector<std::vector<double>> levels_;   // levels_[k_time / stride]
};

} // namespace volfactor
