#include "volfactor/grid.hpp"

#include <algorithm>

namespace volfactor {

PsiSurface::PsiSurface(const Grid2D& grid, double T, int time_stride)
    : grid_(grid), T_(T), stride_(time_stride), n_(grid.n_total()) {
    if (stride_ < 1 || grid_.n_t % stride_ != 0)
        throw DomainError("time stride must divide n_t");
    levels_.assign(grid_.n_t / stride_ + 1, std::vector<double>(std::size_t(n_) * n_, 0.0));
}

std::vector<double>& PsiSurface::level_by_time(int k_time) {
    if (k_time < 0 || k_time > grid_.n_t || k_time % stride_ != 0)
        throw OutOfDomain("time level not stored on this surface");
    return levels_[k_time / stride_];
}

const std::vector<double>& PsiSurface::level_by_time(int k_time) const {
    if (k_time < 0 || k_time > grid_.n_t || k_time % stride_ != 0)
        throw OutOfDomain("time level not stored on this surface");
    return levels_[k_time / stride_];
}

double PsiSurface::d1(int k, int i, int j) const {
    const auto& u = level_by_time(k);
    const double h = grid_.dz();
    auto v = [&](int a, int b) { return u[a * n_ + b]; };
    if (i == 0) return (-3 * v(0, j) + 4 * v(1, j) - v(2, j)) / (2 * h);
    if (i == n_ - 1) return (3 * v(i, j) - 4 * v(i - 1, j) + v(i - 2, j)) / (2 * h);
    return (v(i + 1, j) - v(i - 1, j)) / (2 * h);
}

double PsiSurface::d2(int k, int i, int j) const {
    const auto& u = level_by_time(k);
    const double h = grid_.dz();
    auto v = [&](int a, int b) { return u[a * n_ + b]; };
    if (j == 0) return (-3 * v(i, 0) + 4 * v(i, 1) - v(i, 2)) / (2 * h);
    if (j == n_ - 1) return (3 * v(i, j) - 4 * v(i, j - 1) + v(i, j - 2)) / (2 * h);
    return (v(i, j + 1) - v(i, j - 1)) / (2 * h);
}

double PsiSurface::d11(int k, int i, int j) const {
    const auto& u = level_by_time(k);
    const double h2 = grid_.dz() * grid_.dz();
    auto v = [&](int a, int b) { return u[a * n_ + b]; };
    const int c = std::clamp(i, 1, n_ - 2);
    return (v(c + 1, j) - 2 * v(c, j) + v(c - 1, j)) / h2;
}

double PsiSurface::d22(int k, int i, int j) const {
    const auto& u = level_by_time(k);
    const double h2 = grid_.dz() * grid_.dz();
    auto v = [&](int a, int b) { return u[a * n_ + b]; };
    const int c = std::clamp(j, 1, n_ - 2);
    return (v(i, c + 1) - 2 * v(i, c) + v(i, c - 1)) / h2;
}

double PsiSurface::d12(int k, int i, int j) const {
    const auto& u = level_by_time(k);
    const double h = grid_.dz();
    auto v = [&](int a, int b) { return u[a * n_ + b]; };
    const int ci = std::clamp(i, 1, n_ - 2);
    const int cj = std::clamp(j, 1, n_ - 2);
    return (v(ci + 1, cj + 1) - v(ci + 1, cj - 1) - v(ci - 1, cj + 1) + v(ci - 1, cj - 1))
           / (4 * h * h);
}

double PsiSurface::level_value(int s, double z1, double z2, double* g1, double* g2) const {
    const auto& u = levels_[s];
    const double h = grid_.dz();
    const double s1 = z1 / h, s2 = z2 / h;
    const int i = std::min(int(s1), n_ - 2);
    const int j = std::min(int(s2), n_ - 2);
    const double u1 = s1 - i, u2 = s2 - j;
    auto v = [&](int a, int b) { return u[a * n_ + b]; };
    const double val = (1 - u1) * (1 - u2) * v(i, j) + u1 * (1 - u2) * v(i + 1, j)
                     + (1 - u1) * u2 * v(i, j + 1) + u1 * u2 * v(i + 1, j + 1);
    if (g1) {
        // gradient of the bilinear patch; adequate for strategy evaluation
        *g1 = ((1 - u2) * (v(i + 1, j) - v(i, j)) + u2 * (v(i + 1, j + 1) - v(i, j + 1))) / h;
        *g2 = ((1 - u1) * (v(i, j + 1) - v(i, j)) + u1 * (v(i + 1, j + 1) - v(i + 1, j))) / h;
    }
    return val;
}

double PsiSurface::value(double t, double z1, double z2) const {
    return value_grad(t, z1, z2, nullptr, nullptr);
}

double PsiSurface::value_grad(double t, double z1, double z2, double* g1, double* g2) const {
    const double zmax = grid_.dz() * (n_ - 1);
    if (z1 < 0.0 || z2 < 0.0 || z1 > zmax || z2 > zmax)
        throw OutOfDomain("(z1, z2) outside the computational box");
    t = std::clamp(t, 0.0, T_);
    const double sdt = T_ * stride_ / double(grid_.n_t);
    const int nlev = int(levels_.size());
    int s = std::min(int(t / sdt), nlev - 2);
    const double w = (t - s * sdt) / sdt;
    double a1 = 0, a2 = 0, b1 = 0, b2 = 0;
    const double va = level_value(s, z1, z2, g1 ? &a1 : nullptr, g1 ? &a2 : nullptr);
    const double vb = level_value(s + 1, z1, z2, g1 ? &b1 : nullptr, g1 ? &b2 : nullptr);
    if (g1) {
        *g1 = (1 - w) * a1 + w * b1;
        *g2 = (1 - w) * a2 + w * b2;
    }
    return (1 - w) * va + w * vb;
}

} // namespace volfactor
