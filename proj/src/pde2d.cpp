#include "volfactor/pde2d.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace volfactor {

namespace {

struct Assembled {
    Eigen::SparseMatrix<double> L;
    long positivity_failures = 0;
    double added_diffusion = 0.0;
    double max_potential = 0.0;
};

Assembled assemble(const Pde2dCoefficients& co, const Grid2D& grid, double art_diff) {
    const int n = grid.n_total();
    const double h = grid.dz();
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) z[i] = grid.z(i);

    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> trips;
    trips.reserve(std::size_t(n) * n * 9);
    Assembled out;
    auto idx = [n](int i, int j) { return i * n + j; };

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int row = idx(i, j);
            const bool i_int = i > 0 && i < n - 1;
            const bool j_int = j > 0 && j < n - 1;
            const double b1 = co.drift1(z[i], z[j]);
            const double b2 = co.drift2(z[i], z[j]);
            double a1 = co.diff1(z[i]);
            double a2 = co.diff2(z[j]);
            const double c = co.cross(z[i], z[j]);
            // drift z1
            if (i == 0) {
                trips.emplace_back(row, idx(0, j), -3 * b1 / (2 * h));
                trips.emplace_back(row, idx(1, j), 4 * b1 / (2 * h));
                trips.emplace_back(row, idx(2, j), -b1 / (2 * h));
            } else if (i == n - 1) {
                trips.emplace_back(row, idx(n - 1, j), 3 * b1 / (2 * h));
                trips.emplace_back(row, idx(n - 2, j), -4 * b1 / (2 * h));
                trips.emplace_back(row, idx(n - 3, j), b1 / (2 * h));
            } else {
                trips.emplace_back(row, idx(i + 1, j), b1 / (2 * h));
                trips.emplace_back(row, idx(i - 1, j), -b1 / (2 * h));
            }
            // drift z2
            if (j == 0) {
                trips.emplace_back(row, idx(i, 0), -3 * b2 / (2 * h));
                trips.emplace_back(row, idx(i, 1), 4 * b2 / (2 * h));
                trips.emplace_back(row, idx(i, 2), -b2 / (2 * h));
            } else if (j == n - 1) {
                trips.emplace_back(row, idx(i, n - 1), 3 * b2 / (2 * h));
                trips.emplace_back(row, idx(i, n - 2), -4 * b2 / (2 * h));
                trips.emplace_back(row, idx(i, n - 3), b2 / (2 * h));
            } else {
                trips.emplace_back(row, idx(i, j + 1), b2 / (2 * h));
                trips.emplace_back(row, idx(i, j - 1), -b2 / (2 * h));
            }
            // cross derivative, centered; only where both directions interior;
            // the padded far boundary drops it (zero normal curvature closure)
            if (i_int && j_int && c != 0.0) {
                if (std::min(a1, a2) < std::abs(c) / 2) {
                    ++out.positivity_failures;
                    if (art_diff > 0.0) {
                        const double add = art_diff * h * h;
                        a1 += add;
                        a2 += add;
                        out.added_diffusion = std::max(out.added_diffusion, add);
                    }
                }
                const double w = c / (4 * h * h);
                trips.emplace_back(row, idx(i + 1, j + 1), w);
                trips.emplace_back(row, idx(i + 1, j - 1), -w);
                trips.emplace_back(row, idx(i - 1, j + 1), -w);
                trips.emplace_back(row, idx(i - 1, j - 1), w);
            }
            // axis diffusion; dropped in the boundary-normal direction at the far edge
            if (i_int) {
                const double w = a1 / (h * h);
                trips.emplace_back(row, idx(i + 1, j), w);
                trips.emplace_back(row, idx(i, j), -2 * w);
                trips.emplace_back(row, idx(i - 1, j), w);
            }
            if (j_int) {
                const double w = a2 / (h * h);
                trips.emplace_back(row, idx(i, j + 1), w);
                trips.emplace_back(row, idx(i, j), -2 * w);
                trips.emplace_back(row, idx(i, j - 1), w);
            }
            const double V = co.potential(z[i], z[j]);
            out.max_potential = std::max(out.max_potential, V);
            trips.emplace_back(row, idx(i, j), V);
        }
    }
    out.L.resize(n * n, n * n);
    out.L.setFromTriplets(trips.begin(), trips.end());
    return out;
}

class Stepper {
public:
    Stepper(const Pde2dCoefficients& co, const Grid2D& grid, double T,
            const Pde2dOptions& opts, SolveDiagnostics* diag)
        : grid_(grid), T_(T), opts_(opts), diag_(diag) {
        auto asm_ = assemble(co, grid, opts.artificial_diffusion);
        if (diag_) {
            diag_->positivity_stencil_failures = asm_.positivity_failures;
            diag_->added_diffusion = asm_.added_diffusion;
        }
        max_potential_ = asm_.max_potential;
        const int nn = asm_.L.rows();
        Eigen::SparseMatrix<double> I(nn, nn);
        I.setIdentity();
        const double dt = grid.dt(T);
        Eigen::SparseMatrix<double> Aimp = (I - opts.theta * dt * asm_.L).pruned();
        Bexp_ = (I + (1.0 - opts.theta) * dt * asm_.L).pruned();
        lu_.compute(Aimp);
        if (lu_.info() != Eigen::Success)
            throw StabilityFailure("2-D implicit factorization failed");
    }

    Eigen::VectorXd implicit_solve(const Eigen::VectorXd& rhs) const {
        Eigen::VectorXd u = lu_.solve(rhs);
        if (lu_.info() != Eigen::Success || !u.allFinite())
            throw StabilityFailure("2-D implicit solve failed");
        return u;
    }

    Eigen::VectorXd explicit_part(const Eigen::VectorXd& u) const {
        if (opts_.theta >= 1.0) return u;
        return Bexp_ * u;
    }

    double value_cap() const {
        return 2.0 * std::exp(std::max(0.0, max_potential_) * T_);
    }

private:
    Grid2D grid_;
    double T_;
    Pde2dOptions opts_;
    SolveDiagnostics* diag_;
    double max_potential_ = 0.0;
    Eigen::SparseMatrix<double> Bexp_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

void check_bounds(const Eigen::VectorXd& u, bool positive_type, double cap,
                  int k_time, SolveDiagnostics* diag) {
    const double lo = u.minCoeff(), hi = u.maxCoeff();
    if (diag) {
        diag->min_value = lo;
        diag->max_value = hi;
    }
    if (!u.allFinite())
        throw StabilityFailure("non-finite surface value at time level " + std::to_string(k_time));
    if (positive_type && (lo <= 0.0 || hi > cap))
        throw StabilityFailure("surface left (0, cap] at time level " + std::to_string(k_time)
                               + ": min " + std::to_string(lo) + " max " + std::to_string(hi));
}

} // namespace

PsiSurface solve_linear_2d(const Pde2dCoefficients& co, const Grid2D& grid, double T,
                           double terminal, const LevelSource& source,
                           const Pde2dOptions& opts, SolveDiagnostics* diag) {
    Stepper st(co, grid, T, opts, diag);
    const int n = grid.n_total();
    const int nn = n * n;
    const double dt = grid.dt(T);
    const double th = opts.theta;

    PsiSurface surf(grid, T, opts.time_stride);
    surf.positive_type = terminal > 0.0;
    Eigen::VectorXd u = Eigen::VectorXd::Constant(nn, terminal);
    std::copy_n(u.data(), nn, surf.level_by_time(grid.n_t).data());

    std::vector<double> s_new, s_old;
    if (source) {
        s_new.resize(nn);
        s_old.resize(nn);
        source(grid.n_t, s_old);
    }
    const double cap = st.value_cap();
    for (int k = grid.n_t - 1; k >= 0; --k) {
        Eigen::VectorXd rhs = st.explicit_part(u);
        if (source) {
            source(k, s_new);
            for (int a = 0; a < nn; ++a)
                rhs[a] += dt * (th * s_new[a] + (1 - th) * s_old[a]);
            std::swap(s_new, s_old);
        }
        u = st.implicit_solve(rhs);
        check_bounds(u, surf.positive_type, cap, k, diag);
        if (surf.stores_level(k))
            std::copy_n(u.data(), nn, surf.level_by_time(k).data());
    }
    return surf;
}

namespace {

Pde2dCoefficients base_coefficients(const GeneralCoefficients& coeffs,
                                    const DistortionConstants& consts,
                                    double rho1, double rho2, double rho12) {
    Pde2dCoefficients co;
    co.diff1 = [coeffs](double z) { double b = coeffs.beta1(z); return 0.5 * b * b; };
    co.diff2 = [coeffs](double z) { double b = coeffs.beta2(z); return 0.5 * b * b; };
    co.cross = [coeffs, rho12](double z1, double z2) {
        return rho12 * coeffs.beta1(z1) * coeffs.beta2(z2);
    };
    co.drift1 = [coeffs, consts, rho1](double z1, double z2) {
        return coeffs.alpha1(z1) + consts.gamma * rho1 * coeffs.lambda(z1, z2) * coeffs.beta1(z1);
    };
    co.drift2 = [coeffs, consts, rho2](double z1, double z2) {
        return coeffs.alpha2(z2) + consts.gamma * rho2 * coeffs.lambda(z1, z2) * coeffs.beta2(z2);
    };
    co.potential = [coeffs, consts](double z1, double z2) {
        const double lam = coeffs.lambda(z1, z2);
        return consts.gamma / (2.0 * consts.q) * lam * lam;
    };
    return co;
}

// gradient of a level with one-sided second-order edges
void level_gradients(const std::vector<double>& u, int n, double h,
                     std::vector<double>& g1, std::vector<double>& g2) {
    auto v = [&](int a, int b) { return u[a * n + b]; };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double d1;
            if (i == 0) d1 = (-3 * v(0, j) + 4 * v(1, j) - v(2, j)) / (2 * h);
            else if (i == n - 1) d1 = (3 * v(i, j) - 4 * v(i - 1, j) + v(i - 2, j)) / (2 * h);
            else d1 = (v(i + 1, j) - v(i - 1, j)) / (2 * h);
            double d2;
            if (j == 0) d2 = (-3 * v(i, 0) + 4 * v(i, 1) - v(i, 2)) / (2 * h);
            else if (j == n - 1) d2 = (3 * v(i, j) - 4 * v(i, j - 1) + v(i, j - 2)) / (2 * h);
            else d2 = (v(i, j + 1) - v(i, j - 1)) / (2 * h);
            g1[i * n + j] = d1;
            g2[i * n + j] = d2;
        }
    }
}

} // namespace

void f1_source_level(const GeneralCoefficients& coeffs, const DistortionConstants& consts,
                     const CorrelationScheme& scheme, const PsiSurface& psi0, int k_time,
                     std::vector<double>& out) {
    const int n = psi0.n();
    const double rho = scheme.rho;
    const double r1 = scheme.rho1_slope, r2 = scheme.rho2_slope, r12 = scheme.rho12_slope;
    out.resize(std::size_t(n) * n);
    for (int i = 0; i < n; ++i) {
        const double z1 = psi0.grid().z(i);
        const double b1 = coeffs.beta1(z1);
        for (int j = 0; j < n; ++j) {
            const double z2 = psi0.grid().z(j);
            const double b2 = coeffs.beta2(z2);
            const double p = psi0.node(k_time, i, j);
            const double p1 = psi0.d1(k_time, i, j);
            const double p2 = psi0.d2(k_time, i, j);
            const double p12 = psi0.d12(k_time, i, j);
            const double lam = coeffs.lambda(z1, z2);
            double f = consts.q * consts.gamma * rho / p
                     * (b1 * b2 * p1 * p2 * (r1 - rho * r12 + r2)
                        + b1 * b1 * r1 * p1 * p1 + b2 * b2 * r2 * p2 * p2);
            f += consts.gamma * lam * (r1 * b1 * p1 + r2 * b2 * p2);
            f += r12 * b1 * b2 * p12;
            out[i * n + j] = f;
        }
    }
}

PsiSurface solve_psi0_2d(const GeneralCoefficients& coeffs, const DistortionConstants& consts,
                         double rho, const Grid2D& grid, const Pde2dOptions& opts,
                         SolveDiagnostics* diag) {
    const auto co = base_coefficients(coeffs, consts, rho, rho, 1.0);
    return solve_linear_2d(co, grid, coeffs.T, 1.0, nullptr, opts, diag);
}

PsiSurface solve_psi1_2d(const GeneralCoefficients& coeffs, const DistortionConstants& consts,
                         const CorrelationScheme& scheme, const PsiSurface& psi0,
                         const Grid2D& grid, const Pde2dOptions& opts, SolveDiagnostics* diag) {
    if (psi0.time_stride() != 1)
        throw DomainError("psi1 source needs a stride-1 psi0 surface");
    const auto co = base_coefficients(coeffs, consts, scheme.rho, scheme.rho, 1.0);
    LevelSource src = [&](int k, std::vector<double>& out) {
        f1_source_level(coeffs, consts, scheme, psi0, k, out);
    };
    return solve_linear_2d(co, grid, coeffs.T, 0.0, src, opts, diag);
}

PsiSurface solve_psi_full(const GeneralCoefficients& coeffs, const DistortionConstants& consts,
                          const CorrelationScheme& scheme, const Grid2D& grid,
                          const Pde2dOptions& opts, SolveDiagnostics* diag) {
    const auto pc = perturbed_correlations(scheme);
    const auto co = base_coefficients(coeffs, consts, pc.rho1, pc.rho2, pc.rho12);
    Stepper st(co, grid, coeffs.T, opts, diag);

    const int n = grid.n_total();
    const int nn = n * n;
    const double h = grid.dz();
    const double dt = grid.dt(coeffs.T);
    const double th = opts.theta;
    const double c1 = (consts.q - 1.0) + consts.q * consts.gamma * pc.rho1 * pc.rho1;
    const double c2 = (consts.q - 1.0) + consts.q * consts.gamma * pc.rho2 * pc.rho2;
    const double c12 = (consts.q - 1.0) * pc.rho12 + consts.q * consts.gamma * pc.rho1 * pc.rho2;

    std::vector<double> bf1(nn), bf2(nn);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            bf1[i * n + j] = coeffs.beta1(grid.z(i));
            bf2[i * n + j] = coeffs.beta2(grid.z(j));
        }
    std::vector<double> g1(nn), g2(nn);
    auto bracket = [&](const Eigen::VectorXd& u, Eigen::VectorXd& out) {
        std::vector<double> uv(u.data(), u.data() + nn);
        level_gradients(uv, n, h, g1, g2);
        for (int a = 0; a < nn; ++a) {
            const double q1 = bf1[a] * g1[a];
            const double q2 = bf2[a] * g2[a];
            out[a] = (c1 * q1 * q1 + c2 * q2 * q2 + 2.0 * c12 * q1 * q2) / (2.0 * u[a]);
        }
    };

    PsiSurface surf(grid, coeffs.T, opts.time_stride);
    surf.positive_type = true;
    Eigen::VectorXd u = Eigen::VectorXd::Constant(nn, 1.0);
    std::copy_n(u.data(), nn, surf.level_by_time(grid.n_t).data());
    Eigen::VectorXd nl_old(nn), nl_new(nn);
    bracket(u, nl_old);
    const double cap = st.value_cap();
    for (int k = grid.n_t - 1; k >= 0; --k) {
        const Eigen::VectorXd base = st.explicit_part(u);
        Eigen::VectorXd rhs = base + dt * nl_old;
        Eigen::VectorXd u1 = st.implicit_solve(rhs);
        // one fixed-point re-correction of the lagged bracket
        bracket(u1, nl_new);
        rhs = base + dt * (th * nl_new + (1 - th) * nl_old);
        u = st.implicit_solve(rhs);
        check_bounds(u, true, cap, k, diag);
        bracket(u, nl_old);
        if (surf.stores_level(k))
            std::copy_n(u.data(), nn, surf.level_by_time(k).data());
    }
    return surf;
}

std::vector<DiagonalErrorRow> diagonal_error_curves(const PsiSurface& psi_full,
                                                    const PsiSurface& psi0,
                                                    const PsiSurface& psi1, double eps) {
    const auto& g = psi_full.grid();
    if (psi0.grid().z_max != g.z_max || psi1.grid().z_max != g.z_max
        || psi0.n() != psi_full.n() || psi1.n() != psi_full.n())
        throw DomainError("diagonal_error_curves needs surfaces on a common grid");
    std::vector<DiagonalErrorRow> rows;
    for (int i = 0; i < g.n_total(); ++i) {
        const double z = g.z(i);
        if (z > g.z_max + 1e-12) break;
        const double f = psi_full.node(0, i, i);
        const double p0 = psi0.node(0, i, i);
        const double p1 = psi1.node(0, i, i);
        rows.push_back({z, f, p0, p0 + eps * p1, f - p0, f - (p0 + eps * p1)});
    }
    return rows;
}

} // namespace volfactor
