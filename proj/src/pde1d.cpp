#include "volfactor/pde1d.hpp"

#include <cmath>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace volfactor {

Pde1dResult solve_diagonal_1d(const DiagonalParams& par, double z_top, int n_z, int n_t,
                              double terminal,
                              const std::function<double(double, double)>& source,
                              const Pde1dOptions& opts) {
    if (n_z < 4 || n_t < 1) throw DomainError("1-D grid too small");
    const double h = z_top / double(n_z - 1);
    const double pad = opts.pad < 0.0 ? z_top : opts.pad;
    const int n = n_z + int(std::lround(pad / h));
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) z[i] = h * i;

    const double b2 = par.beta_bar * par.beta_bar;
    const double kap = 2.0 * par.gamma * par.coupling * par.beta_bar;
    auto diffusion = [&](double zz) { return b2 * zz; };
    auto drift = [&](double zz) { return (par.m - zz) + kap * zz; };
    auto potential = [&](double zz) { return par.gamma * par.lambda_sq / par.q * zz; };

    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> trips;
    trips.reserve(std::size_t(3) * n + 4);
    for (int i = 1; i + 1 < n; ++i) {
        const double a = diffusion(z[i]), b = drift(z[i]);
        trips.emplace_back(i, i - 1, a / (h * h) - b / (2 * h));
        trips.emplace_back(i, i, -2 * a / (h * h) + potential(z[i]));
        trips.emplace_back(i, i + 1, a / (h * h) + b / (2 * h));
    }
    {   // z = 0: degenerate diffusion, inward drift, one-sided second order
        const double b = drift(z[0]);
        trips.emplace_back(0, 0, -3 * b / (2 * h) + potential(z[0]));
        trips.emplace_back(0, 1, 4 * b / (2 * h));
        trips.emplace_back(0, 2, -b / (2 * h));
    }
    {   // far boundary: zero normal curvature, one-sided second-order drift
        const double b = drift(z[n - 1]);
        trips.emplace_back(n - 1, n - 1, 3 * b / (2 * h) + potential(z[n - 1]));
        trips.emplace_back(n - 1, n - 2, -4 * b / (2 * h));
        trips.emplace_back(n - 1, n - 3, b / (2 * h));
    }
    Eigen::SparseMatrix<double> L(n, n);
    L.setFromTriplets(trips.begin(), trips.end());

    const double dt = par.T / double(n_t);
    const double th = opts.theta;
    Eigen::SparseMatrix<double> I(n, n);
    I.setIdentity();
    Eigen::SparseMatrix<double> Aimp = I - th * dt * L;
    Eigen::SparseMatrix<double> Bexp = I + (1.0 - th) * dt * L;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(Aimp);
    if (lu.info() != Eigen::Success) throw StabilityFailure("1-D implicit factorization failed");

    Pde1dResult out;
    out.z = z;
    out.n_inner = n_z;
    out.dt = dt;
    out.levels.assign(n_t + 1, std::vector<double>(n));
    Eigen::VectorXd u = Eigen::VectorXd::Constant(n, terminal);
    for (int i = 0; i < n; ++i) out.levels[n_t][i] = u[i];
    Eigen::VectorXd rhs(n);
    for (int k = n_t - 1; k >= 0; --k) {
        rhs = Bexp * u;
        if (source) {
            for (int i = 0; i < n; ++i)
                rhs[i] += dt * (th * source(k * dt, z[i]) + (1 - th) * source((k + 1) * dt, z[i]));
        }
        u = lu.solve(rhs);
        if (!u.allFinite()) throw StabilityFailure("1-D solve produced non-finite values");
        for (int i = 0; i < n; ++i) out.levels[k][i] = u[i];
    }
    return out;
}

Pde1dResult solve_psi0_tilde_1d(const DistortionConstants& consts, const ChackoViceira& model,
                                double rho, double z_top, int n_z, int n_t,
                                const Pde1dOptions& opts) {
    return solve_diagonal_1d(diagonal_params(consts, model, rho), z_top, n_z, n_t, 1.0,
                             nullptr, opts);
}

Pde1dResult solve_psi1_tilde_1d(const DistortionConstants& consts, const ChackoViceira& model,
                                const CorrelationScheme& scheme, const RiccatiSolution& riccati,
                                double z_top, int n_z, int n_t, const Pde1dOptions& opts) {
    const auto slopes = source_slopes(scheme, consts, model);
    auto src = [&riccati, slopes](double t, double z) {
        return fbar1(t, riccati, slopes) * z * psi0_tilde(t, z, riccati);
    };
    return solve_diagonal_1d(diagonal_params(consts, model, scheme.rho), z_top, n_z, n_t, 0.0,
                             src, opts);
}

} // namespace volfactor
