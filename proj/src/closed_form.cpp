#include "volfactor/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "volfactor/grid.hpp"

namespace volfactor {

namespace {

void check_time_grid(const std::vector<double>& g, double T) {
    if (g.size() < 4)
        throw QuadratureError("time grid needs at least 4 nodes");
    if (std::abs(g.front()) > 1e-12 || std::abs(g.back() - T) > 1e-9 * std::max(1.0, T))
        throw QuadratureError("time grid must span [0, T]");
    const double h = (g.back() - g.front()) / double(g.size() - 1);
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        const double d = g[i + 1] - g[i];
        if (!(d > 0.0) || std::abs(d - h) > 1e-9 * h)
            throw QuadratureError("time grid must be uniform and strictly increasing");
    }
}

double riccati_rhs(const DiagonalParams& p, double a) {
    const double c1 = 2.0 * p.gamma * p.coupling * p.beta_bar - 1.0;
    return -(p.beta_bar * p.beta_bar * a * a + c1 * a + p.gamma * p.lambda_sq / p.q);
}

} // namespace

DiagonalParams diagonal_params(const DistortionConstants& consts,
                               const ChackoViceira& model, double rho) {
    return {consts.gamma, consts.q, rho * model.lambda_bar(),
            model.lambda_bar() * model.lambda_bar(), model.beta_bar, model.m, model.T};
}

SourceSlopes source_slopes(const CorrelationScheme& scheme,
                           const DistortionConstants& consts,
                           const ChackoViceira& model) {
    (void)consts;
    const double r1 = scheme.rho1_slope, r2 = scheme.rho2_slope, r12 = scheme.rho12_slope;
    const double rho = scheme.rho;
    return {2.0 * rho * (r1 + r2) - rho * rho * r12,
            model.lambda_bar() * (r1 + r2),
            r12};
}

std::pair<double, double> riccati_roots(const DiagonalParams& p) {
    const double b2 = p.beta_bar * p.beta_bar;
    const double c1 = 1.0 - 2.0 * p.gamma * p.coupling * p.beta_bar;
    const double disc = c1 * c1 - 4.0 * p.gamma * p.lambda_sq * b2 / p.q;
    if (!(disc > 0.0))
        throw DegenerateRoots("riccati discriminant <= 0; use the ODE path of solve_AB");
    const double s = std::sqrt(disc);
    return {(c1 + s) / (2.0 * b2), (c1 - s) / (2.0 * b2)};
}

std::pair<double, double> riccati_roots(const DistortionConstants& consts,
                                        const ChackoViceira& model, double rho) {
    return riccati_roots(diagonal_params(consts, model, rho));
}

RiccatiSolution::RiccatiSolution(DiagonalParams par, const std::vector<double>& time_grid)
    : par_(par), grid_(time_grid) {
    check_time_grid(grid_, par_.T);
    const std::size_t n = grid_.size();
    const double h = par_.T / double(n - 1);
    a_samples_.assign(n, 0.0);
    std::vector<double> b_samples(n, 0.0);

    bool have_roots = true;
    try {
        auto [ap, am] = riccati_roots(par_);
        a_plus_ = ap;
        a_minus_ = am;
    } catch (const DegenerateRoots&) {
        have_roots = false;
        a_plus_ = a_minus_ = std::numeric_limits<double>::quiet_NaN();
    }
    // root coincidence is handled by the same ODE fallback as no-roots
    if (have_roots && std::abs(a_plus_ - a_minus_) < 1e-12) have_roots = false;
    closed_form_ = have_roots;

    const double b2 = par_.beta_bar * par_.beta_bar;
    if (closed_form_) {
        for (std::size_t k = 0; k < n; ++k) {
            const double tau = par_.T - grid_[k];
            const double e = std::exp(b2 * tau * (a_plus_ - a_minus_));
            a_samples_[k] = a_plus_ * a_minus_ * (1.0 - e) / (a_minus_ - a_plus_ * e);
            b_samples[k] = -par_.m * (std::log((a_minus_ - a_plus_ * e) / (a_minus_ - a_plus_)) / b2
                                      - a_plus_ * tau);
        }
    } else {
        // backward RK4 from A(T) = 0 on the sample grid
        double a = 0.0;
        a_samples_[n - 1] = 0.0;
        for (std::size_t k = n - 1; k > 0; --k) {
            const double hh = -h;
            const double k1 = riccati_rhs(par_, a);
            const double k2 = riccati_rhs(par_, a + 0.5 * hh * k1);
            const double k3 = riccati_rhs(par_, a + 0.5 * hh * k2);
            const double k4 = riccati_rhs(par_, a + hh * k3);
            a += hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!std::isfinite(a) || std::abs(a) > 1e6)
                throw DegenerateRoots("riccati ODE fallback exploded: finite-time blow-up of the value function");
            a_samples_[n - 1 - (n - k)] = a;
        }
    }
    auto int_a = cumulative_integral(h, a_samples_);
    if (!closed_form_) {
        // B' = -m A, B(T) = 0  =>  B(t) = m (intA(T) - intA(t))
        for (std::size_t k = 0; k < n; ++k)
            b_samples[k] = par_.m * (int_a.back() - int_a[k]);
    }
    a_fn_ = SampledTimeFn(0.0, par_.T, a_samples_);
    b_fn_ = SampledTimeFn(0.0, par_.T, b_samples);
    int_a_fn_ = SampledTimeFn(0.0, par_.T, int_a);
}

double RiccatiSolution::A(double t) const {
    if (!closed_form_) return a_fn_(t);
    const double b2 = par_.beta_bar * par_.beta_bar;
    const double tau = par_.T - t;
    const double e = std::exp(b2 * tau * (a_plus_ - a_minus_));
    return a_plus_ * a_minus_ * (1.0 - e) / (a_minus_ - a_plus_ * e);
}

double RiccatiSolution::B(double t) const {
    if (!closed_form_) return b_fn_(t);
    const double b2 = par_.beta_bar * par_.beta_bar;
    const double tau = par_.T - t;
    const double e = std::exp(b2 * tau * (a_plus_ - a_minus_));
    return -par_.m * (std::log((a_minus_ - a_plus_ * e) / (a_minus_ - a_plus_)) / b2
                      - a_plus_ * tau);
}

double RiccatiSolution::intA(double t) const { return int_a_fn_(t); }

RiccatiSolution solve_AB(const DiagonalParams& par, const std::vector<double>& time_grid) {
    return RiccatiSolution(par, time_grid);
}

RiccatiSolution solve_AB(const DistortionConstants& consts, const ChackoViceira& model,
                         double rho, const std::vector<double>& time_grid) {
    return RiccatiSolution(diagonal_params(consts, model, rho), time_grid);
}

double fbar1(double t, const RiccatiSolution& riccati, const SourceSlopes& s) {
    const auto& p = riccati.params();
    const double a = riccati.A(t);
    const double b2 = p.beta_bar * p.beta_bar;
    return 0.5 * p.q * p.gamma * b2 * a * a * s.s2
         + p.gamma * p.beta_bar * a * s.s1
         + 0.5 * b2 * a * a * s.s0;
}

double fbar1(double t, const RiccatiSolution& riccati, const CorrelationScheme& scheme,
             const DistortionConstants& consts) {
    (void)consts;
    // lambda_bar recovered from the engine parameters
    SourceSlopes s{2.0 * scheme.rho * (scheme.rho1_slope + scheme.rho2_slope)
                       - scheme.rho * scheme.rho * scheme.rho12_slope,
                   std::sqrt(riccati.params().lambda_sq)
                       * (scheme.rho1_slope + scheme.rho2_slope),
                   scheme.rho12_slope};
    return fbar1(t, riccati, s);
}

CorrectionSolution solve_A1B1(const RiccatiSolution& riccati, const SourceSlopes& slopes) {
    const auto& p = riccati.params();
    const auto& grid = riccati.grid();
    const std::size_t n = grid.size();
    if (n < 4) throw QuadratureError("solve_A1B1 needs at least 4 time nodes");
    const double h = p.T / double(n - 1);
    const double b2 = p.beta_bar * p.beta_bar;
    const double c0 = 2.0 * p.gamma * p.coupling * p.beta_bar - 1.0;

    // G(s) = int_0^s (2 A beta^2 + c0) du ; A1(t) = e^{-G(t)} int_t^T e^{G(s)} fbar1(s) ds
    std::vector<double> G(n), w(n);
    double gmax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        G[k] = 2.0 * b2 * riccati.intA(grid[k]) + c0 * grid[k];
        gmax = std::max(gmax, G[k]);
    }
    for (std::size_t k = 0; k < n; ++k)
        w[k] = std::exp(G[k] - gmax) * fbar1(grid[k], riccati, slopes);
    auto W = cumulative_integral(h, w);
    std::vector<double> a1(n);
    for (std::size_t k = 0; k < n; ++k)
        a1[k] = std::exp(gmax - G[k]) * (W.back() - W[k]);
    auto CA1 = cumulative_integral(h, a1);
    std::vector<double> b1(n);
    for (std::size_t k = 0; k < n; ++k)
        b1[k] = p.m * (CA1.back() - CA1[k]);
    return CorrectionSolution(SampledTimeFn(0.0, p.T, std::move(a1)),
                              SampledTimeFn(0.0, p.T, std::move(b1)), slopes);
}

CorrectionSolution solve_A1B1(const RiccatiSolution& riccati, const CorrelationScheme& scheme,
                              const DistortionConstants& consts) {
    (void)consts;
    SourceSlopes s{2.0 * scheme.rho * (scheme.rho1_slope + scheme.rho2_slope)
                       - scheme.rho * scheme.rho * scheme.rho12_slope,
                   std::sqrt(riccati.params().lambda_sq)
                       * (scheme.rho1_slope + scheme.rho2_slope),
                   scheme.rho12_slope};
    return solve_A1B1(riccati, s);
}

double psi0_tilde(double t, double z, const RiccatiSolution& riccati) {
    return std::exp(riccati.A(t) * z + riccati.B(t));
}

double psi1_tilde(double t, double z, const RiccatiSolution& riccati,
                  const CorrectionSolution& correction) {
    return (z * correction.A1(t) + correction.B1(t)) * psi0_tilde(t, z, riccati);
}

double value_approx(const WealthState& state, int order, const RiccatiSolution& riccati,
                    const CorrectionSolution* correction, const DistortionConstants& consts,
                    double eps) {
    if (!(state.x > 0.0)) throw DomainError("wealth must be positive");
    double base = psi0_tilde(state.t, state.z1, riccati);
    if (order >= 1) {
        if (!correction) throw DomainError("order >= 1 needs a correction solution");
        base += eps * psi1_tilde(state.t, state.z1, riccati, *correction);
    }
    if (!(base > 0.0))
        throw NegativeBase("psi0 + eps psi1 <= 0: eps too large for the expansion");
    return std::pow(state.x, consts.p) / consts.p * std::pow(base, consts.q);
}

double pi0_diagonal(const WealthState& state, const RiccatiSolution& riccati,
                    const DistortionConstants& consts, const ChackoViceira& model,
                    double rho) {
    const double a = riccati.A(state.t);
    return 2.0 * state.x * state.z1 * (model.lambda_bar() + rho * consts.q * model.beta_bar * a)
           / ((1.0 - consts.p) * model.sigma_bar);
}

double pi0_general(const WealthState& state, const PsiSurface& psi0,
                   const DistortionConstants& consts, const GeneralCoefficients& coeffs,
                   double rho) {
    double g1 = 0.0, g2 = 0.0;
    const double psi = psi0.value_grad(state.t, state.z1, state.z2, &g1, &g2);
    const double sig = coeffs.sigma(state.z1, state.z2);
    const double lam = coeffs.mu(state.z1, state.z2) / sig;
    const double b1 = coeffs.beta1(state.z1);
    const double b2 = coeffs.beta2(state.z2);
    return state.x / ((1.0 - consts.p) * sig)
           * (lam + rho * consts.q * (b1 * g1 + b2 * g2) / psi);
}

} // namespace volfactor
