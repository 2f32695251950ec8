#include "volfactor/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace volfactor {

double phi_term(const PsiPointDerivs& d, const DistortionConstants& consts,
                const CorrelationScheme& scheme) {
    const double q = consts.q, p = consts.p, rho = scheme.rho;
    const double r1 = scheme.rho1_slope, r2 = scheme.rho2_slope, r12 = scheme.rho12_slope;
    const double b1 = d.beta1, b2 = d.beta2;
    double phi = d.p0 * d.p0 * (
        b1 * b1 * (q * p * r1 * r1 * d.p0_1 * d.p0_1 + 4 * q * p * rho * r1 * d.p0_1 * d.p1_1
                   - (q - 1) * (p - 1) * d.p1_1 * d.p1_1)
        + b2 * b2 * (q * p * r2 * r2 * d.p0_2 * d.p0_2 + 4 * q * p * rho * r2 * d.p0_2 * d.p1_2
                     - (q - 1) * (p - 1) * d.p1_2 * d.p1_2)
        + 2 * b1 * b2 * ((q * p * rho * (r1 + r2) - (q - 1) * (p - 1) * r12)
                             * (d.p1_1 * d.p0_2 + d.p1_2 * d.p0_1)
                         - (q - 1) * (p - 1) * d.p1_1 * d.p1_2
                         + q * p * r1 * r2 * d.p0_1 * d.p0_2));
    phi += 2 * d.p0 * d.p1 * (
        b1 * b1 * (-q * p * rho * r1 * d.p0_1 * d.p0_1 + (q - 1) * (p - 1) * d.p0_1 * d.p1_1)
        + b2 * b2 * (-q * p * rho * r2 * d.p0_2 * d.p0_2 + (q - 1) * (p - 1) * d.p0_2 * d.p1_2)
        + b1 * b2 * ((-q * p * rho * (r1 + r2) + (q - 1) * (p - 1) * r12) * d.p0_1 * d.p0_2
                     + (q - 1) * (p - 1) * (d.p0_1 * d.p1_2 + d.p0_2 * d.p1_1)));
    phi += -2 * d.p0 * d.p0 * d.p0
           * (b1 * b2 * (p - 1) * r12 * d.p1_12
              - d.lambda * p * (b1 * r1 * d.p1_1 + b2 * r2 * d.p1_2));
    const double s0 = b1 * d.p0_1 + b2 * d.p0_2;
    phi += (q - 1) * (1 - p) * d.p1 * d.p1 * s0 * s0;
    return phi;
}

double theta_sq(const PsiPointDerivs& d, const DistortionConstants& consts,
                const CorrelationScheme& scheme) {
    const double w = d.p1 * (d.beta1 * d.p0_1 + d.beta2 * d.p0_2)
                   - d.p0 * (d.beta1 * d.p1_1 + d.beta2 * d.p1_2);
    const double qr = consts.q * scheme.rho;
    return qr * qr * w * w;
}

PsiPointDerivs derivs_from_surfaces(const PsiSurface& psi0, const PsiSurface& psi1,
                                    int k, int i, int j, const GeneralCoefficients& coeffs) {
    PsiPointDerivs d{};
    const double z1 = psi0.grid().z(i), z2 = psi0.grid().z(j);
    d.p0 = psi0.node(k, i, j);
    d.p0_1 = psi0.d1(k, i, j);
    d.p0_2 = psi0.d2(k, i, j);
    d.p0_12 = psi0.d12(k, i, j);
    d.p1 = psi1.node(k, i, j);
    d.p1_1 = psi1.d1(k, i, j);
    d.p1_2 = psi1.d2(k, i, j);
    d.p1_12 = psi1.d12(k, i, j);
    d.beta1 = coeffs.beta1(z1);
    d.beta2 = coeffs.beta2(z2);
    d.lambda = coeffs.lambda(z1, z2);
    return d;
}

PsiPointDerivs derivs_from_closed(double t, double z, const RiccatiSolution& riccati,
                                  const CorrectionSolution& correction,
                                  const ChackoViceira& model) {
    PsiPointDerivs d{};
    const double A = riccati.A(t), A1 = correction.A1(t), B1 = correction.B1(t);
    const double psi0 = psi0_tilde(t, z, riccati);
    const double lin = z * A1 + B1;
    d.p0 = psi0;
    d.p0_1 = d.p0_2 = 0.5 * A * psi0;
    d.p0_12 = 0.25 * A * A * psi0;
    d.p1 = lin * psi0;
    d.p1_1 = d.p1_2 = 0.5 * (A1 + lin * A) * psi0;
    d.p1_12 = 0.25 * (2 * A1 * A + lin * A * A) * psi0;
    d.beta1 = d.beta2 = model.beta_bar * std::sqrt(2.0 * z);
    d.lambda = model.lambda_bar() * std::sqrt(2.0 * z);
    return d;
}

double choose_M(const std::vector<MSample>& samples, const DistortionConstants& consts,
                const CorrelationScheme& scheme, double T) {
    if (samples.empty()) throw DomainError("choose_M needs a nonempty sample");
    double sup_num = 0.0;
    double inf_den = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        const double phi = phi_term(s.d, consts, scheme);
        const double th2 = theta_sq(s.d, consts, scheme);
        sup_num = std::max(sup_num, std::abs(phi + consts.p * th2)
                                        / (2.0 * (1.0 - consts.p) * s.d.p0 * s.d.p0));
        const double arg = consts.p < 0.0 ? -s.t : T - s.t;
        inf_den = std::min(inf_den, 1.0 + consts.gamma / (2.0 * consts.q) * s.lambda_sq * arg);
    }
    if (!(inf_den > 0.0))
        throw BoundDegenerate("bracket infimum <= 0: horizon too long for the sandwich argument");
    const double m = 1.5 * sup_num / inf_den;
    return std::max(m, 1e-8);
}

double apply_Q(double pi_value, const ScalarField& v, const GeneralCoefficients& coeffs,
               const PerturbedCorrelations& pc, const QPoint& pt, const QSteps& steps) {
    const double ht = steps.dt, hz = steps.dz, hx = steps.dx_rel * pt.x;
    const double t = pt.t, x = pt.x, z1 = pt.z1, z2 = pt.z2;
    auto V = [&](double tt, double xx, double a, double b) { return v(tt, xx, a, b); };
    const double v0 = V(t, x, z1, z2);
    const double vs = std::abs(v0);
    const double eps_m = std::numeric_limits<double>::epsilon();

    double noise = 0.0;   // fp cancellation in the assembled differences
    auto diff = [&](double num, double denom, double coef, double k) {
        if (num != 0.0) noise += std::abs(coef) * k * eps_m * vs / denom;
        return num / denom;
    };

    const double b1 = coeffs.beta1(z1), b2 = coeffs.beta2(z2);
    const double mu = coeffs.mu(z1, z2), sig = coeffs.sigma(z1, z2);
    const double al1 = coeffs.alpha1(z1), al2 = coeffs.alpha2(z2);
    const double pi2s2 = 0.5 * pi_value * pi_value * sig * sig;

    const double v_t = diff(V(t + ht, x, z1, z2) - V(t - ht, x, z1, z2), 2 * ht, 1.0, 2);
    const double v_1 = diff(V(t, x, z1 + hz, z2) - V(t, x, z1 - hz, z2), 2 * hz, al1, 2);
    const double v_2 = diff(V(t, x, z1, z2 + hz) - V(t, x, z1, z2 - hz), 2 * hz, al2, 2);
    const double v_11 = diff(V(t, x, z1 + hz, z2) - 2 * v0 + V(t, x, z1 - hz, z2), hz * hz,
                             0.5 * b1 * b1, 4);
    const double v_22 = diff(V(t, x, z1, z2 + hz) - 2 * v0 + V(t, x, z1, z2 - hz), hz * hz,
                             0.5 * b2 * b2, 4);
    const double v_12 = diff(V(t, x, z1 + hz, z2 + hz) - V(t, x, z1 + hz, z2 - hz)
                                 - V(t, x, z1 - hz, z2 + hz) + V(t, x, z1 - hz, z2 - hz),
                             4 * hz * hz, pc.rho12 * b1 * b2, 4);
    const double v_x = diff(V(t, x + hx, z1, z2) - V(t, x - hx, z1, z2), 2 * hx,
                            pi_value * mu, 2);
    const double v_xx = diff(V(t, x + hx, z1, z2) - 2 * v0 + V(t, x - hx, z1, z2), hx * hx,
                             pi2s2, 4);
    const double v_x1 = diff(V(t, x + hx, z1 + hz, z2) - V(t, x + hx, z1 - hz, z2)
                                 - V(t, x - hx, z1 + hz, z2) + V(t, x - hx, z1 - hz, z2),
                             4 * hx * hz, pi_value * sig * pc.rho1 * b1, 4);
    const double v_x2 = diff(V(t, x + hx, z1, z2 + hz) - V(t, x + hx, z1, z2 - hz)
                                 - V(t, x - hx, z1, z2 + hz) + V(t, x - hx, z1, z2 - hz),
                             4 * hx * hz, pi_value * sig * pc.rho2 * b2, 4);

    const double terms[] = {v_t,
                            al1 * v_1,
                            al2 * v_2,
                            0.5 * b1 * b1 * v_11,
                            0.5 * b2 * b2 * v_22,
                            pc.rho12 * b1 * b2 * v_12,
                            pi_value * mu * v_x,
                            pi2s2 * v_xx,
                            pi_value * sig * (pc.rho1 * b1 * v_x1 + pc.rho2 * b2 * v_x2)};
    double qv = 0.0, term_scale = 0.0;
    for (double t_ : terms) {
        qv += t_;
        term_scale = std::max(term_scale, std::abs(t_));
    }
    if (term_scale > 0.0 && noise > 1e-6 * term_scale)
        throw StepTooSmall("finite-difference steps lose more than six digits to rounding");
    return qv;
}

namespace {

constexpr double W1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
constexpr double W2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};

struct Stencil {
    double f, f_t, f_1, f_2, f_11, f_22, f_12;
};

// fourth-order composite of psi0 + eps psi1 at an interior grid node
Stencil stencil4(const PsiSurface& s0, const PsiSurface& s1, double eps,
                 int k, int i, int j, double dt, double h) {
    auto F = [&](int kk, int ii, int jj) {
        return s0.node(kk, ii, jj) + eps * s1.node(kk, ii, jj);
    };
    Stencil st{};
    st.f = F(k, i, j);
    for (int a = -2; a <= 2; ++a) {
        if (a == 0) {
            st.f_11 += W2[2] * st.f;
            st.f_22 += W2[2] * st.f;
            continue;
        }
        st.f_t += W1[a + 2] * F(k + a, i, j);
        st.f_1 += W1[a + 2] * F(k, i + a, j);
        st.f_2 += W1[a + 2] * F(k, i, j + a);
        st.f_11 += W2[a + 2] * F(k, i + a, j);
        st.f_22 += W2[a + 2] * F(k, i, j + a);
    }
    for (int a = -2; a <= 2; ++a) {
        if (a == 0) continue;
        double row = 0.0;
        for (int b = -2; b <= 2; ++b) {
            if (b == 0) continue;
            row += W1[b + 2] * F(k, i + a, j + b);
        }
        st.f_12 += W1[a + 2] * row;
    }
    st.f_t /= dt;
    st.f_1 /= h;
    st.f_2 /= h;
    st.f_11 /= h * h;
    st.f_22 /= h * h;
    st.f_12 /= h * h;
    return st;
}

} // namespace

double grid_q_residual(const PsiSurface& psi0, const PsiSurface& psi1, double eps,
                       const DistortionConstants& consts, const GeneralCoefficients& coeffs,
                       const CorrelationScheme& scheme, int k, int i, int j,
                       bool zero_strategy) {
    const double p = consts.p, q = consts.q;
    const double h = psi0.grid().dz();
    const double dt = psi0.grid().dt(psi0.horizon());
    const double z1 = psi0.grid().z(i), z2 = psi0.grid().z(j);
    const double rho1 = scheme.rho + scheme.rho1_slope * eps;
    const double rho2 = scheme.rho + scheme.rho2_slope * eps;
    const double rho12 = 1.0 + scheme.rho12_slope * eps;
    const double b1 = coeffs.beta1(z1), b2 = coeffs.beta2(z2);
    const double mu = coeffs.mu(z1, z2), sig = coeffs.sigma(z1, z2);
    const double lam = mu / sig;
    const double x = 1.0;

    // pi0 from the psi0 surface (fourth-order gradient)
    double p0g1 = 0.0, p0g2 = 0.0;
    for (int a = -2; a <= 2; ++a) {
        if (a == 0) continue;
        p0g1 += W1[a + 2] * psi0.node(k, i + a, j);
        p0g2 += W1[a + 2] * psi0.node(k, i, j + a);
    }
    p0g1 /= h;
    p0g2 /= h;
    const double P0 = psi0.node(k, i, j);
    const double pi0 = zero_strategy
        ? 0.0
        : x / ((1.0 - p) * sig) * (lam + scheme.rho * q * (b1 * p0g1 + b2 * p0g2) / P0);

    const auto st = stencil4(psi0, psi1, eps, k, i, j, dt, h);
    const double f = st.f;
    const double xp = std::pow(x, p) / p;
    const double fq1 = std::pow(f, q - 1.0);
    const double fq2 = std::pow(f, q - 2.0);
    const double v_t = xp * q * fq1 * st.f_t;
    const double v_1 = xp * q * fq1 * st.f_1;
    const double v_2 = xp * q * fq1 * st.f_2;
    const double v_11 = xp * q * ((q - 1) * fq2 * st.f_1 * st.f_1 + fq1 * st.f_11);
    const double v_22 = xp * q * ((q - 1) * fq2 * st.f_2 * st.f_2 + fq1 * st.f_22);
    const double v_12 = xp * q * ((q - 1) * fq2 * st.f_1 * st.f_2 + fq1 * st.f_12);
    const double fq = std::pow(f, q);
    const double v_x = std::pow(x, p - 1) * fq;
    const double v_xx = (p - 1) * std::pow(x, p - 2) * fq;
    const double v_x1 = std::pow(x, p - 1) * q * fq1 * st.f_1;
    const double v_x2 = std::pow(x, p - 1) * q * fq1 * st.f_2;

    const double Qv = v_t + coeffs.alpha1(z1) * v_1 + coeffs.alpha2(z2) * v_2
                    + 0.5 * b1 * b1 * v_11 + 0.5 * b2 * b2 * v_22 + rho12 * b1 * b2 * v_12
                    + pi0 * mu * v_x + 0.5 * pi0 * pi0 * sig * sig * v_xx
                    + pi0 * sig * (rho1 * b1 * v_x1 + rho2 * b2 * v_x2);
    return Qv / std::pow(x, p);
}

namespace {

std::vector<std::array<int, 3>> band_samples(const PsiSurface& psi0) {
    const auto& g = psi0.grid();
    const int nt = g.n_t;
    std::vector<int> zi;
    for (double zq : {5.0, 10.0, 20.0, 30.0, 50.0, 70.0, 90.0}) {
        if (zq > g.z_max) continue;
        const int i = int(std::lround(zq / g.dz()));
        if (i >= 2 && i < g.n_total() - 2) zi.push_back(i);
    }
    std::vector<std::array<int, 3>> out;
    for (int kfrac = 1; kfrac <= 4; ++kfrac) {
        const int k = kfrac * nt / 5;
        for (int i : zi)
            for (int d : {-1, 0, 1})
                out.push_back({k, i, i + d});
    }
    return out;
}

} // namespace

ResidualOrder residual_order_regression(const std::vector<double>& eps_list,
                                        const PsiSurface& psi0, const PsiSurface& psi1,
                                        const DistortionConstants& consts,
                                        const GeneralCoefficients& coeffs,
                                        const CorrelationScheme& scheme,
                                        bool zero_strategy) {
    if (eps_list.size() < 2) throw DomainError("need at least two eps values");
    if (psi0.time_stride() != 1 || psi1.time_stride() != 1)
        throw DomainError("residual regression needs stride-1 surfaces");
    const auto pts = band_samples(psi0);
    ResidualOrder out;
    auto sup_for = [&](double eps) {
        double sup = 0.0;
        for (const auto& [k, i, j] : pts)
            sup = std::max(sup, std::abs(grid_q_residual(psi0, psi1, eps, consts, coeffs,
                                                         scheme, k, i, j, zero_strategy)));
        return sup;
    };
    out.noise_floor = sup_for(0.0);
    for (double e : eps_list)
        out.sup_by_eps.emplace_back(e, sup_for(e));
    for (const auto& [e, s] : out.sup_by_eps)
        if (s >= 3.0 * out.noise_floor) out.trusted_eps.push_back(e);
    const bool use_trusted = out.trusted_eps.size() >= 2;
    if (!use_trusted) {
        out.trusted_eps.clear();
        for (double e : eps_list) out.trusted_eps.push_back(e);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& [e, s] : out.sup_by_eps) {
        if (use_trusted && s < 3.0 * out.noise_floor) continue;
        const double lx = std::log(e), ly = std::log(s);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    out.fitted_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return out;
}

SandwichResult sandwich_check(const SubSuperPair& pair, const PsiSurface& psi_full,
                              double band_frac, double z_cap) {
    const auto& g = psi_full.grid();
    if (z_cap < 0.0) z_cap = g.z_max;
    const double T = psi_full.horizon();
    SandwichResult res;
    long viol = 0, tot = 0;
    const int stride = psi_full.time_stride();
    const int iband = std::max(1, int(std::lround(band_frac * z_cap / g.dz())));
    for (int k = 0; k <= g.n_t; k += stride) {
        const double t = psi_full.t_of(k);
        const double slack = pair.eps * pair.eps * pair.M * (pair.p_negative ? t : T - t);
        for (int i = 0; i < g.n_total(); ++i) {
            if (g.z(i) > z_cap) break;
            for (int j = std::max(0, i - iband); j <= std::min(g.n_total() - 1, i + iband); ++j) {
                if (g.z(j) > z_cap) break;
                ++tot;
                const double dev = std::abs(psi_full.node(k, i, j)
                                            - pair.psi0->node(k, i, j)
                                            - pair.eps * pair.psi1->node(k, i, j));
                if (dev > slack + 1e-14) {
                    ++viol;
                    res.max_violation = std::max(res.max_violation, dev - slack);
                }
            }
        }
    }
    res.n_checked = tot;
    res.violation_fraction = tot > 0 ? double(viol) / double(tot) : 0.0;
    return res;
}

std::vector<PhiComparison> phi_consistency(const PsiSurface& psi0, const PsiSurface& psi1,
                                           const DistortionConstants& consts,
                                           const GeneralCoefficients& coeffs,
                                           const CorrelationScheme& scheme) {
    std::vector<PhiComparison> out;
    const auto& g = psi0.grid();
    const int nt = g.n_t;
    for (double zq : {10.0, 30.0, 50.0}) {
        const int i = int(std::lround(zq / g.dz()));
        if (i < 2 || i >= g.n_total() - 2) continue;
        for (int k : {nt / 5, nt / 2}) {
            const double e1 = 0.05;
            const double r1 = grid_q_residual(psi0, psi1, e1, consts, coeffs, scheme, k, i, i);
            const double r2 = grid_q_residual(psi0, psi1, 2 * e1, consts, coeffs, scheme, k, i, i);
            const double c2 = (8 * r1 - r2) / (4 * e1 * e1);   // cancels the eps^3 term
            const auto d = derivs_from_surfaces(psi0, psi1, k, i, i, coeffs);
            const double phi = phi_term(d, consts, scheme);
            const double pred = consts.q / consts.p * std::pow(d.p0, consts.q - 1.0) * phi
                              / (2.0 * (1.0 - consts.p) * d.p0 * d.p0);
            out.push_back({psi0.t_of(k), g.z(i), c2, pred});
        }
    }
    return out;
}

} // namespace volfactor
