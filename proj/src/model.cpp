#include "volfactor/model.hpp"

#include <cmath>

namespace volfactor {

CorrelationVerdict validate_correlations(double rho1, double rho2, double rho12) {
    const double d = 1.0 + 2.0 * rho1 * rho2 * rho12
                   - rho1 * rho1 - rho2 * rho2 - rho12 * rho12;
    const bool valid = d >= 0.0 && std::abs(rho12) <= 1.0
                    && std::abs(rho1) < 1.0 && std::abs(rho2) < 1.0;
    return {d, valid};
}

PerturbedCorrelations perturbed_correlations(const CorrelationScheme& s) {
    if (!std::isfinite(s.rho) || !std::isfinite(s.eps) || s.eps < 0.0)
        throw InvalidCorrelation("correlation scheme fields must be finite, eps >= 0");
    if (std::abs(s.rho) >= 1.0)
        throw InvalidCorrelation("|rho| must be < 1");
    if (s.eps > 0.0 && s.rho12_slope >= 0.0)
        throw InvalidCorrelation("rho12 slope must be negative when eps > 0");
    PerturbedCorrelations out{s.rho + s.rho1_slope * s.eps,
                              s.rho + s.rho2_slope * s.eps,
                              1.0 + s.rho12_slope * s.eps};
    const auto v = validate_correlations(out.rho1, out.rho2, out.rho12);
    if (!v.valid)
        throw InvalidCorrelation("perturbed correlations violate the covariance condition, determinant = "
                                 + std::to_string(v.determinant));
    return out;
}

DistortionConstants distortion_constants(double p, double rho) {
    if (!(p < 1.0) || p == 0.0)
        throw InvalidExponent("power utility exponent requires p < 1, p != 0");
    if (std::abs(rho) >= 1.0)
        throw InvalidExponent("|rho| must be < 1");
    const double gamma = p / (1.0 - p);
    const double q = 1.0 / (1.0 + gamma * rho * rho);
    return {p, gamma, q};
}

CvCoefficients cv_coefficients(const ChackoViceira& model, double z1, double z2) {
    if (!(z1 + z2 > 0.0))
        throw DomainError("cv_coefficients requires z1 + z2 > 0");
    const double s = model.sigma_bar / std::sqrt(z1 + z2);
    return {model.mu_bar, s,
            model.m - z1, model.m - z2,
            model.beta_bar * std::sqrt(2.0 * z1),
            model.beta_bar * std::sqrt(2.0 * z2),
            model.mu_bar / s};
}

GeneralCoefficients make_coefficients(const ChackoViceira& model) {
    GeneralCoefficients g;
    g.mu = [m = model](double, double) { return m.mu_bar; };
    g.sigma = [m = model](double z1, double z2) { return m.sigma_bar / std::sqrt(z1 + z2); };
    g.alpha1 = [m = model](double z) { return m.m - z; };
    g.alpha2 = g.alpha1;
    g.beta1 = [m = model](double z) { return m.beta_bar * std::sqrt(2.0 * std::max(z, 0.0)); };
    g.beta2 = g.beta1;
    g.T = model.T;
    return g;
}

double ModelInstance::horizon() const {
    if (auto* cv = std::get_if<ChackoViceira>(&spec)) return cv->T;
    return std::get<GeneralCoefficients>(spec).T;
}

GeneralCoefficients ModelInstance::coefficients() const {
    if (auto* cv = std::get_if<ChackoViceira>(&spec)) return make_coefficients(*cv);
    return std::get<GeneralCoefficients>(spec);
}

} // namespace volfactor
