#pragma once

#include <functional>
#include <variant>

#include "volfactor/errors.hpp"

namespace volfactor {

// Correlation structure rho_i = rho + rho_i^(1) eps, rho_12 = 1 + rho_12^(1) eps
// around the fully correlated base point.
struct CorrelationScheme {
    double rho = 0.5;
    double rho1_slope = 0.0;
    double rho2_slope = -0.5;
    double rho12_slope = -1.0;
    double eps = 0.1;
};

struct PerturbedCorrelations {
    double rho1, rho2, rho12;
};

struct CorrelationVerdict {
    double determinant;   // 1 + 2 r1 r2 r12 - r1^2 - r2^2 - r12^2
    bool valid;
};

// PSD check for the (W, B1, B2) correlation matrix. Verdict-returning.
CorrelationVerdict validate_correlations(double rho1, double rho2, double rho12);

// Throws InvalidCorrelation when eps pushes the triple outside the valid set.
PerturbedCorrelations perturbed_correlations(const CorrelationScheme& scheme);

struct DistortionConstants {
    double p;       // risk aversion, p < 1, p != 0
    double gamma;   // p / (1 - p)
    double q;       // 1 / (1 + gamma rho^2)
};

DistortionConstants distortion_constants(double p, double rho);

// Extended Chacko-Viceira specialization: mu = mu_bar, sigma = sigma_bar/sqrt(z1+z2),
// alpha_i = m - z_i, beta_i = beta_bar sqrt(2 z_i).
struct ChackoViceira {
    double mu_bar = 0.05;
    double sigma_bar = 0.2;
    double m = 26.0;
    double beta_bar = 5.0;
    double T = 1.0;

    double lambda_bar() const { return mu_bar / sigma_bar; }
    // factor stays strictly positive iff m >= beta_bar^2
    bool feller_positive() const { return m >= beta_bar * beta_bar; }
};

struct CvCoefficients {
    double mu, sigma, alpha1, alpha2, beta1, beta2, lambda;
};

CvCoefficients cv_coefficients(const ChackoViceira& model, double z1, double z2);

struct GeneralCoefficients {
    std::function<double(double, double)> mu;
    std::function<double(double, double)> sigma;
    std::function<double(double)> alpha1, alpha2;
    std::function<double(double)> beta1, beta2;
    double T = 1.0;

    double lambda(double z1, double z2) const { return mu(z1, z2) / sigma(z1, z2); }
};

GeneralCoefficients make_coefficients(const ChackoViceira& model);

struct ModelInstance {
    std::variant<ChackoViceira, GeneralCoefficients> spec;

    double horizon() const;
    GeneralCoefficients coefficients() const;
    const ChackoViceira* chacko_viceira() const { return std::get_if<ChackoViceira>(&spec); }
};

struct WealthState {
    double t = 0.0;
    double x = 1.0;   // wealth, > 0
    double z1 = 0.0;
    double z2 = 0.0;
};

} // namespace volfactor
