#pragma once

#include <string>
#include <vector>

#include "volfactor/config.hpp"
#include "volfactor/mc.hpp"
#include "volfactor/pde2d.hpp"
#include "volfactor/verifier.hpp"

namespace volfactor {

void ensure_dir(const std::string& path);

// full double precision (%.17g); throws StabilityFailure on non-finite values
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

void write_diagonal_csv(const std::string& path, const std::vector<DiagonalErrorRow>& rows);

void write_text(const std::string& path, const std::string& text);

std::string mc_report_json(const McEstimate& est, const McConfig& mc, long escaped_paths);

struct VerificationReport {
    double M = 0.0;
    std::vector<std::pair<double, double>> sandwich_violation_fraction;  // (eps, fraction)
    ResidualOrder residual;
    std::vector<PhiComparison> phi;
    std::vector<std::pair<double, double>> psi12_quarter_identity;  // (z, ratio fd/closed)
};

std::string verification_report_json(const VerificationReport& rep);

std::string manifest_json(const ExperimentConfig& cfg, const std::vector<std::string>& artifacts,
                          double wall_time_s);

} // namespace volfactor
