#include "volfactor/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace volfactor {

using nlohmann::json;

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

namespace {

std::string fmt17(double v) {
    if (!std::isfinite(v)) throw StabilityFailure("non-finite value in emitted artifact");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path);
    out << header << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out << ',';
            out << fmt17(r[i]);
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

void write_diagonal_csv(const std::string& path, const std::vector<DiagonalErrorRow>& rows) {
    std::vector<std::vector<double>> data;
    data.reserve(rows.size());
    for (const auto& r : rows)
        data.push_back({r.z, r.psi, r.psi0, r.psi0_eps_psi1, r.err0, r.err1});
    write_csv(path, "z,psi,psi0,psi0_eps_psi1,err0,err1", data);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

std::string mc_report_json(const McEstimate& est, const McConfig& mc, long escaped_paths) {
    if (!std::isfinite(est.mean) || !std::isfinite(est.std_error))
        throw StabilityFailure("non-finite estimate in mc report");
    json j{{"estimate", est.mean},
           {"std_error", est.std_error},
           {"n_effective", est.n_effective},
           {"n_paths", mc.n_paths},
           {"n_steps", mc.n_steps},
           {"seed", mc.seed},
           {"escaped_paths", escaped_paths}};
    return j.dump(2);
}

std::string verification_report_json(const VerificationReport& rep) {
    json sw = json::array();
    for (const auto& [eps, f] : rep.sandwich_violation_fraction)
        sw.push_back({{"eps", eps}, {"violation_fraction", f}});
    json rs = json::array();
    for (const auto& [eps, s] : rep.residual.sup_by_eps)
        rs.push_back({{"eps", eps}, {"sup_residual", s}});
    json phi = json::array();
    for (const auto& c : rep.phi)
        phi.push_back({{"t", c.t}, {"z", c.z}, {"assembled_c2", c.assembled_c2},
                       {"phi_predicted", c.phi_predicted},
                       {"ratio", c.phi_predicted != 0.0 ? c.assembled_c2 / c.phi_predicted : 0.0}});
    json q12 = json::array();
    for (const auto& [z, ratio] : rep.psi12_quarter_identity)
        q12.push_back({{"z", z}, {"fd_over_closed", ratio}});
    json j{{"M", rep.M},
           {"sandwich_violation_fraction", sw},
           {"residual_sup_by_eps", rs},
           {"noise_floor", rep.residual.noise_floor},
           {"fitted_order", rep.residual.fitted_order},
           {"phi_consistency", phi},
           {"psi12_quarter_identity", q12}};
    return j.dump(2);
}

std::string manifest_json(const ExperimentConfig& cfg, const std::vector<std::string>& artifacts,
                          double wall_time_s) {
    json j{{"config", json::parse(config_to_json_text(cfg))},
           {"config_hash", config_hash(cfg)},
           {"tool", "volfactor"},
           {"version", "0.1.0"},
           {"seed", cfg.mc.seed},
           {"wall_time_s", wall_time_s},
           {"artifacts", artifacts}};
    return j.dump(2);
}

} // namespace volfactor
