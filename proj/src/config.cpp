#include "volfactor/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace volfactor {

using nlohmann::json;

ExperimentConfig default_config() { return {}; }

namespace {

void expect_keys(const json& j, const std::string& block, const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ParseError("unknown key '" + it.key() + "' in block '" + block + "'");
    }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

json to_json(const ExperimentConfig& c) {
    return json{
        {"model", {{"mu_bar", c.model.mu_bar}, {"sigma_bar", c.model.sigma_bar},
                   {"m", c.model.m}, {"beta_bar", c.model.beta_bar}, {"p", c.p},
                   {"T", c.model.T}}},
        {"correlation", {{"rho", c.scheme.rho}, {"rho1_slope", c.scheme.rho1_slope},
                         {"rho2_slope", c.scheme.rho2_slope},
                         {"rho12_slope", c.scheme.rho12_slope}, {"eps", c.scheme.eps}}},
        {"grid", {{"z_max", c.grid.z_max}, {"n_z", c.grid.n_z}, {"n_t", c.grid.n_t},
                  {"pad_factor", c.grid.pad_factor}, {"theta", c.theta}}},
        {"mc", {{"n_paths", c.mc.n_paths}, {"n_steps", c.mc.n_steps}, {"seed", c.mc.seed},
                {"antithetic", c.mc.antithetic}, {"x0", c.mc.x0}, {"z0", c.mc.z0}}},
        {"output_dir", c.output_dir},
        {"figure_eps", c.figure_eps},
    };
}

} // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("config root must be a JSON object");
    expect_keys(j, "<root>", {"model", "correlation", "grid", "mc", "output_dir", "figure_eps"});
    ExperimentConfig c;
    try {
        if (j.contains("model")) {
            const auto& m = j.at("model");
            expect_keys(m, "model", {"mu_bar", "sigma_bar", "m", "beta_bar", "p", "T"});
            get_to(m, "mu_bar", c.model.mu_bar);
            get_to(m, "sigma_bar", c.model.sigma_bar);
            get_to(m, "m", c.model.m);
            get_to(m, "beta_bar", c.model.beta_bar);
            get_to(m, "p", c.p);
            get_to(m, "T", c.model.T);
        }
        if (j.contains("correlation")) {
            const auto& r = j.at("correlation");
            expect_keys(r, "correlation",
                        {"rho", "rho1_slope", "rho2_slope", "rho12_slope", "eps"});
            get_to(r, "rho", c.scheme.rho);
            get_to(r, "rho1_slope", c.scheme.rho1_slope);
            get_to(r, "rho2_slope", c.scheme.rho2_slope);
            get_to(r, "rho12_slope", c.scheme.rho12_slope);
            get_to(r, "eps", c.scheme.eps);
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            expect_keys(g, "grid", {"z_max", "n_z", "n_t", "pad_factor", "theta"});
            get_to(g, "z_max", c.grid.z_max);
            get_to(g, "n_z", c.grid.n_z);
            get_to(g, "n_t", c.grid.n_t);
            get_to(g, "pad_factor", c.grid.pad_factor);
            get_to(g, "theta", c.theta);
        }
        if (j.contains("mc")) {
            const auto& m = j.at("mc");
            expect_keys(m, "mc", {"n_paths", "n_steps", "seed", "antithetic", "x0", "z0"});
            get_to(m, "n_paths", c.mc.n_paths);
            get_to(m, "n_steps", c.mc.n_steps);
            get_to(m, "seed", c.mc.seed);
            get_to(m, "antithetic", c.mc.antithetic);
            get_to(m, "x0", c.mc.x0);
            get_to(m, "z0", c.mc.z0);
        }
        get_to(j, "output_dir", c.output_dir);
        get_to(j, "figure_eps", c.figure_eps);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config field error: ") + e.what());
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
    return to_json(cfg).dump(2);
}

void validate(const ExperimentConfig& c) {
    try {
        (void)distortion_constants(c.p, c.scheme.rho);
        (void)perturbed_correlations(c.scheme);
    } catch (const Error& e) {
        throw ValidationError(e.what());
    }
    if (!(c.model.sigma_bar > 0.0)) throw ValidationError("sigma_bar must be positive");
    if (!(c.model.beta_bar > 0.0)) throw ValidationError("beta_bar must be positive");
    if (!(c.model.m >= 1.0)) throw ValidationError("mean level m must be >= 1");
    if (!(c.model.T > 0.0)) throw ValidationError("horizon T must be positive");
    if (c.grid.n_z < 4 || c.grid.n_t < 1) throw ValidationError("grid too small");
    if (!(c.grid.z_max > 0.0)) throw ValidationError("z_max must be positive");
    if (!(c.grid.pad_factor >= 1.0)) throw ValidationError("pad_factor must be >= 1");
    if (!(c.theta >= 0.0 && c.theta <= 1.0)) throw ValidationError("theta must be in [0, 1]");
    if (c.mc.n_paths < 2 || c.mc.n_steps < 1) throw ValidationError("mc block too small");
    if (!(c.mc.x0 > 0.0)) throw ValidationError("x0 must be positive");
    if (!(c.mc.z0 >= 0.0)) throw ValidationError("z0 must be nonnegative");
    for (double e : c.figure_eps)
        if (!(e >= 0.0)) throw ValidationError("figure eps must be nonnegative");
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string s = to_json(cfg).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace volfactor
