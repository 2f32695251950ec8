#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "volfactor/grid.hpp"
#include "volfactor/model.hpp"

namespace volfactor {

struct McConfig {
    long n_paths = 100000;
    int n_steps = 500;
    std::uint64_t seed = 12345;
    bool antithetic = true;
    double x0 = 1.0;
    double z0 = 10.0;
};

struct ExperimentConfig {
    ChackoViceira model;      // mu_bar, sigma_bar, m, beta_bar, T
    double p = -1.0;
    CorrelationScheme scheme; // rho, slopes, eps
    Grid2D grid;              // z_max, n_z, n_t, pad_factor
    double theta = 0.5;
    McConfig mc;
    std::string output_dir = "out";
    std::vector<double> figure_eps = {0.1, 0.05};
};

// defaults above are the shipped parameter set
ExperimentConfig default_config();

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);

// validates through the model_core constructors; throws ValidationError
void validate(const ExperimentConfig& cfg);

// FNV-1a over the canonical JSON dump
std::string config_hash(const ExperimentConfig& cfg);

} // namespace volfactor
