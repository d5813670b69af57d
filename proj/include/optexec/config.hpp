#ifndef OPTEXEC_CONFIG_HPP
#define OPTEXEC_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "optexec/params.hpp"

namespace optexec {

/// Flat `key = value` experiment description. Defaults reproduce the
/// desk-scale parameter block used throughout the tests.
struct ExperimentConfig {
    ModelParams<double> params = reference_params<double>(0.0);
    std::vector<double> rho{0.1, 0.5, 0.9};
    std::optional<double> lambda2; // absolute risk aversion, replaces the rho list
    int time_points = 501;
    int x_points = 200;
    int paths = 100000;
    int steps = 4096;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir = "out";
    std::vector<std::string> formats{"csv", "json"};
    int csv_paths = 5;
    double schedule_T = 5000;
    double deterministic_tol = 1e-6;
    int fbsde_paths = 1000;
    double scan_rho = 0.5;

    bool wants(const std::string& format) const;
    /// One validated model per entry of the risk-aversion sweep.
    std::vector<Model<double>> models() const;
    /// kappa * lambda2 for each entry of the sweep.
    std::vector<double> rho_values() const;
    /// Model with the given rho and otherwise identical parameters.
    Model<double> model_at(double rho) const;
};

std::vector<std::string> config_keys();

/// Parses the text of a configuration file. Unknown keys, duplicate keys,
/// malformed numbers and invalid parameter sets raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void check_config(const ExperimentConfig& cfg);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& cfg);
std::map<std::string, std::string> to_map(const ExperimentConfig& cfg);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

} // namespace optexec

#endif // OPTEXEC_CONFIG_HPP
