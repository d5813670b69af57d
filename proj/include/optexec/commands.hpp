#ifndef OPTEXEC_COMMANDS_HPP
#define OPTEXEC_COMMANDS_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "optexec/config.hpp"

namespace optexec {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct OutputFile {
    std::string file; // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string command;
    std::string version = kArtifactVersion;
    std::uint64_t seed = 0;
    std::string config_text;
    std::vector<OutputFile> outputs;
    std::map<std::string, double> timings; // wall-clock seconds

    nlohmann::json to_json() const;
};

// Column order of every CSV is fixed.
inline constexpr const char* kCoeffsHeader = "rho,t,a,b,c,a_minus_gamma,ell,minus_a";
inline constexpr const char* kScheduleHeader = "rho,t,t_scaled,ell,ell_normalized";

/// Policy coefficients on `time_points` equally spaced times of [0, T] for
/// every rho. Writes coeffs.csv and manifest.json.
RunManifest cmd_coeffs(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// ℓ(T − t)/ℓ(T) on [0, schedule_T] for every rho, with time also given in
/// units of 1/ω_ref where ω_ref = γ/(2(η + λ₁)). Writes schedule.csv.
RunManifest cmd_schedule(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Closed-loop paths under v* for every rho. Writes paths_<k>.csv holding
/// the first csv_paths trajectories of sweep entry k, and summary.json.
RunManifest cmd_simulate(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Schedule time scale γ/(2(η + λ₁)). Throws DegenerateRegime when γ = 0.
double schedule_rate(const ModelParams<double>& p);

/// Normalized schedule of one model on n + 1 points of [0, T].
struct ScheduleCurve {
    std::vector<double> t, ell, normalized;
};
ScheduleCurve schedule_curve(const Model<double>& mdl, int points);

/// Argument parsing and dispatch. Exit codes: 0 success, 1 verification
/// failure, 2 configuration error, 3 runtime or numerical error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace optexec

#endif // OPTEXEC_COMMANDS_HPP
