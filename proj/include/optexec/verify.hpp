#ifndef OPTEXEC_VERIFY_HPP
#define OPTEXEC_VERIFY_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "optexec/commands.hpp"

namespace optexec {

struct CheckResult {
    std::string id;
    std::string name;
    bool passed = false;
    bool informational = false; // reported, never fails the suite
    nlohmann::json measured = nlohmann::json::object();
    nlohmann::json tolerance = nlohmann::json::object();
    std::string note;
    double seconds = 0;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    bool boundary = false; // some rho lies within 1e-3 of the admissibility limit
    bool passed() const;
    nlohmann::json to_json() const;
};

/// Named parameter sets used by the Riccati and keystone checks: the
/// configured block at every rho of the sweep (and rho = 0), plus fixed
/// variations with a fast characteristic rate, no permanent impact and
/// no running penalty.
struct NamedModel {
    std::string name;
    Model<double> model;
};
std::vector<NamedModel> riccati_battery(const ExperimentConfig& cfg);
std::vector<NamedModel> keystone_battery(const ExperimentConfig& cfg);

/// Runs the acceptance checks. `only` restricts the run to the listed ids.
/// Failures inside a check are recorded in its result, never thrown.
VerifyReport run_verification(const ExperimentConfig& cfg, std::ostream* progress = nullptr,
                              const std::vector<std::string>& only = {});

/// Writes report.json and manifest.json into cfg.out_dir.
RunManifest cmd_verify(const ExperimentConfig& cfg, VerifyReport& report, std::ostream* log = nullptr);

std::string summary_line(const CheckResult& c);

} // namespace optexec

#endif // OPTEXEC_VERIFY_HPP
