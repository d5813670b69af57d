#ifndef OPTEXEC_RISK_HPP
#define OPTEXEC_RISK_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "optexec/dynamics.hpp"

namespace optexec {

/// Two-sided normal quantile for the default 99% intervals.
inline constexpr double kZ99 = 2.5758293035489004;

double normal_quantile_two_sided(double level);

struct RiskEstimate {
    double value = 0;
    double std_error = 0;
    double half_width = 0;
    double level = 0.99;
    std::size_t samples = 0;
    double shift = 0;         // exponent subtracted before exponentiating
    double spread = 0;        // max − min of the exponents
    double effective_samples = 0;
    bool degenerate = false;  // all samples equal
};

/// log(mean(exp(u))) with max-shift stabilization.
double log_mean_exp(std::span<const double> u);
/// Same quantity without the shift, for comparison on moderate inputs.
double log_mean_exp_naive(std::span<const double> u);

/// (1/λ₂) log mean exp(−λ₂ ξ) with a delta-method standard error.
RiskEstimate entropic_risk(std::span<const double> xi, double lambda2, double level = 0.99);

class AxiomViolation : public Error {
public:
    using Error::Error;
};

/// Finite distribution for exact evaluation.
struct Lottery {
    std::vector<double> probs;
    std::vector<double> values;
};

/// Two-period tree: first-stage branch k has probability p1[k] and leads to
/// the lottery stage2[k].
struct TwoStageTree {
    std::vector<double> p1;
    std::vector<Lottery> stage2;
};

double exact_entropic(const Lottery& xi, double lambda2);
/// Conditional risk at the intermediate nodes.
std::vector<double> conditional_entropic(const TwoStageTree& tree, double lambda2);
/// Unconditional risk of the terminal payoff of a tree.
double exact_entropic(const TwoStageTree& tree, double lambda2);

struct AxiomCheck {
    std::string axiom;
    std::string scenario;
    double lhs = 0;
    double rhs = 0;
    bool passed = false;
};

struct AxiomBattery {
    std::vector<Lottery> lotteries;
    std::vector<TwoStageTree> trees;
};

AxiomBattery default_battery(std::uint64_t seed = 7);

struct AxiomReport {
    std::vector<AxiomCheck> checks;
    std::vector<AxiomCheck> flagged; // stated variants that the entropic measure does not satisfy
    bool passed() const;
};

/// Convexity, decreasing monotonicity, translation R(ξ + c) = R(ξ) − c and
/// the semigroup identity R(0, ξ) = R(0, −R(1, ξ)), evaluated exactly.
AxiomReport axiom_suite(double lambda2, const AxiomBattery& battery);
void require_axioms(const AxiomReport& report);

struct ObjectiveOptions {
    int paths = 100000;
    int steps = 4096;
    std::uint64_t seed = 1;
    int workers = 1;
    bool richardson = true;   // combine N and N/2 steps as 2 J_N − J_{N/2}
    bool tilt = true;         // sample under the measure tilted by the optimal backward control
    double level = 0.99;
    double spread_bound = 700; // Overflow when the exponent spread exceeds this
    bool keep_influence = false;
};

struct ObjectiveEstimate {
    RiskEstimate estimate;
    double fine = 0;   // J at N steps
    double coarse = 0; // J at N/2 steps
    std::vector<double> influence; // per-path influence values of the reported estimate
};

/// J(t, x; ctrl) = −(1/λ₂) log E[exp(λ₂(βX(T)² + ∫φ))], or the plain mean of
/// −βX(T)² − ∫φ when λ₂ = 0.
ObjectiveEstimate objective_estimate(const Model<double>& mdl, const MarkovControl& ctrl, double t, double x,
                                     const ObjectiveOptions& opts);

struct PairedDifference {
    double diff = 0;
    double std_error = 0;
};

/// A − B for two estimates produced from the same seed and path count.
PairedDifference paired_difference(const ObjectiveEstimate& a, const ObjectiveEstimate& b);

struct ScanRow {
    std::string tag;
    double J = 0;
    double std_error = 0;
    double gap = 0; // w(t, x) − J
    double half_width = 0;
};

struct ScanResult {
    double w = 0;
    std::vector<ScanRow> rows;
    std::vector<ObjectiveEstimate> estimates;
};

ScanResult suboptimality_scan(const Model<double>& mdl, const std::vector<MarkovControl>& family, double t, double x,
                              ObjectiveOptions opts);

/// {v*, (1 ± ε)v* for ε ∈ {0.05, 0.1, 0.2}, v* + 0.1 v̄}
std::vector<MarkovControl> standard_family(const Model<double>& mdl);

void write_scan_csv(std::ostream& os, const ScanResult& scan);

} // namespace optexec

#endif // OPTEXEC_RISK_HPP
