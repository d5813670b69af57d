#ifndef OPTEXEC_DYNAMICS_HPP
#define OPTEXEC_DYNAMICS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "optexec/closed_form.hpp"

namespace optexec {

/// Trading rate as a function of the step index and position on a uniform grid.
using GridRule = std::function<double(int, double)>;

/// Deterministic Markov feedback rule v(t, x).
class MarkovControl {
public:
    using Rule = std::function<double(double, double)>;
    using Binder = std::function<GridRule(double t0, double T, int steps)>;

    MarkovControl(std::string tag, Rule rule, Binder binder = {})
        : tag_(std::move(tag)), rule_(std::move(rule)), binder_(std::move(binder)) {}

    const std::string& tag() const { return tag_; }
    double operator()(double t, double x) const { return rule_(t, x); }

    /// Rule specialized to the grid t_i = t0 + i (T - t0) / steps.
    GridRule on_grid(double t0, double T, int steps) const;

private:
    std::string tag_;
    Rule rule_;
    Binder binder_;
};

MarkovControl optimal_control(const Model<double>& mdl);
MarkovControl constant_control(double v, std::string tag = "constant");
/// scale * base(t, x) + shift
MarkovControl affine_control(const MarkovControl& base, double scale, double shift, std::string tag);

struct BrownianIncrements {
    double dt = 0;
    std::vector<double> dB1, dB2;

    int steps() const { return static_cast<int>(dB1.size()); }
};

/// Increments of (B1, B2) over `steps` equal steps of [0, horizon], drawn from
/// Philox substream `path` of `seed`.
BrownianIncrements draw_increments(int steps, double horizon, std::uint64_t seed, std::uint64_t path);
/// Sums consecutive blocks of `factor` increments.
BrownianIncrements coarsen(const BrownianIncrements& fine, int factor);

enum class BackwardConvention {
    Recast,  // dY = g̃ dt − Z̃·dB, matching the proof's recast objective
    Literal, // dY = −g̃ dt + Z̃·dB, the forward-backward system read literally
};

enum class BackwardScheme {
    Euler,    // trapezoid on the dt terms, left point on the dB terms
    Milstein, // adds ½ m² (a − γ)(ΔB₁² − Δt)
};

struct ClosedLoopOptions {
    BackwardConvention convention = BackwardConvention::Recast;
    BackwardScheme scheme = BackwardScheme::Euler;
};

struct SimPath {
    std::string tag;
    std::vector<double> t, X, S, S_tilde, v, Pi0_direct, Pi0_closed, Y;
    std::vector<double> dB1, dB2;
    double eps_T = 0; // Y(T) + βX(T)², closed loop only
};

SimPath simulate_forward(const ModelParams<double>& p, const MarkovControl& ctrl, const BrownianIncrements& dB);
SimPath simulate_forward(const ModelParams<double>& p, const MarkovControl& ctrl, int steps, std::uint64_t seed,
                         std::uint64_t path = 0);

SimPath simulate_closed_loop(const FeedbackPolicy<double>& policy, const BrownianIncrements& dB,
                             ClosedLoopOptions opts = {});
SimPath simulate_closed_loop(const Model<double>& mdl, int steps, std::uint64_t seed, std::uint64_t path = 0,
                             ClosedLoopOptions opts = {});

/// max over the grid of |Pi0_direct − Pi0_closed|
double pnl_identity_check(const SimPath& path);

/// Long-format CSV: path,t,X,S,S_tilde,v,Pi0_direct,Pi0_closed,Y
void write_paths_csv(std::ostream& os, const std::vector<SimPath>& paths);
std::string format_number(double v);

/// Empirical convergence order of an RMS error measured on nested grids.
struct ConvergenceStudy {
    std::vector<int> steps;
    std::vector<double> rms;
    double order = 0;    // slope of −log rms against log steps
    double order_se = 0; // jackknife standard error over path blocks
    int paths = 0;
};

ConvergenceStudy convergence_from_squares(const std::vector<int>& steps, const std::vector<std::vector<double>>& sq,
                                          int blocks = 20);

/// RMS of ε_T over nested grids driven by the same finest-level increments.
ConvergenceStudy terminal_mismatch_study(const Model<double>& mdl, const std::vector<int>& steps, int paths,
                                         std::uint64_t seed, int workers, ClosedLoopOptions opts = {});

/// RMS of the terminal P&L identity gap over nested grids.
ConvergenceStudy pnl_identity_study(const ModelParams<double>& p, const MarkovControl& ctrl,
                                    const std::vector<int>& steps, int paths, std::uint64_t seed, int workers);

} // namespace optexec

#endif // OPTEXEC_DYNAMICS_HPP
