#include "optexec/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "optexec/hjb.hpp"
#include "optexec/parallel.hpp"
#include "optexec/rng.hpp"

namespace optexec {

GridRule MarkovControl::on_grid(double t0, double T, int steps) const {
    if (binder_) return binder_(t0, T, steps);
    const double dt = (T - t0) / steps;
    return [rule = rule_, t0, dt, T, steps](int i, double x) { return rule(i == steps ? T : t0 + i * dt, x); };
}

MarkovControl optimal_control(const Model<double>& mdl) {
    return MarkovControl(
        "optimal", [mdl](double t, double x) { return optimal_rate(mdl, t, x); },
        [mdl](double t0, double T, int steps) -> GridRule {
            if (T != mdl.params.T) throw GridError("control grid horizon differs from the model horizon");
            auto policy = std::make_shared<FeedbackPolicy<double>>(mdl, steps, t0);
            return [policy](int i, double x) { return policy->rate(i, x); };
        });
}

MarkovControl constant_control(double v, std::string tag) {
    return MarkovControl(std::move(tag), [v](double, double) { return v; },
                         [v](double, double, int) -> GridRule { return [v](int, double) { return v; }; });
}

MarkovControl affine_control(const MarkovControl& base, double scale, double shift, std::string tag) {
    return MarkovControl(
        std::move(tag), [base, scale, shift](double t, double x) { return scale * base(t, x) + shift; },
        [base, scale, shift](double t0, double T, int steps) -> GridRule {
            auto inner = base.on_grid(t0, T, steps);
            return [inner, scale, shift](int i, double x) { return scale * inner(i, x) + shift; };
        });
}

BrownianIncrements draw_increments(int steps, double horizon, std::uint64_t seed, std::uint64_t path) {
    if (steps < 1 || !(horizon > 0)) throw GridError("increments need steps >= 1 and a positive horizon");
    BrownianIncrements b;
    b.dt = horizon / steps;
    b.dB1.resize(steps);
    b.dB2.resize(steps);
    NormalStream normal(seed, path);
    const double sq = std::sqrt(b.dt);
    for (int i = 0; i < steps; ++i) {
        b.dB1[i] = sq * normal();
        b.dB2[i] = sq * normal();
    }
    return b;
}

BrownianIncrements coarsen(const BrownianIncrements& fine, int factor) {
    if (factor < 1 || fine.steps() % factor != 0) throw GridError("coarsening factor must divide the step count");
    BrownianIncrements c;
    const int n = fine.steps() / factor;
    c.dt = fine.dt * factor;
    c.dB1.assign(n, 0.0);
    c.dB2.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < factor; ++k) {
            c.dB1[i] += fine.dB1[i * factor + k];
            c.dB2[i] += fine.dB2[i * factor + k];
        }
    }
    return c;
}

namespace {

SimPath run_path(const ModelParams<double>& p, const GridRule& rule, const BrownianIncrements& dB,
                 const FeedbackPolicy<double>* policy, ClosedLoopOptions opts) {
    const int n = dB.steps();
    if (n < 2) throw GridError("simulation needs at least 2 steps");
    if (std::abs(dB.dt * n - p.T) > 1e-9 * p.T) throw GridError("increments do not span [0, T]");
    const double dt = dB.dt;

    SimPath path;
    path.dB1 = dB.dB1;
    path.dB2 = dB.dB2;
    for (auto* v : {&path.t, &path.X, &path.S, &path.S_tilde, &path.v, &path.Pi0_direct, &path.Pi0_closed})
        v->resize(n + 1);
    for (int i = 0; i <= n; ++i) path.t[i] = i == n ? p.T : i * dt;

    path.X[0] = p.x0;
    path.S[0] = p.s0;
    path.Pi0_direct[0] = 0;
    path.Pi0_closed[0] = 0;
    if (policy) {
        path.Y.resize(n + 1);
        path.Y[0] = policy->value(0, p.x0);
    }

    double integral = 0, sum_v2 = 0, sum_vdB1 = 0, sum_XdB2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = path.X[i], s = path.S[i];
        const double v = rule(i, x);
        path.v[i] = v;
        path.S_tilde[i] = s - p.eta * v;

        const double xn = x - v * dt + p.m * dB.dB1[i];
        const double sn = s - p.gamma * v * dt + p.gamma * p.m * dB.dB1[i] + p.sigma * dB.dB2[i];
        path.X[i + 1] = xn;
        path.S[i + 1] = sn;

        // Integral of (S0 − S̃) dX: trapezoid over the drift part, left point on the martingale part.
        const double f = p.s0 - s + p.eta * v;
        const double f_next = p.s0 - sn + p.eta * v;
        integral += 0.5 * (f + f_next) * (-v * dt) + f * p.m * dB.dB1[i];
        path.Pi0_direct[i + 1] = xn * (sn - p.s0) + integral;

        sum_v2 += v * v * dt;
        sum_vdB1 += v * dB.dB1[i];
        sum_XdB2 += x * dB.dB2[i];
        const double t = path.t[i + 1];
        path.Pi0_closed[i + 1] = p.gamma / 2 * (xn * xn - p.x0 * p.x0) + p.gamma * p.m * p.m * t / 2
                                 - p.eta * sum_v2 + p.eta * p.m * sum_vdB1 + p.sigma * sum_XdB2;

        if (policy) {
            // Trapezoid on the dt part, left point on the martingale part.
            const auto z = policy->controls(i, x);
            const auto zn = policy->controls(i + 1, xn);
            const double vn = policy->rate(i + 1, xn);
            const double g = 0.5 * (running_cost(p, x, v) + p.lambda2 / 2 * (z.zt1 * z.zt1 + z.zt2 * z.zt2)
                                    + running_cost(p, xn, vn) + p.lambda2 / 2 * (zn.zt1 * zn.zt1 + zn.zt2 * zn.zt2));
            const double mart = z.zt1 * dB.dB1[i] + z.zt2 * dB.dB2[i];
            double y = path.Y[i];
            if (opts.convention == BackwardConvention::Recast)
                y += g * dt - mart;
            else
                y += -g * dt + mart;
            if (opts.scheme == BackwardScheme::Milstein) {
                const double corr = 0.5 * p.m * p.m * policy->at(i).a_minus_gamma * (dB.dB1[i] * dB.dB1[i] - dt);
                y += opts.convention == BackwardConvention::Recast ? corr : -corr;
            }
            path.Y[i + 1] = y;
        }

        if (!std::isfinite(xn) || !std::isfinite(sn) || !std::isfinite(path.Pi0_direct[i + 1])
            || (policy && !std::isfinite(path.Y[i + 1])))
            throw NonFinite("state became non-finite at step " + std::to_string(i + 1));
    }
    path.v[n] = rule(n, path.X[n]);
    path.S_tilde[n] = path.S[n] - p.eta * path.v[n];
    if (policy) path.eps_T = path.Y[n] + p.beta * path.X[n] * path.X[n];
    return path;
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

std::vector<int> check_levels(std::vector<int> steps) {
    if (steps.size() < 2) throw GridError("convergence study needs at least two levels");
    std::sort(steps.begin(), steps.end());
    for (int s : steps)
        if (s < 2 || steps.back() % s != 0) throw GridError("levels must divide the finest level");
    return steps;
}

} // namespace

SimPath simulate_forward(const ModelParams<double>& p, const MarkovControl& ctrl, const BrownianIncrements& dB) {
    auto path = run_path(p, ctrl.on_grid(0, p.T, dB.steps()), dB, nullptr, {});
    path.tag = ctrl.tag();
    return path;
}

SimPath simulate_forward(const ModelParams<double>& p, const MarkovControl& ctrl, int steps, std::uint64_t seed,
                         std::uint64_t path) {
    if (steps < 2) throw GridError("simulation needs at least 2 steps");
    return simulate_forward(p, ctrl, draw_increments(steps, p.T, seed, path));
}

SimPath simulate_closed_loop(const FeedbackPolicy<double>& policy, const BrownianIncrements& dB,
                             ClosedLoopOptions opts) {
    if (policy.steps() != dB.steps() || policy.t0() != 0) throw GridError("policy grid does not match increments");
    const GridRule rule = [&policy](int i, double x) { return policy.rate(i, x); };
    auto path = run_path(policy.model().params, rule, dB, &policy, opts);
    path.tag = "optimal";
    return path;
}

SimPath simulate_closed_loop(const Model<double>& mdl, int steps, std::uint64_t seed, std::uint64_t path,
                             ClosedLoopOptions opts) {
    if (steps < 2) throw GridError("simulation needs at least 2 steps");
    const FeedbackPolicy<double> policy(mdl, steps);
    return simulate_closed_loop(policy, draw_increments(steps, mdl.params.T, seed, path), opts);
}

double pnl_identity_check(const SimPath& path) {
    double gap = 0;
    for (std::size_t i = 0; i < path.Pi0_direct.size(); ++i)
        gap = std::max(gap, std::abs(path.Pi0_direct[i] - path.Pi0_closed[i]));
    return gap;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_paths_csv(std::ostream& os, const std::vector<SimPath>& paths) {
    os << "path,t,X,S,S_tilde,v,Pi0_direct,Pi0_closed,Y\n";
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const auto& p = paths[k];
        for (std::size_t i = 0; i < p.t.size(); ++i) {
            os << k << ',' << format_number(p.t[i]) << ',' << format_number(p.X[i]) << ',' << format_number(p.S[i])
               << ',' << format_number(p.S_tilde[i]) << ',' << format_number(p.v[i]) << ','
               << format_number(p.Pi0_direct[i]) << ',' << format_number(p.Pi0_closed[i]) << ','
               << (p.Y.empty() ? std::string("nan") : format_number(p.Y[i])) << '\n';
        }
    }
}

ConvergenceStudy convergence_from_squares(const std::vector<int>& steps, const std::vector<std::vector<double>>& sq,
                                          int blocks) {
    ConvergenceStudy out;
    out.steps = steps;
    const std::size_t L = steps.size();
    const std::size_t n = sq.front().size();
    out.paths = static_cast<int>(n);
    std::vector<double> logn(L);
    for (std::size_t l = 0; l < L; ++l) logn[l] = std::log(static_cast<double>(steps[l]));

    auto slope_without = [&](std::size_t lo, std::size_t hi, std::vector<double>* rms) {
        std::vector<double> y(L);
        for (std::size_t l = 0; l < L; ++l) {
            double s = 0;
            std::size_t count = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j >= lo && j < hi) continue;
                s += sq[l][j];
                ++count;
            }
            const double r = std::sqrt(s / count);
            if (rms) rms->push_back(r);
            y[l] = -std::log(r);
        }
        return ols_slope(logn, y);
    };

    out.order = slope_without(0, 0, &out.rms);
    const std::size_t B = std::min<std::size_t>(blocks, n);
    if (B >= 2) {
        std::vector<double> est(B);
        double mean = 0;
        for (std::size_t b = 0; b < B; ++b) {
            est[b] = slope_without(n * b / B, n * (b + 1) / B, nullptr);
            mean += est[b];
        }
        mean /= B;
        double ss = 0;
        for (double e : est) ss += (e - mean) * (e - mean);
        out.order_se = std::sqrt((B - 1.0) / B * ss);
    }
    return out;
}

ConvergenceStudy terminal_mismatch_study(const Model<double>& mdl, const std::vector<int>& steps_in, int paths,
                                         std::uint64_t seed, int workers, ClosedLoopOptions opts) {
    const auto steps = check_levels(steps_in);
    const int finest = steps.back();
    std::vector<std::unique_ptr<FeedbackPolicy<double>>> policies;
    for (int s : steps) policies.push_back(std::make_unique<FeedbackPolicy<double>>(mdl, s));
    std::vector<std::vector<double>> sq(steps.size(), std::vector<double>(paths));
    parallel_for(paths, workers, [&](std::size_t j) {
        const auto fine = draw_increments(finest, mdl.params.T, seed, j);
        for (std::size_t l = 0; l < steps.size(); ++l) {
            const auto path = simulate_closed_loop(*policies[l], coarsen(fine, finest / steps[l]), opts);
            sq[l][j] = path.eps_T * path.eps_T;
        }
    });
    return convergence_from_squares(steps, sq);
}

ConvergenceStudy pnl_identity_study(const ModelParams<double>& p, const MarkovControl& ctrl,
                                    const std::vector<int>& steps_in, int paths, std::uint64_t seed, int workers) {
    const auto steps = check_levels(steps_in);
    const int finest = steps.back();
    std::vector<GridRule> rules;
    for (int s : steps) rules.push_back(ctrl.on_grid(0, p.T, s));
    std::vector<std::vector<double>> sq(steps.size(), std::vector<double>(paths));
    parallel_for(paths, workers, [&](std::size_t j) {
        const auto fine = draw_increments(finest, p.T, seed, j);
        for (std::size_t l = 0; l < steps.size(); ++l) {
            const auto path = run_path(p, rules[l], coarsen(fine, finest / steps[l]), nullptr, {});
            const double g = pnl_identity_check(path);
            sq[l][j] = g * g;
        }
    });
    return convergence_from_squares(steps, sq);
}

} // namespace optexec
