#include "optexec/risk.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <ostream>

#include "optexec/hjb.hpp"
#include "optexec/parallel.hpp"
#include "optexec/rng.hpp"

namespace optexec {

double normal_quantile_two_sided(double level) {
    if (!(level > 0 && level < 1)) throw Error("confidence level must lie in (0, 1)");
    if (level == 0.99) return kZ99;
    return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + level / 2);
}

namespace {

double mean_of(const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

double std_dev(const std::vector<double>& v) {
    const double m = mean_of(v);
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - m) * (v[i] - m);
    return std::sqrt(pairwise_sum(d) / static_cast<double>(v.size() - 1));
}

bool close_to_rounding(double a, double b) {
    return std::abs(a - b) <= 16 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(a), std::abs(b)});
}

bool not_above(double a, double b) {
    return a <= b || close_to_rounding(a, b);
}

} // namespace

double log_mean_exp(std::span<const double> u) {
    if (u.empty()) throw Error("log_mean_exp of an empty sample");
    const double mx = *std::max_element(u.begin(), u.end());
    std::vector<double> e(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) e[i] = std::expm1(u[i] - mx);
    return mx + std::log1p(pairwise_sum(e) / static_cast<double>(u.size()));
}

double log_mean_exp_naive(std::span<const double> u) {
    if (u.empty()) throw Error("log_mean_exp of an empty sample");
    std::vector<double> e(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) e[i] = std::exp(u[i]);
    return std::log(pairwise_sum(e) / static_cast<double>(u.size()));
}

RiskEstimate entropic_risk(std::span<const double> xi, double lambda2, double level) {
    if (!(lambda2 > 0)) throw Error("entropic_risk needs lambda2 > 0");
    if (xi.size() < 2) throw Error("entropic_risk needs at least two samples");
    const auto [lo, hi] = std::minmax_element(xi.begin(), xi.end());
    const double base = *lo;
    const std::size_t n = xi.size();
    std::vector<double> e(n), y2(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = std::expm1(-lambda2 * (xi[i] - base));
    const double mean_e = pairwise_sum(e) / static_cast<double>(n);
    const double ybar = 1 + mean_e;

    RiskEstimate r;
    r.level = level;
    r.samples = n;
    r.value = -base + std::log1p(mean_e) / lambda2;
    r.shift = -lambda2 * base;
    r.spread = lambda2 * (*hi - base);
    r.degenerate = *hi == *lo;
    r.std_error = r.degenerate ? 0.0 : std_dev(e) / (std::sqrt(static_cast<double>(n)) * ybar * lambda2);
    r.half_width = normal_quantile_two_sided(level) * r.std_error;
    for (std::size_t i = 0; i < n; ++i) y2[i] = (1 + e[i]) * (1 + e[i]);
    r.effective_samples = (ybar * n) * (ybar * n) / pairwise_sum(y2);
    if (!std::isfinite(r.value)) throw NonFinite("entropic estimate is not finite");
    return r;
}

double exact_entropic(const Lottery& xi, double lambda2) {
    if (xi.probs.size() != xi.values.size() || xi.values.empty()) throw Error("malformed lottery");
    const double base = *std::min_element(xi.values.begin(), xi.values.end());
    std::vector<double> terms(xi.values.size());
    for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = xi.probs[i] * std::expm1(-lambda2 * (xi.values[i] - base));
    return -base + std::log1p(pairwise_sum(terms)) / lambda2;
}

std::vector<double> conditional_entropic(const TwoStageTree& tree, double lambda2) {
    std::vector<double> r(tree.stage2.size());
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = exact_entropic(tree.stage2[k], lambda2);
    return r;
}

double exact_entropic(const TwoStageTree& tree, double lambda2) {
    Lottery flat;
    for (std::size_t k = 0; k < tree.p1.size(); ++k) {
        for (std::size_t i = 0; i < tree.stage2[k].values.size(); ++i) {
            flat.probs.push_back(tree.p1[k] * tree.stage2[k].probs[i]);
            flat.values.push_back(tree.stage2[k].values[i]);
        }
    }
    return exact_entropic(flat, lambda2);
}

AxiomBattery default_battery(std::uint64_t seed) {
    PhiloxStream rng(seed, 0);
    auto uniform = [&rng] { return std::generate_canonical<double, 53>(rng); };
    auto lottery = [&](int n) {
        Lottery l;
        double total = 0;
        for (int i = 0; i < n; ++i) {
            l.probs.push_back(0.05 + uniform());
            l.values.push_back(-5 + 10 * uniform());
            total += l.probs.back();
        }
        for (auto& p : l.probs) p /= total;
        return l;
    };
    AxiomBattery b;
    b.lotteries.push_back({{0.5, 0.5}, {0.0, 1.0}});
    b.lotteries.push_back({{0.5, 0.5}, {2.0, -1.0}});
    for (int n : {2, 3, 3, 4, 5, 6, 6, 8}) b.lotteries.push_back(lottery(n));
    for (int n : {2, 3, 4}) {
        TwoStageTree t;
        const auto first = lottery(n);
        t.p1 = first.probs;
        for (int k = 0; k < n; ++k) t.stage2.push_back(lottery(2 + k));
        b.trees.push_back(t);
    }
    return b;
}

bool AxiomReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const AxiomCheck& c) { return c.passed; });
}

AxiomReport axiom_suite(double lambda2, const AxiomBattery& battery) {
    if (!(lambda2 > 0)) throw Error("axiom suite needs lambda2 > 0");
    AxiomReport rep;
    const auto& L = battery.lotteries;
    for (std::size_t i = 0; i < L.size(); ++i) {
        const std::string name = "lottery " + std::to_string(i);
        const double r = exact_entropic(L[i], lambda2);

        for (double c : {-1.5, 0.25, 3.0}) {
            Lottery shifted = L[i];
            for (auto& v : shifted.values) v += c;
            const double rs = exact_entropic(shifted, lambda2);
            rep.checks.push_back({"translation", name + " c=" + format_number(c), rs, r - c, close_to_rounding(rs, r - c)});
            rep.flagged.push_back({"translation (stated +c sign)", name + " c=" + format_number(c), rs, r + c,
                                   close_to_rounding(rs, r + c)});
        }

        Lottery better = L[i];
        for (std::size_t k = 0; k < better.values.size(); ++k) better.values[k] += 0.1 * (k + 1);
        const double rb = exact_entropic(better, lambda2);
        rep.checks.push_back({"monotonicity", name, rb, r, rb < r});

        for (std::size_t j = 0; j < L.size(); ++j) {
            if (j == i || L[j].values.size() != L[i].values.size()) continue;
            // both payoffs live on the outcome space of lottery i
            const Lottery other{L[i].probs, L[j].values};
            const double r_other = exact_entropic(other, lambda2);
            for (double alpha : {0.25, 0.5, 0.8}) {
                Lottery mix = L[i];
                for (std::size_t k = 0; k < mix.values.size(); ++k)
                    mix.values[k] = alpha * L[i].values[k] + (1 - alpha) * L[j].values[k];
                const double lhs = exact_entropic(mix, lambda2);
                const double rhs = alpha * r + (1 - alpha) * r_other;
                rep.checks.push_back({"convexity", name + " with " + std::to_string(j) + " alpha=" + format_number(alpha),
                                      lhs, rhs, not_above(lhs, rhs)});
            }
        }
    }
    for (std::size_t i = 0; i < battery.trees.size(); ++i) {
        const auto& tree = battery.trees[i];
        const std::string name = "tree " + std::to_string(i);
        const auto cond = conditional_entropic(tree, lambda2);
        Lottery composed{tree.p1, {}}, literal{tree.p1, {}};
        for (double c : cond) {
            composed.values.push_back(-c);
            literal.values.push_back(c);
        }
        const double direct = exact_entropic(tree, lambda2);
        const double nested = exact_entropic(composed, lambda2);
        rep.checks.push_back({"semigroup", name, nested, direct, close_to_rounding(nested, direct)});
        const double lit = exact_entropic(literal, lambda2);
        rep.flagged.push_back({"semigroup (R composed without sign flip)", name, lit, direct, close_to_rounding(lit, direct)});
    }
    return rep;
}

void require_axioms(const AxiomReport& report) {
    for (const auto& c : report.checks)
        if (!c.passed) throw AxiomViolation(c.axiom + " violated on " + c.scenario);
}

ObjectiveEstimate objective_estimate(const Model<double>& mdl, const MarkovControl& ctrl, double t, double x,
                                     const ObjectiveOptions& opts) {
    const auto& p = mdl.params;
    if (opts.paths < 2) throw Error("objective_estimate needs at least two paths");
    if (opts.steps < 2 || (opts.richardson && opts.steps % 2 != 0))
        throw GridError("objective_estimate needs an even step count of at least 2");
    if (!(t >= 0 && t < p.T)) throw OutOfRange("t outside [0, T)");

    const int n = opts.steps;
    const double dt = (p.T - t) / n;
    const double sq = std::sqrt(dt);
    const double lambda2 = p.lambda2;
    const bool risky = lambda2 > 0;
    const bool tilt = opts.tilt && risky && p.m > 0;
    const GridRule rule = ctrl.on_grid(t, p.T, n);
    std::unique_ptr<FeedbackPolicy<double>> tilt_policy;
    if (tilt) tilt_policy = std::make_unique<FeedbackPolicy<double>>(mdl, n, t);

    auto tilt_at = [&](int i, double X) {
        if (!tilt) return 0.0;
        const auto& c = tilt_policy->at(i);
        return -lambda2 * p.m * (c.a_minus_gamma * X + c.b);
    };

    struct State {
        double X, cost = 0, log_lr = 0;
    };
    // Sample-and-hold step: rate frozen at v(t_i, X_i), position averaged over the step in the cost.
    auto step = [&](State& s, int i, double dW, double h_dt) {
        const double v = rule(i, s.X);
        const double h = tilt_at(i, s.X);
        const double dB = dW + h * h_dt;
        const double xn = s.X - v * h_dt + p.m * dB;
        s.cost += running_cost(p, 0.5 * (s.X + xn), v) * h_dt;
        s.log_lr += -h * dB + 0.5 * h * h * h_dt;
        s.X = xn;
    };

    const std::size_t paths = static_cast<std::size_t>(opts.paths);
    std::vector<double> uf(paths), uc(opts.richardson ? paths : 0);
    parallel_for(paths, opts.workers, [&](std::size_t j) {
        NormalStream normal(opts.seed, j);
        State fine{x}, coarse{x};
        if (opts.richardson) {
            for (int i = 0; i < n; i += 2) {
                const double w1 = sq * normal(), w2 = sq * normal();
                step(fine, i, w1, dt);
                step(fine, i + 1, w2, dt);
                step(coarse, i, w1 + w2, 2 * dt);
            }
        } else {
            for (int i = 0; i < n; ++i) step(fine, i, sq * normal(), dt);
        }
        auto exponent = [&](const State& s) {
            const double loss = p.beta * s.X * s.X + s.cost;
            return risky ? lambda2 * loss + s.log_lr : loss;
        };
        uf[j] = exponent(fine);
        if (opts.richardson) uc[j] = exponent(coarse);
        if (!std::isfinite(uf[j]) || (opts.richardson && !std::isfinite(uc[j])))
            throw NonFinite("objective path produced a non-finite loss");
    });

    ObjectiveEstimate out;
    RiskEstimate& r = out.estimate;
    r.level = opts.level;
    r.samples = paths;
    std::vector<double> psi(paths);
    const auto [fmin, fmax] = std::minmax_element(uf.begin(), uf.end());

    if (risky) {
        double shift = *fmax;
        if (opts.richardson) shift = std::max(shift, *std::max_element(uc.begin(), uc.end()));
        r.shift = shift;
        r.spread = *fmax - *fmin;
        if (r.spread > opts.spread_bound)
            throw Overflow("exponent spread " + format_number(r.spread) + " exceeds the configured bound");
        std::vector<double> ef(paths), ec(opts.richardson ? paths : 0);
        for (std::size_t j = 0; j < paths; ++j) ef[j] = std::expm1(uf[j] - shift);
        const double mf = mean_of(ef);
        out.fine = -(shift + std::log1p(mf)) / lambda2;
        std::vector<double> y2(paths);
        for (std::size_t j = 0; j < paths; ++j) y2[j] = (1 + ef[j]) * (1 + ef[j]);
        r.effective_samples = (1 + mf) * (1 + mf) * paths * paths / pairwise_sum(y2);
        for (std::size_t j = 0; j < paths; ++j) psi[j] = -(ef[j] - mf) / (1 + mf) / lambda2;
        if (opts.richardson) {
            for (std::size_t j = 0; j < paths; ++j) ec[j] = std::expm1(uc[j] - shift);
            const double mc = mean_of(ec);
            out.coarse = -(shift + std::log1p(mc)) / lambda2;
            for (std::size_t j = 0; j < paths; ++j) psi[j] = 2 * psi[j] + (ec[j] - mc) / (1 + mc) / lambda2;
        }
    } else {
        const double mf = mean_of(uf);
        out.fine = -mf;
        r.spread = *fmax - *fmin;
        r.effective_samples = static_cast<double>(paths);
        for (std::size_t j = 0; j < paths; ++j) psi[j] = -(uf[j] - mf);
        if (opts.richardson) {
            const double mc = mean_of(uc);
            out.coarse = -mc;
            for (std::size_t j = 0; j < paths; ++j) psi[j] = 2 * psi[j] + (uc[j] - mc);
        }
    }
    r.value = opts.richardson ? 2 * out.fine - out.coarse : out.fine;
    r.std_error = std_dev(psi) / std::sqrt(static_cast<double>(paths));
    r.half_width = normal_quantile_two_sided(opts.level) * r.std_error;
    r.degenerate = r.std_error == 0;
    if (!std::isfinite(r.value)) throw NonFinite("objective estimate is not finite");
    if (opts.keep_influence) out.influence = std::move(psi);
    return out;
}

PairedDifference paired_difference(const ObjectiveEstimate& a, const ObjectiveEstimate& b) {
    if (a.influence.size() != b.influence.size() || a.influence.size() < 2)
        throw Error("paired difference needs influence values from equally sized runs");
    std::vector<double> d(a.influence.size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = a.influence[j] - b.influence[j];
    return {a.estimate.value - b.estimate.value, std_dev(d) / std::sqrt(static_cast<double>(d.size()))};
}

ScanResult suboptimality_scan(const Model<double>& mdl, const std::vector<MarkovControl>& family, double t, double x,
                              ObjectiveOptions opts) {
    opts.keep_influence = true;
    ScanResult out;
    out.w = value_function(mdl, t, x);
    for (const auto& ctrl : family) {
        auto est = objective_estimate(mdl, ctrl, t, x, opts);
        out.rows.push_back({ctrl.tag(), est.estimate.value, est.estimate.std_error, out.w - est.estimate.value,
                            est.estimate.half_width});
        out.estimates.push_back(std::move(est));
    }
    return out;
}

std::vector<MarkovControl> standard_family(const Model<double>& mdl) {
    const auto opt = optimal_control(mdl);
    std::vector<MarkovControl> f{MarkovControl("v*", [opt](double t, double x) { return opt(t, x); },
                                               [opt](double t0, double T, int n) { return opt.on_grid(t0, T, n); })};
    for (const char* eps : {"0.05", "0.1", "0.2"}) {
        const double e = std::stod(eps);
        f.push_back(affine_control(opt, 1 + e, 0, std::string("(1+") + eps + ")v*"));
        f.push_back(affine_control(opt, 1 - e, 0, std::string("(1-") + eps + ")v*"));
    }
    f.push_back(affine_control(opt, 1, 0.1 * mdl.params.v_bar, "v*+0.1v_bar"));
    return f;
}

void write_scan_csv(std::ostream& os, const ScanResult& scan) {
    os << "tag,J,stderr,gap,halfwidth\n";
    for (const auto& r : scan.rows)
        os << r.tag << ',' << format_number(r.J) << ',' << format_number(r.std_error) << ',' << format_number(r.gap)
           << ',' << format_number(r.half_width) << '\n';
}

} // namespace optexec
