#include "optexec/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "optexec/hjb.hpp"
#include "optexec/parallel.hpp"
#include "optexec/risk.hpp"
#include "optexec/rng.hpp"

namespace optexec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double sup_rel_gap(const std::vector<double>& ref, const std::vector<double>& other) {
    double scale = 0, gap = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        scale = std::max(scale, std::abs(ref[i]));
        gap = std::max(gap, std::abs(ref[i] - other[i]));
    }
    return scale > 0 ? gap / scale : gap;
}

ModelParams<double> with_rho(ModelParams<double> p, double rho) {
    const double kappa = derive(p).kappa;
    p.lambda2 = kappa > 0 ? rho / kappa : 0.0;
    return p;
}

std::vector<NamedModel> variations() {
    std::vector<NamedModel> out;
    ModelParams<double> fast;
    fast.gamma = 1e-4;
    fast.eta = 2e-5;
    fast.sigma = 0.5;
    fast.m = 1e4;
    fast.beta = 1e-3;
    fast.lambda1 = 3e-5;
    fast.v_bar = 1e3;
    fast.T = 5;
    fast.x0 = 1e5;
    fast.s0 = 20;
    out.push_back({"fast-rate rho=0.7", validate(with_rho(fast, 0.7))});

    auto no_impact = reference_params<double>();
    no_impact.gamma = 0;
    out.push_back({"no-permanent-impact rho=0.3", validate(with_rho(no_impact, 0.3))});
    return out;
}

std::vector<double> sweep(const ExperimentConfig& cfg) {
    auto r = cfg.rho_values();
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    return r;
}

Model<double> primary_model(const ExperimentConfig& cfg) {
    if (cfg.lambda2) return cfg.models().front();
    return cfg.model_at(derive(cfg.params).kappa > 0 ? cfg.scan_rho : 0.0);
}

ObjectiveOptions objective_options(const ExperimentConfig& cfg) {
    ObjectiveOptions o;
    o.paths = cfg.paths;
    o.steps = cfg.steps;
    o.seed = cfg.seed;
    o.workers = cfg.workers;
    return o;
}

// Time average of X over [0, window] for paths started at x under v*, with
// the policy of a model whose horizon extends past the window.
struct WindowMean {
    double mean = 0, std_error = 0, max_checkpoint_z = 0;
};

WindowMean early_window_mean(const Model<double>& mdl, double x, double window, int steps, int paths,
                             std::uint64_t seed, int workers) {
    const auto& p = mdl.params;
    const double dt = window / steps;
    const int total = static_cast<int>(std::ceil(p.T / dt));
    const FeedbackPolicy<double> policy(mdl, total);
    const double h = p.T / total;
    const int n = static_cast<int>(std::floor(window / h));
    constexpr int checkpoints = 10;
    std::vector<double> avg(paths);
    std::vector<std::vector<double>> at(checkpoints, std::vector<double>(paths));
    parallel_for(static_cast<std::size_t>(paths), workers, [&](std::size_t j) {
        NormalStream normal(seed, j);
        double X = x, acc = 0;
        const double sq = std::sqrt(h);
        int next = 1;
        for (int i = 0; i < n; ++i) {
            const double xn = X - policy.rate(i, X) * h + p.m * sq * normal();
            acc += 0.5 * (X + xn);
            X = xn;
            if (next <= checkpoints && i + 1 == n * next / checkpoints) at[next++ - 1][j] = X;
        }
        avg[j] = acc / n;
    });
    auto mean_se = [&](const std::vector<double>& v) {
        const double m = pairwise_sum(v) / paths;
        std::vector<double> d(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - m) * (v[i] - m);
        return std::pair{m, std::sqrt(pairwise_sum(d) / (paths - 1) / paths)};
    };
    WindowMean r;
    std::tie(r.mean, r.std_error) = mean_se(avg);
    for (const auto& c : at) {
        const auto [m, se] = mean_se(c);
        r.max_checkpoint_z = std::max(r.max_checkpoint_z, se > 0 ? std::abs(m - x) / se : 0.0);
    }
    return r;
}

std::string temp_dir(const std::string& tag) {
    const auto stamp = Clock::now().time_since_epoch().count();
    return (fs::temp_directory_path() / ("optexec_" + tag + "_" + std::to_string(stamp))).string();
}

std::map<std::string, std::string> data_checksums(const RunManifest& m) {
    std::map<std::string, std::string> out;
    for (const auto& o : m.outputs) out[m.command + "/" + o.file] = o.sha256;
    return out;
}

class Runner {
public:
    Runner(VerifyReport& report, std::ostream* progress, const std::vector<std::string>& only)
        : report_(report), progress_(progress), only_(only.begin(), only.end()) {}

    void run(const std::string& id, const std::string& name, const std::function<void(CheckResult&)>& body,
             bool informational = false) {
        if (!only_.empty() && !only_.count(id)) return;
        CheckResult c;
        c.id = id;
        c.name = name;
        c.informational = informational;
        const auto start = Clock::now();
        try {
            body(c);
        } catch (const std::exception& e) {
            c.passed = false;
            c.note = std::string("error: ") + e.what();
            c.measured["error"] = e.what();
        }
        c.seconds = std::chrono::duration<double>(Clock::now() - start).count();
        if (progress_) *progress_ << summary_line(c) << std::endl;
        report_.checks.push_back(std::move(c));
    }

private:
    VerifyReport& report_;
    std::ostream* progress_;
    std::set<std::string> only_;
};

} // namespace

bool VerifyReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed || c.informational; });
}

json VerifyReport::to_json() const {
    json list = json::array();
    for (const auto& c : checks)
        list.push_back({{"id", c.id}, {"name", c.name}, {"passed", c.passed}, {"informational", c.informational},
                        {"measured", c.measured}, {"tolerance", c.tolerance}, {"note", c.note},
                        {"seconds", c.seconds}});
    return {{"passed", passed()}, {"boundary", boundary}, {"checks", list}};
}

std::string summary_line(const CheckResult& c) {
    const char* status = c.informational ? "INFO" : (c.passed ? "PASS" : "FAIL");
    return std::string("[") + status + "] " + c.id + " " + c.name + ": " + c.note + " (" + fmt(c.seconds, 3) + " s)";
}

std::vector<NamedModel> riccati_battery(const ExperimentConfig& cfg) {
    std::vector<double> rhos{0.0, 0.1, 0.5, 0.9};
    for (double r : sweep(cfg)) rhos.push_back(r);
    std::sort(rhos.begin(), rhos.end());
    rhos.erase(std::unique(rhos.begin(), rhos.end()), rhos.end());
    std::vector<NamedModel> out;
    const bool has_kappa = derive(cfg.params).kappa > 0;
    for (double r : rhos)
        if (r == 0 || has_kappa) out.push_back({"configured rho=" + fmt(r, 6), cfg.model_at(r)});
    for (auto& v : variations()) out.push_back(std::move(v));
    auto no_penalty = reference_params<double>();
    no_penalty.lambda1 = 0;
    out.push_back({"no-running-penalty rho=0.2", validate(with_rho(no_penalty, 0.2))});
    return out;
}

std::vector<NamedModel> keystone_battery(const ExperimentConfig& cfg) {
    std::vector<NamedModel> out;
    for (const auto& m : cfg.models()) out.push_back({"configured rho=" + fmt(m.derived.rho, 6), m});
    for (auto& v : variations()) out.push_back(std::move(v));
    return out;
}

VerifyReport run_verification(const ExperimentConfig& cfg, std::ostream* progress, const std::vector<std::string>& only) {
    check_config(cfg);
    VerifyReport report;
    for (double r : cfg.rho_values())
        if (r >= 1 - 1e-3) report.boundary = true;
    Runner runner(report, progress, only);
    const auto& base = cfg.params;

    runner.run("1", "Riccati closed form vs RK4 at 1e5 steps", [&](CheckResult& c) {
        constexpr double tol = 1e-8;
        double worst = 0;
        json sets = json::array();
        for (const auto& nm : riccati_battery(cfg)) {
            const auto ode = integrate_riccati(nm.model, 100000);
            std::vector<double> a, b, cc;
            for (double t : ode.t) {
                const auto k = eval_coefficients(nm.model, t);
                a.push_back(k.a);
                b.push_back(k.b);
                cc.push_back(k.c);
            }
            const double ga = sup_rel_gap(a, ode.a), gb = sup_rel_gap(b, ode.b), gc = sup_rel_gap(cc, ode.c);
            worst = std::max({worst, ga, gb, gc});
            sets.push_back({{"set", nm.name}, {"a", ga}, {"b", gb}, {"c", gc}});
        }
        c.measured = {{"sets", sets}, {"worst", worst}};
        c.tolerance = {{"sup_relative_gap", tol}, {"min_sets", 5}};
        c.passed = worst < tol && sets.size() >= 5;
        c.note = std::to_string(sets.size()) + " sets, worst sup-norm relative gap " + fmt(worst);
    });

    runner.run("2", "HJB residual on a 200x200 grid", [&](CheckResult& c) {
        constexpr double tol = 1e-8;
        constexpr double eps = 1e-3;
        double worst = 0, weakest_ratio = std::numeric_limits<double>::infinity();
        json sets = json::array();
        std::vector<double> rhos{0.0};
        if (derive(base).kappa > 0)
            for (double r : sweep(cfg)) rhos.push_back(r);
        for (double r : rhos) {
            const auto mdl = cfg.model_at(r);
            const Grid<double> g{0, mdl.params.T, 200, -2 * mdl.params.x0, 2 * mdl.params.x0, 200};
            const auto surface = closed_form_surface(mdl);
            const auto rep = hjb_residual(mdl, surface, g);
            CandidateSurface<double> bumped;
            bumped.value = [&](double t, double x) { return (1 + eps) * surface.value(t, x); };
            bumped.derivatives = [&](double t, double x) {
                auto d = surface.derivatives(t, x);
                d.w *= 1 + eps;
                d.wt *= 1 + eps;
                d.wx *= 1 + eps;
                d.wxx *= 1 + eps;
                return d;
            };
            const auto bad = hjb_residual(mdl, bumped, g);
            worst = std::max(worst, rep.max_rel);
            weakest_ratio = std::min(weakest_ratio, bad.max_rel / tol);
            sets.push_back({{"rho", r}, {"max_rel", rep.max_rel}, {"max_abs", rep.max_abs},
                            {"perturbed_max_rel", bad.max_rel}});
        }
        c.measured = {{"sets", sets}, {"worst", worst}, {"perturbed_over_tolerance", weakest_ratio}};
        c.tolerance = {{"max_rel", tol}, {"perturbation", eps}, {"perturbed_factor", 10}};
        c.passed = worst < tol && weakest_ratio >= 10;
        c.note = "max relative residual " + fmt(worst) + ", perturbed surface at " + fmt(weakest_ratio) +
                 "x tolerance";
    });

    const std::vector<int> fbsde_levels{1024, 2048, 4096, 8192};
    runner.run("3", "FBSDE terminal mismatch convergence", [&](CheckResult& c) {
        const auto mdl = primary_model(cfg);
        const auto st = terminal_mismatch_study(mdl, fbsde_levels, cfg.fbsde_paths, cfg.seed, cfg.workers);
        const bool decreasing = std::is_sorted(st.rms.rbegin(), st.rms.rend(), std::less_equal<double>());
        const double upper = st.order + kZ99 * st.order_se;
        c.measured = {{"rho", mdl.derived.rho}, {"steps", st.steps}, {"rms", st.rms}, {"order", st.order},
                      {"order_se", st.order_se}, {"order_upper_99", upper}, {"paths", st.paths}};
        c.tolerance = {{"order", 0.5}, {"rule", "rms strictly decreasing and 0.5 inside the 99% band of the order"}};
        c.passed = decreasing && upper >= 0.5;
        c.note = "order " + fmt(st.order) + " +- " + fmt(st.order_se) + ", rms " + fmt(st.rms.front()) + " -> " +
                 fmt(st.rms.back());
    });

    runner.run(
        "3m", "FBSDE terminal mismatch with the Milstein correction",
        [&](CheckResult& c) {
            const auto mdl = primary_model(cfg);
            ClosedLoopOptions o;
            o.scheme = BackwardScheme::Milstein;
            const auto st = terminal_mismatch_study(mdl, fbsde_levels, cfg.fbsde_paths, cfg.seed, cfg.workers, o);
            c.measured = {{"rms", st.rms}, {"order", st.order}, {"order_se", st.order_se}};
            c.passed = true;
            c.note = "order " + fmt(st.order) + " +- " + fmt(st.order_se);
        },
        true);

    runner.run("4", "keystone value identity J(0, x0; v*) = w(0, x0)", [&](CheckResult& c) {
        json sets = json::array();
        bool ok = true;
        int count = 0;
        double worst_z = 0;
        for (const auto& nm : keystone_battery(cfg)) {
            const auto& p = nm.model.params;
            const auto est = objective_estimate(nm.model, optimal_control(nm.model), 0.0, p.x0, objective_options(cfg));
            const double w = value_function(nm.model, 0.0, p.x0);
            const double diff = est.estimate.value - w;
            const bool inside = std::abs(diff) <= est.estimate.half_width;
            ok = ok && inside;
            ++count;
            if (est.estimate.std_error > 0) worst_z = std::max(worst_z, std::abs(diff) / est.estimate.std_error);
            sets.push_back({{"set", nm.name}, {"J", est.estimate.value}, {"w", w}, {"diff", diff},
                            {"stderr", est.estimate.std_error}, {"half_width", est.estimate.half_width},
                            {"J_fine", est.fine}, {"J_coarse", est.coarse}, {"inside", inside}});
        }
        c.measured = {{"sets", sets}, {"worst_abs_z", worst_z}};
        c.tolerance = {{"rule", "|J - w| <= 99% half-width"}, {"min_sets", 5}, {"paths", cfg.paths},
                       {"steps", cfg.steps}};
        c.passed = ok && count >= 5;
        c.note = std::to_string(count) + " sets, worst |J - w|/stderr " + fmt(worst_z);
    });

    runner.run("5", "optimality against the standard perturbation family", [&](CheckResult& c) {
        const auto mdl = primary_model(cfg);
        const auto scan = suboptimality_scan(mdl, standard_family(mdl), 0.0, mdl.params.x0, objective_options(cfg));
        bool bounded = true;
        json rows = json::array();
        for (const auto& r : scan.rows) {
            bounded = bounded && r.J <= scan.w + 3 * r.half_width;
            rows.push_back({{"tag", r.tag}, {"J", r.J}, {"stderr", r.std_error}, {"gap", r.gap},
                            {"half_width", r.half_width}});
        }
        // gap(ε_small) ≤ gap(ε_large) within 3 paired standard errors along each side of v*
        bool growing = true;
        json steps = json::array();
        for (const auto& chain : {std::vector<int>{0, 1, 3, 5}, std::vector<int>{0, 2, 4, 6}}) {
            for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
                const auto d = paired_difference(scan.estimates[chain[k]], scan.estimates[chain[k + 1]]);
                const bool ok = d.diff >= -3 * d.std_error;
                growing = growing && ok;
                steps.push_back({{"from", scan.rows[chain[k]].tag}, {"to", scan.rows[chain[k + 1]].tag},
                                 {"gap_increase", d.diff}, {"stderr", d.std_error}, {"ok", ok}});
            }
        }
        c.measured = {{"rho", mdl.derived.rho}, {"w", scan.w}, {"rows", rows}, {"gap_steps", steps}};
        c.tolerance = {{"bound", "J <= w + 3 half-width"}, {"growth", "paired gap increase >= -3 stderr"}};
        c.passed = bounded && growing;
        c.note = std::string(bounded ? "all J below bound" : "bound violated") + ", gap " +
                 (growing ? "grows" : "does not grow") + " with |eps|; gap at (1+0.2)v* " +
                 fmt(scan.rows[5].gap) + " vs half-width " + fmt(scan.rows[5].half_width);
    });

    runner.run("6", "entropic risk on Gaussian, constant and translated samples", [&](CheckResult& c) {
        constexpr double mu = 1.5, sd = 2.0;
        constexpr int n = 1000000;
        NormalStream normal(cfg.seed, 0x6a09e667f3bcc908ULL);
        std::vector<double> xi(n);
        for (auto& v : xi) v = mu + sd * normal();
        bool ok = true;
        json gauss = json::array();
        double worst_z = 0;
        for (double l2 : {0.05, 0.25}) {
            const auto r = entropic_risk(xi, l2);
            const double exact = -mu + l2 * sd * sd / 2;
            const double z = std::abs(r.value - exact) / r.std_error;
            worst_z = std::max(worst_z, z);
            ok = ok && z <= 3;
            gauss.push_back({{"lambda2", l2}, {"estimate", r.value}, {"exact", exact}, {"stderr", r.std_error}});
        }
        json constant = json::array();
        for (double v : {-3.25, 0.0, 7.5, 1e6})
            for (double l2 : {0.1, 1.0, 5.0}) {
                const std::vector<double> same(1000, v);
                const double r = entropic_risk(same, l2).value;
                ok = ok && r == -v;
                constant.push_back({{"value", v}, {"lambda2", l2}, {"risk", r}});
            }
        // Dyadic samples keep every shift exact, so any discrepancy is rounding in the estimator itself.
        std::vector<double> dy(4096);
        PhiloxStream bits(cfg.seed, 0xbb67ae8584caa73bULL);
        for (auto& v : dy) v = static_cast<double>(static_cast<int>(bits() % 8192) - 4096) / 1024;
        double worst_ulps = 0;
        json translation = json::array();
        for (double shift : {-1.5, 0.25, 3.0})
            for (double l2 : {0.1, 1.0}) {
                std::vector<double> moved(dy);
                for (auto& v : moved) v += shift;
                const double lhs = entropic_risk(moved, l2).value;
                const double rhs = entropic_risk(dy, l2).value - shift;
                const double ulp = std::numeric_limits<double>::epsilon() * std::max(std::abs(lhs), std::abs(rhs));
                const double ulps = ulp > 0 ? std::abs(lhs - rhs) / ulp : std::abs(lhs - rhs);
                worst_ulps = std::max(worst_ulps, ulps);
                translation.push_back({{"shift", shift}, {"lambda2", l2}, {"lhs", lhs}, {"rhs", rhs}});
            }
        ok = ok && worst_ulps <= 2;
        c.measured = {{"gaussian", gauss}, {"constant", constant}, {"translation", translation},
                      {"worst_gaussian_z", worst_z}, {"worst_translation_ulps", worst_ulps}};
        c.tolerance = {{"gaussian_z", 3}, {"constant", "bitwise"}, {"translation_ulps", 2}, {"samples", n}};
        c.passed = ok;
        c.note = "Gaussian |z| " + fmt(worst_z) + ", constants exact, translation within " + fmt(worst_ulps) + " ulp";
    });

    runner.run("7", "risk measure axioms on finite trees", [&](CheckResult& c) {
        const auto battery = default_battery(cfg.seed);
        bool ok = true;
        std::size_t checks = 0, failed = 0, flagged = 0;
        json flagged_list = json::array();
        for (double l2 : {0.1, 1.0, 5.0}) {
            const auto rep = axiom_suite(l2, battery);
            ok = ok && rep.passed();
            checks += rep.checks.size();
            for (const auto& k : rep.checks) failed += !k.passed;
            flagged += rep.flagged.size();
            for (const auto& f : rep.flagged)
                if (flagged_list.size() < 4)
                    flagged_list.push_back({{"axiom", f.axiom}, {"scenario", f.scenario}, {"lhs", f.lhs}, {"rhs", f.rhs}});
        }
        c.measured = {{"checks", checks}, {"failed", failed}, {"flagged_variants", flagged},
                      {"flagged_examples", flagged_list}};
        c.tolerance = {{"comparison", "exact up to 16 eps rounding"}};
        c.passed = ok && checks > 0;
        c.note = std::to_string(checks) + " checks, " + std::to_string(failed) + " failed; " + std::to_string(flagged) +
                 " alternative-sign variants flagged";
    });

    runner.run("8", "P&L identity between accumulated and closed forms", [&](CheckResult& c) {
        const auto mdl = primary_model(cfg);
        const auto st = pnl_identity_study(mdl.params, optimal_control(mdl), {512, 1024, 2048, 4096}, cfg.fbsde_paths,
                                           cfg.seed, cfg.workers);
        const bool decreasing = std::is_sorted(st.rms.rbegin(), st.rms.rend(), std::less_equal<double>());
        const double upper = st.order + kZ99 * st.order_se;

        auto quiet = mdl.params;
        quiet.m = 0;
        quiet.sigma = 0;
        const auto quiet_model = validate(quiet);
        json det = json::array();
        bool det_ok = true;
        for (int n : {256, 512, 1024}) {
            const auto path = simulate_forward(quiet, optimal_control(quiet_model), n, cfg.seed);
            double scale = 0;
            for (double v : path.Pi0_closed) scale = std::max(scale, std::abs(v));
            const double gap = pnl_identity_check(path);
            const double dt = quiet.T / n;
            // exact up to accumulated rounding, which is far below any C Δt² bound
            const bool ok = gap <= 64 * n * std::numeric_limits<double>::epsilon() * scale;
            det_ok = det_ok && ok;
            det.push_back({{"steps", n}, {"gap", gap}, {"scale", scale}, {"gap_over_dt2", gap / (dt * dt)}});
        }
        c.measured = {{"stochastic", {{"steps", st.steps}, {"rms", st.rms}, {"order", st.order},
                                      {"order_se", st.order_se}, {"order_upper_99", upper}}},
                      {"deterministic", det}};
        c.tolerance = {{"order", 0.5}, {"deterministic", "gap <= 64 N eps max|Pi|"}};
        c.passed = decreasing && upper >= 0.5 && det_ok;
        c.note = "order " + fmt(st.order) + " +- " + fmt(st.order_se) + "; deterministic gap " +
                 fmt(det.back()["gap"].get<double>()) + " at scale " + fmt(det.back()["scale"].get<double>());
    });

    runner.run("9", "mean-reversion and schedule shapes", [&](CheckResult& c) {
        const auto rhos = sweep(cfg);
        const double slack = 16 * std::numeric_limits<double>::epsilon();
        // -a(t) on the emitted grid
        std::vector<std::vector<double>> minus_a;
        std::vector<double> grid;
        for (double r : rhos) {
            const auto mdl = cfg.model_at(r);
            grid.clear();
            std::vector<double> col;
            for (int i = 0; i < cfg.time_points; ++i) {
                const double t = cfg.time_points == 1 ? mdl.params.T
                                 : (i == cfg.time_points - 1 ? mdl.params.T : mdl.params.T * i / (cfg.time_points - 1));
                grid.push_back(t);
                col.push_back(-eval_coefficients(mdl, t).a);
            }
            minus_a.push_back(col);
        }
        bool in_t = true, in_rho = true;
        for (const auto& col : minus_a)
            for (std::size_t i = 1; i < col.size(); ++i) in_t = in_t && col[i] >= col[i - 1] - slack * std::abs(col[i]);
        for (std::size_t k = 1; k < minus_a.size(); ++k)
            for (std::size_t i = 0; i < grid.size(); ++i)
                in_rho = in_rho && minus_a[k][i] >= minus_a[k - 1][i] - slack * std::abs(minus_a[k][i]);

        auto scfg = cfg;
        scfg.params.T = cfg.schedule_T;
        const int pts = std::max(cfg.time_points, 3);
        bool ends = true, concave = true, mid_order = true;
        json shapes = json::array();
        double last_mid = -1;
        for (double r : rhos) {
            const auto s = schedule_curve(scfg.model_at(r), pts);
            ends = ends && std::abs(s.normalized.front() - 1) <= slack && s.normalized.back() == 0;
            double worst_curv = 0;
            for (std::size_t i = 1; i + 1 < s.normalized.size(); ++i)
                worst_curv = std::max(worst_curv, s.normalized[i + 1] - 2 * s.normalized[i] + s.normalized[i - 1]);
            const bool conc = worst_curv <= 1e-12;
            concave = concave && conc;
            const double mid = schedule_curve(scfg.model_at(r), 2).normalized[1];
            mid_order = mid_order && mid >= last_mid;
            last_mid = mid;
            shapes.push_back({{"rho", r}, {"mid_value", mid}, {"max_second_difference", worst_curv}});
        }
        json linear = json::array();
        std::vector<double> dev;
        for (double r : {1e-4, 1e-6, 1e-8}) {
            const auto s = schedule_curve(scfg.model_at(r), pts);
            double d = 0;
            for (std::size_t i = 0; i < s.t.size(); ++i)
                d = std::max(d, std::abs(s.normalized[i] - (1 - s.t[i] / scfg.params.T)));
            dev.push_back(d);
            linear.push_back({{"rho", r}, {"sup_deviation_from_linear", d}});
        }
        const bool to_linear = dev[1] < dev[0] && dev[2] < dev[1] && dev[2] < 1e-3;
        c.measured = {{"minus_a_nondecreasing_in_t", in_t}, {"minus_a_nondecreasing_in_rho", in_rho},
                      {"schedule_horizon", cfg.schedule_T}, {"schedules", shapes}, {"endpoints", ends},
                      {"concave", concave}, {"mid_value_nondecreasing_in_rho", mid_order}, {"small_rho", linear}};
        c.tolerance = {{"monotonicity_slack", "16 eps relative"}, {"concavity", 1e-12}, {"linear_limit", 1e-3}};
        c.passed = in_t && in_rho && ends && concave && mid_order && to_linear;
        c.note = std::string("-a monotone ") + (in_t && in_rho ? "yes" : "no") + ", schedules concave " +
                 (concave ? "yes" : "no") + ", mid value ordered " + (mid_order ? "yes" : "no") +
                 ", deviation from linear at rho=1e-8 " + fmt(dev[2]);
    });

    runner.run("10", "late and early stage limits", [&](CheckResult& c) {
        constexpr double tol = 1e-3;
        json sets = json::array();
        bool ok = true;
        double worst = 0;
        for (double r : sweep(cfg)) {
            if (r < 1e-12 || !(base.gamma > 0)) continue;
            const auto mdl = cfg.model_at(r);
            const double omega = mdl.derived.rate_arg;
            auto at_horizon = [&](double tau) {
                auto p = mdl.params;
                p.T = std::max(p.T, tau);
                return std::pair{validate(p), p.T - tau};
            };
            const auto [late_m, late_t] = at_horizon(1e-3 / omega);
            const auto lc = eval_coefficients(late_m, late_t);
            const auto ls = late_stage(late_m, late_t);
            const auto [early_m, early_t] = at_horizon(20 / omega);
            const auto ec = eval_coefficients(early_m, early_t);
            const auto es = early_stage(early_m);
            const double g[4] = {std::abs(lc.ell - ls.ell0) / std::abs(lc.ell), std::abs(lc.a - ls.a0) / std::abs(lc.a),
                                 std::abs(ec.ell - es.ell_inf) / std::abs(es.ell_inf),
                                 std::abs(ec.a - es.a_inf) / std::abs(es.a_inf)};
            for (double v : g) worst = std::max(worst, v);
            ok = ok && *std::max_element(g, g + 4) < tol;
            sets.push_back({{"rho", r}, {"ell0", g[0]}, {"a0", g[1]}, {"ell_inf", g[2]}, {"a_inf", g[3]}});
        }
        if (sets.empty()) throw DegenerateRegime("no rho > 0 with gamma > 0 in the sweep");

        // Early-stage ensemble started at the stated limit position.
        const auto mdl = primary_model(cfg);
        const double omega = mdl.derived.rate_arg;
        if (!(omega > 0)) throw DegenerateRegime("early-stage check needs omega > 0");
        const int paths = std::max(4 * cfg.fbsde_paths, 100);
        auto long_params = mdl.params;
        long_params.T = 20 / omega;
        const double window = long_params.T - 10 / omega;
        const auto long_model = validate(long_params);
        const auto es = early_stage(long_model);
        const auto ou = early_window_mean(long_model, es.x_bar_inf, window, 20000, paths, cfg.seed, cfg.workers);
        const bool ou_ok = std::abs(ou.mean - es.x_bar_inf) <= 3 * ou.std_error;
        const double resolution = std::abs(es.x_stationary - es.x_bar_inf) / ou.std_error;

        c.measured = {{"limits", sets},
                      {"worst_relative_gap", worst},
                      {"ou", {{"rho", mdl.derived.rho}, {"start", es.x_bar_inf}, {"window", window}, {"paths", paths},
                              {"time_averaged_mean", ou.mean}, {"stderr", ou.std_error},
                              {"max_checkpoint_z", ou.max_checkpoint_z},
                              {"stationary_point", es.x_stationary},
                              {"stationary_minus_start_over_stderr", resolution}}}};
        c.tolerance = {{"relative_gap", tol}, {"ou_z", 3}};
        c.passed = ok && ou_ok;
        c.note = "worst limit gap " + fmt(worst) + "; early-window mean within " +
                 fmt(std::abs(ou.mean - es.x_bar_inf) / ou.std_error) + " stderr of the start (start and stationary point " +
                 fmt(resolution) + " stderr apart)";
    });

    runner.run(
        "10s", "early-stage mean with a large target rate",
        [&](CheckResult& c) {
            auto p = primary_model(cfg).params;
            if (!(derive(p).rate_arg > 0)) throw DegenerateRegime("needs omega > 0");
            p.v_bar = 1e4;
            p.T = 20 / derive(p).rate_arg;
            const auto mdl = validate(p);
            const double window = p.T - 10 / mdl.derived.rate_arg;
            const auto es = early_stage(mdl);
            const int paths = std::max(4 * cfg.fbsde_paths, 100);
            const auto from_stationary = early_window_mean(mdl, es.x_stationary, window, 20000, paths, cfg.seed, cfg.workers);
            const auto from_stated = early_window_mean(mdl, es.x_bar_inf, window, 20000, paths, cfg.seed, cfg.workers);
            const double z_stationary = std::abs(from_stationary.mean - es.x_stationary) / from_stationary.std_error;
            const double z_stated = std::abs(from_stated.mean - es.x_bar_inf) / from_stated.std_error;
            c.measured = {{"v_bar", p.v_bar}, {"stationary_point", es.x_stationary}, {"stated_limit", es.x_bar_inf},
                          {"z_started_at_stationary_point", z_stationary}, {"z_started_at_stated_limit", z_stated},
                          {"mean_from_stated_limit", from_stated.mean}};
            c.passed = z_stationary <= 3;
            c.note = "started at 2 lambda1 v_bar / gamma: z " + fmt(z_stationary) + "; started at the stated limit: z " +
                     fmt(z_stated);
        },
        true);

    runner.run("11", "byte-identical outputs across worker counts", [&](CheckResult& c) {
        auto small = cfg;
        small.time_points = std::min(cfg.time_points, 101);
        small.paths = 200;
        small.steps = 128;
        small.csv_paths = 3;
        small.formats = {"csv", "json"};
        std::vector<std::map<std::string, std::string>> sums;
        std::vector<std::string> dirs;
        for (int workers : {1, 3, 1}) {
            small.workers = workers;
            small.out_dir = temp_dir("repro");
            dirs.push_back(small.out_dir);
            std::map<std::string, std::string> all;
            for (const auto& m : {cmd_coeffs(small), cmd_schedule(small), cmd_simulate(small)}) {
                const auto s = data_checksums(m);
                all.insert(s.begin(), s.end());
            }
            sums.push_back(all);
        }
        for (const auto& d : dirs) fs::remove_all(d);
        const bool same = sums[0] == sums[1] && sums[0] == sums[2];
        c.measured = {{"files", sums[0].size()}, {"workers", {1, 3, 1}}, {"checksums", sums[0]}};
        c.tolerance = {{"rule", "identical SHA-256 per output"}};
        c.passed = same && !sums[0].empty();
        c.note = std::to_string(sums[0].size()) + " outputs " + (same ? "identical" : "differ") +
                 " across worker counts 1, 3 and a rerun";
    });

    return report;
}

RunManifest cmd_verify(const ExperimentConfig& cfg, VerifyReport& report, std::ostream* log) {
    check_config(cfg);
    const auto start = Clock::now();
    report = run_verification(cfg, log);
    fs::create_directories(cfg.out_dir);
    const std::string bytes = report.to_json().dump(2) + "\n";
    {
        std::ofstream f(fs::path(cfg.out_dir) / "report.json", std::ios::binary);
        if (!f) throw Error("cannot write report.json");
        f << bytes;
    }
    RunManifest m;
    m.command = "verify";
    m.seed = cfg.seed;
    m.config_text = to_text(cfg);
    m.outputs.push_back({"report.json", sha256_hex(bytes), bytes.size()});
    m.timings["verify"] = std::chrono::duration<double>(Clock::now() - start).count();
    for (const auto& c : report.checks) m.timings["check_" + c.id] = c.seconds;
    std::ofstream f(fs::path(cfg.out_dir) / "manifest.json", std::ios::binary);
    if (!f) throw Error("cannot write manifest.json");
    f << m.to_json().dump(2) << "\n";
    return m;
}

} // namespace optexec
