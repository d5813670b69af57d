#include "optexec/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "optexec/dynamics.hpp"
#include "optexec/parallel.hpp"
#include "optexec/risk.hpp"
#include "optexec/verify.hpp"

namespace optexec {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

class OutputDir {
public:
    OutputDir(const ExperimentConfig& cfg, std::string command) : root_(cfg.out_dir) {
        fs::create_directories(root_);
        manifest_.command = std::move(command);
        manifest_.seed = cfg.seed;
        manifest_.config_text = to_text(cfg);
    }

    void write(const std::string& name, const std::string& bytes) {
        const fs::path path = root_ / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error("cannot write '" + path.string() + "'");
        f << bytes;
        f.close();
        if (!f) throw Error("write failed for '" + path.string() + "'");
        manifest_.outputs.push_back({name, sha256_hex(bytes), bytes.size()});
    }

    void time(const std::string& what, double seconds) { manifest_.timings[what] = seconds; }

    RunManifest finish() {
        const fs::path path = root_ / "manifest.json";
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error("cannot write '" + path.string() + "'");
        f << manifest_.to_json().dump(2) << "\n";
        return manifest_;
    }

private:
    fs::path root_;
    RunManifest manifest_;
};

std::vector<double> time_grid(double T, int points) {
    if (points == 1) return {T};
    std::vector<double> t(points);
    for (int i = 0; i < points; ++i) t[i] = i == points - 1 ? T : T * i / (points - 1);
    return t;
}

struct Moments {
    double mean = 0, std_error = 0;
};

Moments moments(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    Moments m;
    m.mean = pairwise_sum(v) / n;
    if (v.size() > 1) {
        std::vector<double> d(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - m.mean) * (v[i] - m.mean);
        m.std_error = std::sqrt(pairwise_sum(d) / (n - 1) / n);
    }
    return m;
}

nlohmann::json to_json(const Moments& m) { return {{"mean", m.mean}, {"stderr", m.std_error}}; }

void note(std::ostream* log, const std::string& msg) {
    if (log) *log << msg << std::endl;
}

} // namespace

nlohmann::json RunManifest::to_json() const {
    nlohmann::json outs = nlohmann::json::array();
    for (const auto& o : outputs) outs.push_back({{"file", o.file}, {"sha256", o.sha256}, {"bytes", o.bytes}});
    return {{"command", command}, {"artifact_version", version}, {"seed", seed},
            {"config", config_text}, {"outputs", outs}, {"timings_seconds", timings}};
}

RunManifest cmd_coeffs(const ExperimentConfig& cfg, std::ostream* log) {
    check_config(cfg);
    const auto start = Clock::now();
    OutputDir out(cfg, "coeffs");
    const auto models = cfg.models();
    std::ostringstream csv;
    csv << kCoeffsHeader << "\n";
    for (const auto& mdl : models) {
        for (double t : time_grid(mdl.params.T, cfg.time_points)) {
            const auto c = eval_coefficients(mdl, t);
            csv << format_number(mdl.derived.rho) << ',' << format_number(t) << ',' << format_number(c.a) << ','
                << format_number(c.b) << ',' << format_number(c.c) << ',' << format_number(c.a_minus_gamma) << ','
                << format_number(c.ell) << ',' << format_number(-c.a) << "\n";
        }
    }
    if (cfg.wants("csv")) out.write("coeffs.csv", csv.str());
    out.time("coeffs", seconds_since(start));
    note(log, "coeffs: " + std::to_string(models.size() * cfg.time_points) + " rows");
    return out.finish();
}

double schedule_rate(const ModelParams<double>& p) {
    if (!(p.gamma > 0)) throw DegenerateRegime("schedule time scale needs gamma > 0");
    return p.gamma / (2 * (p.eta + p.lambda1));
}

ScheduleCurve schedule_curve(const Model<double>& mdl, int points) {
    const double ell_T = eval_coefficients(mdl, 0.0).ell;
    if (!(ell_T > 0)) throw DegenerateRegime("schedule normalization needs l(T) > 0");
    ScheduleCurve s;
    s.t = time_grid(mdl.params.T, points);
    for (double t : s.t) {
        const double ell = eval_coefficients(mdl, t).ell;
        s.ell.push_back(ell);
        s.normalized.push_back(ell / ell_T);
    }
    return s;
}

RunManifest cmd_schedule(const ExperimentConfig& cfg, std::ostream* log) {
    check_config(cfg);
    const auto start = Clock::now();
    OutputDir out(cfg, "schedule");
    auto scfg = cfg;
    scfg.params.T = cfg.schedule_T;
    const double rate = schedule_rate(scfg.params);
    std::ostringstream csv;
    csv << kScheduleHeader << "\n";
    for (const auto& mdl : scfg.models()) {
        const auto s = schedule_curve(mdl, cfg.time_points);
        for (std::size_t i = 0; i < s.t.size(); ++i)
            csv << format_number(mdl.derived.rho) << ',' << format_number(s.t[i]) << ','
                << format_number(rate * s.t[i]) << ',' << format_number(s.ell[i]) << ','
                << format_number(s.normalized[i]) << "\n";
    }
    if (cfg.wants("csv")) out.write("schedule.csv", csv.str());
    out.time("schedule", seconds_since(start));
    note(log, "schedule: horizon " + format_number(cfg.schedule_T));
    return out.finish();
}

RunManifest cmd_simulate(const ExperimentConfig& cfg, std::ostream* log) {
    check_config(cfg);
    OutputDir out(cfg, "simulate");
    nlohmann::json summary = nlohmann::json::array();
    const auto models = cfg.models();
    for (std::size_t k = 0; k < models.size(); ++k) {
        const auto& mdl = models[k];
        const auto& p = mdl.params;
        const bool deterministic = p.m == 0 && p.sigma == 0;
        const int paths = deterministic ? 1 : cfg.paths;
        const auto start = Clock::now();

        const FeedbackPolicy<double> policy(mdl, cfg.steps);
        std::vector<double> XT(paths), PiT(paths), PiT_direct(paths), eps(paths);
        std::vector<SimPath> kept(std::min(paths, cfg.csv_paths));
        parallel_for(static_cast<std::size_t>(paths), cfg.workers, [&](std::size_t j) {
            auto path = simulate_closed_loop(policy, draw_increments(cfg.steps, p.T, cfg.seed, j));
            XT[j] = path.X.back();
            PiT[j] = path.Pi0_closed.back();
            PiT_direct[j] = path.Pi0_direct.back();
            eps[j] = path.eps_T;
            if (j < kept.size()) {
                path.tag = std::to_string(j);
                kept[j] = std::move(path);
            }
        });
        const double sim_seconds = seconds_since(start);

        const auto est_start = Clock::now();
        ObjectiveOptions opts;
        opts.paths = deterministic ? 2 : cfg.paths;
        opts.steps = cfg.steps;
        opts.seed = cfg.seed;
        opts.workers = cfg.workers;
        const auto est = objective_estimate(mdl, optimal_control(mdl), 0.0, p.x0, opts);
        const double w = value_function(mdl, 0.0, p.x0);
        const double est_seconds = seconds_since(est_start);

        std::vector<double> eps_sq(paths);
        for (int j = 0; j < paths; ++j) eps_sq[j] = eps[j] * eps[j];
        const double y0 = policy.value(0, p.x0);
        // a deterministic run has no sampling error, only discretization error
        const bool within = deterministic ? std::abs(est.estimate.value - w) <= cfg.deterministic_tol * std::abs(w)
                                          : std::abs(est.estimate.value - w) <= est.estimate.half_width;
        nlohmann::json entry = {
            {"index", k},
            {"rho", mdl.derived.rho},
            {"lambda2", p.lambda2},
            {"paths", paths},
            {"steps", cfg.steps},
            {"deterministic", deterministic},
            {"X_T", to_json(moments(XT))},
            {"Pi0_T", to_json(moments(PiT))},
            {"Pi0_T_direct", to_json(moments(PiT_direct))},
            {"eps_T", {{"mean", moments(eps).mean}, {"stderr", moments(eps).std_error},
                       {"rms", std::sqrt(pairwise_sum(eps_sq) / paths)}}},
            {"J", {{"estimate", est.estimate.value}, {"stderr", est.estimate.std_error},
                   {"half_width", est.estimate.half_width}, {"level", est.estimate.level},
                   {"w", w}, {"within_half_width", within}}}};
        if (deterministic) {
            const double rel = std::abs(eps[0]) / std::max(1.0, std::abs(y0));
            entry["deterministic_check"] = {{"relative_eps_T", rel}, {"tolerance", cfg.deterministic_tol},
                                            {"passed", rel <= cfg.deterministic_tol}};
        }
        summary.push_back(entry);

        if (cfg.wants("csv") && !kept.empty()) {
            std::ostringstream csv;
            write_paths_csv(csv, kept);
            out.write("paths_" + std::to_string(k) + ".csv", csv.str());
        }
        out.time("simulate_" + std::to_string(k), sim_seconds);
        out.time("objective_" + std::to_string(k), est_seconds);
        note(log, "simulate: rho " + format_number(mdl.derived.rho) + " J " + format_number(est.estimate.value) +
                      " w " + format_number(w));
    }
    if (cfg.wants("json")) out.write("summary.json", summary.dump(2) + "\n");
    return out.finish();
}

namespace {

struct CliOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers, paths, steps;
};

ExperimentConfig resolve(const CliOptions& o) {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers) cfg.workers = *o.workers;
    if (o.paths) cfg.paths = *o.paths;
    if (o.steps) cfg.steps = *o.steps;
    check_config(cfg);
    return cfg;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal liquidation under entropic risk: coefficients, schedules, simulation and verification"};
    app.require_subcommand(1);
    CliOptions o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "configuration file (key = value)");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "random seed");
        sub->add_option("--workers", o.workers, "worker threads");
        sub->add_option("--paths", o.paths, "Monte Carlo paths");
        sub->add_option("--steps", o.steps, "time steps");
    };
    auto* coeffs = app.add_subcommand("coeffs", "policy coefficients per rho");
    auto* schedule = app.add_subcommand("schedule", "normalized liquidation schedule per rho");
    auto* simulate = app.add_subcommand("simulate", "closed-loop paths and summary statistics");
    auto* verify = app.add_subcommand("verify", "run the verification suite");
    for (auto* sub : {coeffs, schedule, simulate, verify}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        const auto cfg = resolve(o);
        if (coeffs->parsed()) cmd_coeffs(cfg, &err);
        if (schedule->parsed()) cmd_schedule(cfg, &err);
        if (simulate->parsed()) cmd_simulate(cfg, &err);
        if (verify->parsed()) {
            VerifyReport report;
            cmd_verify(cfg, report, &err);
            for (const auto& c : report.checks) out << summary_line(c) << "\n";
            return report.passed() ? 0 : 1;
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const Inadmissible& e) {
        err << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace optexec
