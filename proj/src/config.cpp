#include "optexec/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "optexec/dynamics.hpp"

namespace optexec {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0;
    const auto* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, out);
    if (r.ec != std::errc() || r.ptr != end) throw ConfigError("key '" + key + "': not a number: '" + v + "'");
    return out;
}

long long parse_int(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    if (d != static_cast<double>(static_cast<long long>(d)))
        throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    return static_cast<long long>(d);
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

} // namespace

std::vector<std::string> config_keys() {
    return {"gamma", "eta", "sigma", "m", "beta", "lambda1", "lambda2", "v_bar", "T", "x0", "s0",
            "rho", "time_points", "x_points", "paths", "steps", "seed", "workers", "out_dir", "formats",
            "csv_paths", "schedule_T", "deterministic_tol", "fbsde_paths", "scan_rho"};
}

bool ExperimentConfig::wants(const std::string& format) const {
    return std::find(formats.begin(), formats.end(), format) != formats.end();
}

std::vector<double> ExperimentConfig::rho_values() const {
    if (lambda2) return {derive(params).kappa * *lambda2};
    return rho;
}

Model<double> ExperimentConfig::model_at(double r) const {
    auto p = params;
    const double kappa = derive(p).kappa;
    p.lambda2 = kappa > 0 ? r / kappa : 0.0;
    return validate(p);
}

std::vector<Model<double>> ExperimentConfig::models() const {
    std::vector<Model<double>> out;
    if (lambda2) {
        auto p = params;
        p.lambda2 = *lambda2;
        out.push_back(validate(p));
        return out;
    }
    for (double r : rho) out.push_back(model_at(r));
    return out;
}

void check_config(const ExperimentConfig& cfg) {
    std::vector<std::string> problems;
    if (!cfg.lambda2) {
        if (cfg.rho.empty()) problems.push_back("rho list is empty");
        for (double r : cfg.rho)
            if (!(r >= 0 && r < 1)) problems.push_back("rho value " + format_number(r) + " outside [0, 1)");
        const double kappa = derive(cfg.params).kappa;
        if (kappa == 0 && std::any_of(cfg.rho.begin(), cfg.rho.end(), [](double r) { return r > 0; }))
            problems.push_back("rho > 0 needs kappa > 0 (m > 0)");
    }
    if (cfg.time_points < 1) problems.push_back("time_points must be >= 1");
    if (cfg.x_points < 1) problems.push_back("x_points must be >= 1");
    if (cfg.paths < 2) problems.push_back("paths must be >= 2");
    if (cfg.steps < 2 || cfg.steps % 2 != 0) problems.push_back("steps must be even and >= 2");
    if (cfg.workers < 1) problems.push_back("workers must be >= 1");
    if (cfg.csv_paths < 0) problems.push_back("csv_paths must be >= 0");
    if (!(cfg.schedule_T > 0)) problems.push_back("schedule_T must be > 0");
    if (!(cfg.deterministic_tol > 0)) problems.push_back("deterministic_tol must be > 0");
    if (cfg.fbsde_paths < 2) problems.push_back("fbsde_paths must be >= 2");
    if (!(cfg.scan_rho >= 0 && cfg.scan_rho < 1)) problems.push_back("scan_rho outside [0, 1)");
    for (const auto& f : cfg.formats)
        if (f != "csv" && f != "json") problems.push_back("unknown format '" + f + "'");
    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw ConfigError(msg);
    }
    try {
        cfg.models();
    } catch (const Inadmissible& e) {
        throw ConfigError(e.what());
    }
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    const auto keys = config_keys();
    std::set<std::string> seen;
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        if (val.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");

        auto& p = cfg.params;
        if (key == "gamma") p.gamma = parse_double(key, val);
        else if (key == "eta") p.eta = parse_double(key, val);
        else if (key == "sigma") p.sigma = parse_double(key, val);
        else if (key == "m") p.m = parse_double(key, val);
        else if (key == "beta") p.beta = parse_double(key, val);
        else if (key == "lambda1") p.lambda1 = parse_double(key, val);
        else if (key == "lambda2") cfg.lambda2 = parse_double(key, val);
        else if (key == "v_bar") p.v_bar = parse_double(key, val);
        else if (key == "T") p.T = parse_double(key, val);
        else if (key == "x0") p.x0 = parse_double(key, val);
        else if (key == "s0") p.s0 = parse_double(key, val);
        else if (key == "rho") {
            cfg.rho.clear();
            for (const auto& item : split_list(val)) cfg.rho.push_back(parse_double(key, item));
        }
        else if (key == "time_points") cfg.time_points = static_cast<int>(parse_int(key, val));
        else if (key == "x_points") cfg.x_points = static_cast<int>(parse_int(key, val));
        else if (key == "paths") cfg.paths = static_cast<int>(parse_int(key, val));
        else if (key == "steps") cfg.steps = static_cast<int>(parse_int(key, val));
        else if (key == "seed") {
            const auto r = std::from_chars(val.data(), val.data() + val.size(), cfg.seed);
            if (r.ec != std::errc() || r.ptr != val.data() + val.size()) throw ConfigError("key 'seed': not an unsigned integer");
        }
        else if (key == "workers") cfg.workers = static_cast<int>(parse_int(key, val));
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "formats") cfg.formats = split_list(val);
        else if (key == "csv_paths") cfg.csv_paths = static_cast<int>(parse_int(key, val));
        else if (key == "schedule_T") cfg.schedule_T = parse_double(key, val);
        else if (key == "deterministic_tol") cfg.deterministic_tol = parse_double(key, val);
        else if (key == "fbsde_paths") cfg.fbsde_paths = static_cast<int>(parse_int(key, val));
        else if (key == "scan_rho") cfg.scan_rho = parse_double(key, val);
    }
    if (seen.count("lambda2") && seen.count("rho"))
        throw ConfigError("give either rho or lambda2, not both");
    check_config(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::map<std::string, std::string> to_map(const ExperimentConfig& cfg) {
    const auto& p = cfg.params;
    std::map<std::string, std::string> m{
        {"gamma", format_number(p.gamma)}, {"eta", format_number(p.eta)}, {"sigma", format_number(p.sigma)},
        {"m", format_number(p.m)}, {"beta", format_number(p.beta)}, {"lambda1", format_number(p.lambda1)},
        {"v_bar", format_number(p.v_bar)}, {"T", format_number(p.T)}, {"x0", format_number(p.x0)},
        {"s0", format_number(p.s0)}, {"time_points", std::to_string(cfg.time_points)},
        {"x_points", std::to_string(cfg.x_points)}, {"paths", std::to_string(cfg.paths)},
        {"steps", std::to_string(cfg.steps)}, {"seed", std::to_string(cfg.seed)},
        {"workers", std::to_string(cfg.workers)}, {"out_dir", cfg.out_dir}, {"formats", join(cfg.formats)},
        {"csv_paths", std::to_string(cfg.csv_paths)}, {"schedule_T", format_number(cfg.schedule_T)},
        {"deterministic_tol", format_number(cfg.deterministic_tol)}, {"fbsde_paths", std::to_string(cfg.fbsde_paths)},
        {"scan_rho", format_number(cfg.scan_rho)}};
    if (cfg.lambda2) {
        m["lambda2"] = format_number(*cfg.lambda2);
    } else {
        std::vector<std::string> r;
        for (double v : cfg.rho) r.push_back(format_number(v));
        m["rho"] = join(r);
    }
    return m;
}

std::string to_text(const ExperimentConfig& cfg) {
    const auto m = to_map(cfg);
    std::string s;
    for (const auto& key : config_keys()) {
        const auto it = m.find(key);
        if (it != m.end()) s += key + " = " + it->second + "\n";
    }
    return s;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string sha256_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return sha256_hex(ss.str());
}

} // namespace optexec
