#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "optexec/config.hpp"

using namespace optexec;

namespace {

void same(const ExperimentConfig& a, const ExperimentConfig& b) {
    CHECK(to_map(a) == to_map(b));
    CHECK(a.rho == b.rho);
    CHECK(a.lambda2 == b.lambda2);
    CHECK(a.params.gamma == b.params.gamma);
    CHECK(a.params.lambda1 == b.params.lambda1);
    CHECK(a.seed == b.seed);
}

std::string half_of_bound() {
    std::ostringstream os;
    os.precision(17);
    os << "lambda2 = " << 0.5 / derive(reference_params<double>(0.0)).kappa << "\n";
    return os.str();
}

} // namespace

TEST_CASE("empty text gives the defaults") {
    const auto cfg = parse_config("# nothing but a comment\n\n");
    same(cfg, ExperimentConfig{});
    CHECK(cfg.models().size() == 3);
    CHECK(cfg.rho_values() == std::vector<double>{0.1, 0.5, 0.9});
    CHECK(cfg.wants("csv"));
    CHECK(!cfg.wants("parquet"));
}

TEST_CASE("values, lists and trailing comments are read") {
    const auto cfg = parse_config("gamma = 3e-7   # softer permanent impact\n"
                                  "rho = 0.2, 0.4\n"
                                  "seed = 18446744073709551615\n"
                                  "formats = json\n"
                                  "out_dir = runs/a\n");
    CHECK(cfg.params.gamma == 3e-7);
    CHECK(cfg.rho == std::vector<double>{0.2, 0.4});
    CHECK(cfg.seed == 18446744073709551615ull);
    CHECK(cfg.wants("json"));
    CHECK(!cfg.wants("csv"));
    CHECK(cfg.out_dir == "runs/a");
}

TEST_CASE("absolute risk aversion replaces the rho sweep") {
    const auto cfg = parse_config(half_of_bound());
    REQUIRE(cfg.models().size() == 1);
    CHECK(cfg.rho_values()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(parse_config(half_of_bound() + "rho = 0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("lambda2 = 1\n"), ConfigError);
}

TEST_CASE("malformed files are rejected") {
    const char* bad[] = {"gama = 1\n",          "paths = 10\npaths = 20\n", "eta =\n",
                         "eta = fast\n",        "paths = 1.5\n",            "rho = 0.5, 1.0\n",
                         "rho = -0.1\n",        "beta = 1e-8\n",            "steps = 0\n",
                         "just some words\n",   "seed = -3\n",              "sigma = nan\n"};
    for (const char* text : bad) {
        INFO(text);
        CHECK_THROWS_AS(parse_config(text), ConfigError);
    }
    CHECK_THROWS_AS(load_config("/nonexistent/optexec.cfg"), ConfigError);
}

TEST_CASE("canonical text round-trips") {
    auto cfg = parse_config("rho = 0.05, 0.7\nT = 2.5\nx0 = 123456.789\nworkers = 4\n");
    same(parse_config(to_text(cfg)), cfg);
    const auto abs = parse_config(half_of_bound());
    same(parse_config(to_text(abs)), abs);
    CHECK(to_map(cfg).size() == config_keys().size() - 1);
}

TEST_CASE("config files load from disk") {
    const std::string path = "test_config_tmp.cfg";
    {
        std::ofstream f(path);
        f << "paths = 77\n";
    }
    CHECK(load_config(path).paths == 77);
    std::remove(path.c_str());
}

TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string path = "test_sha_tmp.txt";
    {
        std::ofstream f(path, std::ios::binary);
        f << "abc";
    }
    CHECK(sha256_file(path) == sha256_hex("abc"));
    std::remove(path.c_str());
}
