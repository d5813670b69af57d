#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "optexec/risk.hpp"
#include "optexec/rng.hpp"

using namespace optexec;

namespace {

Model<double> reference(double rho) { return validate(reference_params<double>(rho)); }

ObjectiveOptions small(int paths, int steps, bool richardson, bool tilt = true) {
    ObjectiveOptions o;
    o.paths = paths;
    o.steps = steps;
    o.seed = 3;
    o.richardson = richardson;
    o.tilt = tilt;
    return o;
}

} // namespace

TEST_CASE("stable log-mean-exp agrees with the naive form and survives large exponents") {
    const std::vector<double> u{-1.0, 0.5, 2.0, 3.25};
    CHECK(log_mean_exp(u) == doctest::Approx(log_mean_exp_naive(u)).epsilon(1e-15));
    const std::vector<double> big{1000.0, 1001.0, 999.5};
    CHECK(std::isinf(log_mean_exp_naive(big)));
    const double expected = 1000 + std::log((1 + std::exp(1.0) + std::exp(-0.5)) / 3);
    CHECK(log_mean_exp(big) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("entropic risk of a constant is exactly minus the constant") {
    for (double c : {-2.5, 0.0, 1e8})
        for (double l2 : {1e-9, 0.3, 40.0}) {
            const std::vector<double> xi(10, c);
            const auto r = entropic_risk(xi, l2);
            CHECK(r.value == -c);
            CHECK(r.degenerate);
            CHECK(r.std_error == 0);
        }
}

TEST_CASE("entropic risk of a Gaussian sample matches the cumulant formula") {
    NormalStream z(17, 0);
    std::vector<double> xi(200000);
    for (auto& v : xi) v = -0.5 + 1.5 * z();
    for (double l2 : {0.1, 0.6}) {
        const auto r = entropic_risk(xi, l2);
        const double exact = 0.5 + l2 * 1.5 * 1.5 / 2;
        CHECK(std::abs(r.value - exact) < 4 * r.std_error);
        CHECK(r.half_width == doctest::Approx(kZ99 * r.std_error));
        CHECK(r.effective_samples < xi.size());
    }
}

TEST_CASE("exact two-point lottery") {
    const Lottery l{{0.5, 0.5}, {0.0, 1.0}};
    for (double l2 : {0.1, 1.0, 7.0})
        CHECK(exact_entropic(l, l2) == doctest::Approx(std::log((1 + std::exp(-l2)) / 2) / l2).epsilon(1e-15));
}

TEST_CASE("axiom suite passes and flags the alternative signs") {
    const auto battery = default_battery();
    for (double l2 : {0.05, 1.0, 5.0}) {
        const auto rep = axiom_suite(l2, battery);
        CHECK(rep.passed());
        CHECK_NOTHROW(require_axioms(rep));
        int translation = 0, semigroup = 0;
        for (const auto& f : rep.flagged) {
            translation += f.axiom.find("translation") == 0 && !f.passed;
            semigroup += f.axiom.find("semigroup") == 0 && !f.passed;
        }
        CHECK(translation > 0);
        CHECK(semigroup > 0);
    }
}

TEST_CASE("a tampered report is rejected") {
    auto rep = axiom_suite(1.0, default_battery());
    rep.checks.front().passed = false;
    CHECK_THROWS_AS(require_axioms(rep), AxiomViolation);
}

TEST_CASE("objective estimator is unbiased for the discrete chain at several points") {
    for (double rho : {0.1, 0.5, 0.9}) {
        const auto m = reference(rho);
        // at 64 steps the chain with rho = 0.9 has no finite exponential moment from x = 1e6
        const int n = rho > 0.8 ? 128 : 64;
        for (auto [t, x] : {std::pair{0.0, 1e6}, std::pair{2.0, 3e5}, std::pair{4.0, -5e5}}) {
            const double exact = static_cast<double>(oracle::discrete_objective(m, n, t, x));
            const auto est = objective_estimate(m, optimal_control(m), t, x, small(20000, n, false));
            CHECK(std::abs(est.estimate.value - exact) < 4 * est.estimate.std_error);
        }
    }
}

TEST_CASE("Richardson combination is unbiased for its discrete target") {
    const int n = 128;
    const auto m = reference(0.5);
    const auto exact = 2 * oracle::discrete_objective(m, n, 0.0, 1e6) - oracle::discrete_objective(m, n / 2, 0.0, 1e6);
    const auto est = objective_estimate(m, optimal_control(m), 0.0, 1e6, small(20000, n, true));
    CHECK(std::abs(est.estimate.value - static_cast<double>(exact)) < 4 * est.estimate.std_error);
    CHECK(est.estimate.value == doctest::Approx(2 * est.fine - est.coarse).epsilon(1e-12));
}

TEST_CASE("perturbed controls are estimated without bias and tilting cuts the variance") {
    const int n = 64;
    const auto m = reference(0.5);
    const auto ctrl = affine_control(optimal_control(m), 1.2, 0, "(1+0.2)v*");
    const double exact = static_cast<double>(oracle::discrete_objective(m, n, 0.0, 1e6, 1.2, 0));
    const auto tilted = objective_estimate(m, ctrl, 0.0, 1e6, small(20000, n, false, true));
    const auto plain = objective_estimate(m, ctrl, 0.0, 1e6, small(20000, n, false, false));
    CHECK(std::abs(tilted.estimate.value - exact) < 4 * tilted.estimate.std_error);
    CHECK(std::abs(plain.estimate.value - exact) < 4 * plain.estimate.std_error);
    CHECK(tilted.estimate.std_error < plain.estimate.std_error);
}

TEST_CASE("risk-neutral objective is a plain mean") {
    const int n = 64;
    const auto m = reference(0.0);
    const double exact = static_cast<double>(oracle::discrete_objective(m, n, 0.0, 1e6));
    const auto est = objective_estimate(m, optimal_control(m), 0.0, 1e6, small(20000, n, false));
    CHECK(std::abs(est.estimate.value - exact) < 4 * est.estimate.std_error);
}

TEST_CASE("estimates do not depend on the worker count") {
    const auto m = reference(0.9);
    auto o = small(3000, 32, true);
    const auto a = objective_estimate(m, optimal_control(m), 0.0, 1e6, o);
    o.workers = 3;
    const auto b = objective_estimate(m, optimal_control(m), 0.0, 1e6, o);
    CHECK(a.estimate.value == b.estimate.value);
    CHECK(a.estimate.std_error == b.estimate.std_error);
}

TEST_CASE("exponent spread beyond the bound raises Overflow") {
    const auto m = reference(0.9);
    auto o = small(2000, 32, true, false);
    o.spread_bound = 1e-3;
    CHECK_THROWS_AS(objective_estimate(m, optimal_control(m), 0.0, 1e6, o), Overflow);
    o.steps = 33;
    CHECK_THROWS_AS(objective_estimate(m, optimal_control(m), 0.0, 1e6, o), GridError);
    CHECK_THROWS_AS(objective_estimate(m, optimal_control(m), 5.0, 1e6, small(100, 32, true)), OutOfRange);
}

TEST_CASE("suboptimality scan over the standard family") {
    const auto m = reference(0.5);
    const auto family = standard_family(m);
    REQUIRE(family.size() == 8);
    CHECK(family[0].tag() == "v*");
    CHECK(family[5].tag() == "(1+0.2)v*");
    CHECK(family[7].tag() == "v*+0.1v_bar");
    const auto scan = suboptimality_scan(m, family, 0.0, 1e6, small(4000, 512, true));
    CHECK(scan.w == doctest::Approx(value_function(m, 0.0, 1e6)));
    for (const auto& row : scan.rows) CHECK(row.J <= scan.w + 3 * row.half_width);
    const auto d = paired_difference(scan.estimates[0], scan.estimates[5]);
    CHECK(d.diff > 3 * d.std_error);
    std::ostringstream os;
    write_scan_csv(os, scan);
    CHECK(os.str().rfind("tag,J,stderr,gap,halfwidth\n", 0) == 0);
}
