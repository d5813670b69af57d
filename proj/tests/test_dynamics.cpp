#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "optexec/dynamics.hpp"

using namespace optexec;

namespace {

Model<double> reference(double rho) { return validate(reference_params<double>(rho)); }

} // namespace

TEST_CASE("closed-loop path starts on the value function and ends near the terminal penalty") {
    const auto m = reference(0.5);
    const auto path = simulate_closed_loop(m, 4096, 11, 0);
    CHECK(path.Y.front() == doctest::Approx(value_function(m, 0.0, m.params.x0)).epsilon(1e-14));
    CHECK(path.X.size() == 4097);
    CHECK(path.t.back() == m.params.T);
    // ε_T is an order-one-half discretization error, a few percent of |w| at 4096 steps
    CHECK(std::abs(path.eps_T) < 0.1 * std::abs(path.Y.front()));
}

TEST_CASE("deterministic closed loop reproduces the terminal penalty and the P&L identity") {
    auto p = reference_params<double>(0.0);
    p.m = 0;
    p.sigma = 0;
    const auto m = validate(p);
    for (int n : {64, 256}) {
        const auto path = simulate_closed_loop(m, n, 1, 0);
        CHECK(std::abs(path.eps_T) < 1e-10 * std::abs(path.Y.front()));
        double scale = 0;
        for (double v : path.Pi0_closed) scale = std::max(scale, std::abs(v));
        CHECK(pnl_identity_check(path) < 1e-12 * scale);
    }
}

TEST_CASE("literal backward convention does not close at the terminal condition") {
    const auto m = reference(0.5);
    ClosedLoopOptions literal;
    literal.convention = BackwardConvention::Literal;
    double recast = 0, lit = 0;
    for (int j = 0; j < 20; ++j) {
        recast += std::pow(simulate_closed_loop(m, 1024, 3, j).eps_T, 2);
        lit += std::pow(simulate_closed_loop(m, 1024, 3, j, literal).eps_T, 2);
    }
    CHECK(lit > 100 * recast);
}

TEST_CASE("constant trading rate moves the position linearly without fill noise") {
    auto p = reference_params<double>(0.0);
    p.m = 0;
    p.sigma = 0;
    const auto path = simulate_forward(p, constant_control(2e5), 50, 1);
    for (std::size_t i = 0; i < path.X.size(); ++i)
        CHECK(path.X[i] == doctest::Approx(p.x0 - 2e5 * path.t[i]).epsilon(1e-12));
    // permanent impact lowers the fair price by γ v t
    CHECK(path.S.back() - p.s0 == doctest::Approx(-p.gamma * 2e5 * p.T).epsilon(1e-12));
}

TEST_CASE("transacted price carries the temporary impact") {
    const auto p = reference_params<double>(0.1);
    const auto path = simulate_forward(p, constant_control(1e5), 32, 2);
    for (std::size_t i = 0; i < path.S.size(); ++i)
        CHECK(path.S_tilde[i] == doctest::Approx(path.S[i] - p.eta * 1e5).epsilon(1e-15));
}

TEST_CASE("affine controls scale and shift their base rule") {
    const auto m = reference(0.5);
    const auto base = optimal_control(m);
    const auto bumped = affine_control(base, 1.1, 0.1, "bumped");
    CHECK(bumped.tag() == "bumped");
    CHECK(bumped(1.0, 3e5) == doctest::Approx(1.1 * base(1.0, 3e5) + 0.1));
    const auto rule = bumped.on_grid(0, m.params.T, 10);
    CHECK(rule(5, 3e5) == doctest::Approx(1.1 * optimal_rate(m, 2.5, 3e5) + 0.1).epsilon(1e-13));
    CHECK_THROWS_AS(base.on_grid(0, 2 * m.params.T, 10), GridError);
}

TEST_CASE("increments must span the horizon") {
    const auto m = reference(0.5);
    const FeedbackPolicy<double> policy(m, 64);
    CHECK_THROWS_AS(simulate_closed_loop(policy, draw_increments(32, m.params.T, 1, 0)), Error);
    CHECK_THROWS_AS(simulate_forward(m.params, constant_control(1), draw_increments(64, 1.0, 1, 0)), GridError);
}

TEST_CASE("path CSV has a stable header and 17 significant digits") {
    const auto m = reference(0.1);
    auto path = simulate_closed_loop(m, 8, 1, 0);
    path.tag = "0";
    std::ostringstream os;
    write_paths_csv(os, {path});
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "path,t,X,S,S_tilde,v,Pi0_direct,Pi0_closed,Y");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 9);
    const double x = 0.1 + 0.2;
    CHECK(std::stod(format_number(x)) == x);
    CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("terminal mismatch converges at order one half and does not depend on workers") {
    const auto m = reference(0.5);
    const std::vector<int> levels{256, 512, 1024, 2048};
    const auto one = terminal_mismatch_study(m, levels, 200, 5, 1);
    const auto three = terminal_mismatch_study(m, levels, 200, 5, 3);
    CHECK(one.rms == three.rms);
    CHECK(one.order == three.order);
    for (std::size_t i = 1; i < one.rms.size(); ++i) CHECK(one.rms[i] < one.rms[i - 1]);
    CHECK(std::abs(one.order - 0.5) < 4 * one.order_se + 0.05);

    ClosedLoopOptions mil;
    mil.scheme = BackwardScheme::Milstein;
    const auto better = terminal_mismatch_study(m, levels, 200, 5, 1, mil);
    CHECK(better.order > 0.85);
    CHECK(better.rms.back() < one.rms.back());
}

TEST_CASE("P&L identity gap shrinks at order one half") {
    const auto m = reference(0.5);
    const auto st = pnl_identity_study(m.params, optimal_control(m), {256, 512, 1024, 2048}, 200, 6, 2);
    for (std::size_t i = 1; i < st.rms.size(); ++i) CHECK(st.rms[i] < st.rms[i - 1]);
    CHECK(std::abs(st.order - 0.5) < 4 * st.order_se + 0.05);
}

TEST_CASE("order regression recovers a planted slope") {
    const std::vector<int> steps{100, 200, 400, 800};
    std::vector<std::vector<double>> sq(4, std::vector<double>(40));
    for (int l = 0; l < 4; ++l)
        for (int j = 0; j < 40; ++j) sq[l][j] = (1 + 0.01 * (j % 5)) / (steps[l] * steps[l] * 1.0);
    const auto st = convergence_from_squares(steps, sq);
    CHECK(st.order == doctest::Approx(1.0).epsilon(1e-12));
}
