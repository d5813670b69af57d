#include "doctest.h"

#include <cmath>

#include "optexec/hjb.hpp"

using namespace optexec;

namespace {

Model<double> reference(double rho) { return validate(reference_params<double>(rho)); }

Grid<double> grid(const Model<double>& m, int nt, int nx) {
    return {0, m.params.T, nt, -2 * m.params.x0, 2 * m.params.x0, nx};
}

double sup_gap(const std::vector<double>& a, const std::vector<double>& b) {
    double g = 0, s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        g = std::max(g, std::abs(a[i] - b[i]));
        s = std::max(s, std::abs(a[i]));
    }
    return g / s;
}

} // namespace

TEST_CASE("closed form solves the HJB equation to rounding") {
    for (double rho : {0.0, 0.1, 0.5, 0.9}) {
        const auto m = reference(rho);
        const auto rep = hjb_residual(m, closed_form_surface(m), grid(m, 200, 200));
        CHECK(rep.max_rel < 1e-12);
    }
}

TEST_CASE("perturbed surfaces leave a residual") {
    const auto m = reference(0.5);
    const auto exact = closed_form_surface(m);
    CandidateSurface<double> bumped;
    bumped.value = [&](double t, double x) { return exact.value(t, x) + 1e-3 * x * x; };
    const auto rep = hjb_residual(m, bumped, grid(m, 40, 40));
    CHECK(rep.max_rel > 1e-3);
}

TEST_CASE("finite-difference residual shrinks under refinement") {
    const auto m = reference(0.5);
    const auto numeric = closed_form_surface(m, false);
    double prev = 1e300;
    // the terminal layer of a(t) is resolved from about 800 time points on
    for (int nt : {800, 1600, 3200}) {
        const double r = hjb_residual(m, numeric, grid(m, nt, 40)).max_rel;
        CHECK(r < prev / 8);
        prev = r;
    }
}

TEST_CASE("residual grid must be usable") {
    const auto m = reference(0.5);
    CHECK_THROWS_AS(hjb_residual(m, closed_form_surface(m, false), grid(m, 5, 40)), GridError);
    Grid<double> outside{0, m.params.T + 1, 10, -1, 1, 10};
    CHECK_THROWS_AS(hjb_residual(m, closed_form_surface(m), outside), GridError);
}

TEST_CASE("Riccati right-hand side equals the analytic time derivatives") {
    for (double rho : {0.0, 0.5, 0.9}) {
        const auto m = reference(rho);
        for (double t : {0.0, 2.0, 4.5}) {
            const auto c = eval_coefficients(m, t);
            const auto r = coefficient_rates(m, t);
            const Vec3<double> f = riccati_rhs(m, Vec3<double>(c.a, c.b, c.c));
            CHECK(f(0) == doctest::Approx(r.da).epsilon(1e-11));
            CHECK(f(1) == doctest::Approx(r.db).epsilon(1e-11));
            CHECK(f(2) == doctest::Approx(r.dc).epsilon(1e-11));
        }
    }
}

TEST_CASE("RK4 converges to the closed form at fourth order") {
    const auto m = reference(0.9);
    auto gap = [&](int steps) {
        const auto s = integrate_riccati(m, steps);
        std::vector<double> cf;
        for (double t : s.t) cf.push_back(eval_coefficients(m, t).c);
        return sup_gap(cf, s.c);
    };
    const double ratio = gap(160) / gap(320);
    CHECK(ratio > 12);
    CHECK(ratio < 20);
    const auto fine = integrate_riccati(m, 100000);
    std::vector<double> a;
    for (double t : fine.t) a.push_back(eval_coefficients(m, t).a);
    CHECK(sup_gap(a, fine.a) < 1e-8);
}

TEST_CASE("RK4 reports blow-up past the bound") {
    const auto m = reference(0.5);
    CHECK_THROWS_AS(integrate_riccati(m, 100, 1e3), BlowUp);
    CHECK_THROWS_AS(integrate_riccati(m, 5), GridError);
}

TEST_CASE("reduced Hamiltonian is maximized by the optimal rate") {
    const auto m = reference(0.5);
    for (double t : {0.0, 3.0})
        for (double x : {-1e6, 2e5, 1.5e6}) {
            const auto c = eval_coefficients(m, t);
            const double q = c.a_minus_gamma * x + c.b;
            const double v = hamiltonian_maximizer(m, x, q);
            CHECK(v == doctest::Approx(optimal_rate(m, t, x)).epsilon(1e-12));
            HamiltonianInput<double> in{x, q, c.a_minus_gamma, v};
            CHECK(std::abs(hamiltonian_dv(m, in)) < 1e-9 * (1 + std::abs(q)));
            const double h0 = hamiltonian(m, in);
            for (double dv : {-1.0, 1.0}) {
                in.v = v + dv;
                CHECK(hamiltonian(m, in) < h0);
            }
        }
}

TEST_CASE("two-dimensional Hamiltonian reduces to the one-dimensional one") {
    const auto m = reference(0.5);
    const double x = 4e5, v = 120, qx = -3e3;
    Mat2<double> Q;
    Q << -5e-3, 0, 0, 0;
    const Vec2<double> q(qx, 0);
    // a value independent of S has q_s = 0 and only Q_xx nonzero
    CHECK(hamiltonian_2d_maximizer(m, x, q) == doctest::Approx(hamiltonian_maximizer(m, x, qx)).epsilon(1e-12));
    CHECK(hamiltonian_2d(m, x, q, Q, v) ==
          doctest::Approx(hamiltonian(m, HamiltonianInput<double>{x, qx, Q(0, 0), v})).epsilon(1e-12));
    // dependence on S shifts the maximizer by γ q_s
    const Vec2<double> qs(qx, 7.0);
    CHECK(hamiltonian_2d_maximizer(m, x, qs) ==
          doctest::Approx(hamiltonian_maximizer(m, x, qx + m.params.gamma * 7.0)).epsilon(1e-12));
}
