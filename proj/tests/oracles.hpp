#ifndef OPTEXEC_TESTS_ORACLES_HPP
#define OPTEXEC_TESTS_ORACLES_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "optexec/closed_form.hpp"

namespace oracle {

// Quadratic p x² + q x + r.
struct Quad {
    long double r = 0, q = 0, p = 0;
};

inline Quad mul(const Quad& a, const Quad& b) {
    if (a.p != 0 && b.p != 0) throw std::logic_error("degree overflow");
    return {a.r * b.r, a.r * b.q + a.q * b.r, a.r * b.p + a.q * b.q + a.p * b.r};
}
inline Quad add(const Quad& a, const Quad& b) { return {a.r + b.r, a.q + b.q, a.p + b.p}; }
inline Quad scale(const Quad& a, long double s) { return {a.r * s, a.q * s, a.p * s}; }
inline long double at(const Quad& a, long double x) { return (a.p * x + a.q) * x + a.r; }

/// Objective of the discrete sample-and-hold chain X_{i+1} = X_i − v_i Δt + m ΔB
/// under the linear feedback v_i = alpha_i X_i + beta_i, with running cost
/// φ(½(X_i + X_{i+1}), v_i) Δt and terminal cost β X_N². Computed exactly by a
/// backward recursion on quadratic exponents (Gaussian integrals), so it has no
/// sampling error. Throws when the exponential moment is infinite.
inline long double discrete_objective(const optexec::ModelParams<double>& p, const std::vector<long double>& alpha,
                                      const std::vector<long double>& beta, long double dt, long double x) {
    const int n = static_cast<int>(alpha.size());
    const long double th = p.lambda2;
    const long double el = (long double)p.eta + p.lambda1;
    const long double lv = (long double)p.lambda1 * p.v_bar;
    const long double c0 = (long double)p.gamma * p.m * p.m - lv * p.v_bar;
    const long double s2 = (long double)p.m * p.m * dt;
    Quad V{0, 0, (long double)p.beta};
    for (int i = n - 1; i >= 0; --i) {
        const Quad v{beta[i], alpha[i], 0};
        const Quad mu{-beta[i] * dt, 1 - alpha[i] * dt, 0};
        // cost over the step, split into the part depending on X_i and the part linear in X_{i+1}
        Quad cost = add(scale(mul(v, v), el * dt), mul(Quad{-2 * lv * dt, (long double)p.gamma * dt / 2, 0}, v));
        cost.r -= c0 * dt;
        const Quad q_eff = add(Quad{V.q, 0, 0}, scale(v, (long double)p.gamma * dt / 2));
        Quad next;
        if (th > 0) {
            const long double k = 1 - 2 * th * V.p * s2;
            if (!(k > 0)) throw std::domain_error("exponential moment is infinite");
            next = add(add(scale(mul(mu, mu), V.p / k), scale(mul(q_eff, mu), 1 / k)),
                       scale(mul(q_eff, q_eff), th * s2 / (2 * k)));
            next.r += V.r - std::log(k) / (2 * th);
        } else {
            next = add(scale(mul(mu, mu), V.p), mul(q_eff, mu));
            next.r += V.p * s2 + V.r;
        }
        V = add(next, cost);
    }
    return -at(V, x);
}

/// Same chain under (scale · v* + shift) on the grid t0 + i (T − t0)/n.
inline long double discrete_objective(const optexec::Model<double>& mdl, int n, double t0, double x,
                                      double scale_by = 1, double shift = 0) {
    const auto& p = mdl.params;
    const long double dt = ((long double)p.T - t0) / n;
    std::vector<long double> alpha(n), beta(n);
    for (int i = 0; i < n; ++i) {
        const double t = t0 + i * static_cast<double>(dt);
        const auto c = optexec::eval_coefficients(mdl, t);
        const long double el2 = 2 * ((long double)p.eta + p.lambda1);
        alpha[i] = scale_by * (-(long double)c.a / el2);
        beta[i] = scale_by * (-((long double)c.b - 2 * (long double)p.lambda1 * p.v_bar) / el2) + shift;
    }
    return discrete_objective(p, alpha, beta, dt, x);
}

} // namespace oracle

#endif // OPTEXEC_TESTS_ORACLES_HPP
