#ifndef OPTEXEC_HJB_HPP
#define OPTEXEC_HJB_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "optexec/closed_form.hpp"

namespace optexec {

template <typename Scalar>
struct HamiltonianInput {
    Scalar x = 0;
    Scalar q = 0; // w_x
    Scalar Q = 0; // w_xx
    Scalar v = 0;
};

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

/// Running cost phi(x, v) = (η+λ₁)v² + (γx − 2λ₁v̄)v − (γm² − λ₁v̄²).
template <typename Scalar>
Scalar running_cost(const ModelParams<Scalar>& p, Scalar x, Scalar v) {
    return (p.eta + p.lambda1) * v * v + (p.gamma * x - 2 * p.lambda1 * p.v_bar) * v
           - (p.gamma * p.m * p.m - p.lambda1 * p.v_bar * p.v_bar);
}

/// Quadratic driver: running cost plus (λ₂/2)|z|².
template <typename Scalar>
Scalar driver(const ModelParams<Scalar>& p, Scalar x, const Vec2<Scalar>& z, Scalar v) {
    return running_cost(p, x, v) + p.lambda2 / 2 * z.squaredNorm();
}

/// Volatility matrix of (X, S).
template <typename Scalar>
Mat2<Scalar> volatility(const ModelParams<Scalar>& p) {
    Mat2<Scalar> s;
    s << p.m, 0, p.gamma * p.m, p.sigma;
    return s;
}

template <typename Scalar>
Vec2<Scalar> drift(const ModelParams<Scalar>& p, Scalar v) {
    return Vec2<Scalar>(-v, -p.gamma * v);
}

/// Reduced one-dimensional Hamiltonian in which the value depends on x only.
template <typename Scalar>
Scalar hamiltonian(const Model<Scalar>& mdl, const HamiltonianInput<Scalar>& in) {
    const auto& p = mdl.params;
    return p.m * p.m * in.Q / 2 - in.v * in.q - driver(p, in.x, Vec2<Scalar>(p.m * in.q, 0), in.v);
}

/// ∂H/∂v of the reduced Hamiltonian.
template <typename Scalar>
Scalar hamiltonian_dv(const Model<Scalar>& mdl, const HamiltonianInput<Scalar>& in) {
    const auto& p = mdl.params;
    return -in.q - 2 * (p.eta + p.lambda1) * in.v - (p.gamma * in.x - 2 * p.lambda1 * p.v_bar);
}

/// Hamiltonian over the (X, S) state with gradient q and Hessian Q.
template <typename Scalar>
Scalar hamiltonian_2d(const Model<Scalar>& mdl, Scalar x, const Vec2<Scalar>& q, const Mat2<Scalar>& Q, Scalar v) {
    const auto& p = mdl.params;
    const Mat2<Scalar> sig = volatility(p);
    return (sig * sig.transpose() * Q).trace() / 2 + drift(p, v).dot(q) - driver(p, x, Vec2<Scalar>(sig.transpose() * q), v);
}

template <typename Scalar>
Scalar hamiltonian_maximizer(const Model<Scalar>& mdl, Scalar x, Scalar q) {
    const auto& p = mdl.params;
    return -(q + p.gamma * x - 2 * p.lambda1 * p.v_bar) / (2 * (p.eta + p.lambda1));
}

template <typename Scalar>
Scalar hamiltonian_2d_maximizer(const Model<Scalar>& mdl, Scalar x, const Vec2<Scalar>& q) {
    const auto& p = mdl.params;
    return -(q(0) + p.gamma * q(1) + p.gamma * x - 2 * p.lambda1 * p.v_bar) / (2 * (p.eta + p.lambda1));
}

template <typename Scalar>
struct SurfaceDerivatives {
    Scalar w = 0;
    Scalar wt = 0;
    Scalar wx = 0;
    Scalar wxx = 0;
};

/// Candidate value surface. When `derivatives` is empty the residual
/// operator differentiates `value` numerically on the grid.
template <typename Scalar>
struct CandidateSurface {
    std::function<Scalar(Scalar, Scalar)> value;
    std::function<SurfaceDerivatives<Scalar>(Scalar, Scalar)> derivatives;
};

template <typename Scalar>
CandidateSurface<Scalar> closed_form_surface(const Model<Scalar>& mdl, bool analytic = true) {
    CandidateSurface<Scalar> s;
    s.value = [mdl](Scalar t, Scalar x) { return value_function(mdl, t, x); };
    if (analytic) {
        s.derivatives = [mdl](Scalar t, Scalar x) {
            const auto c = eval_coefficients(mdl, t);
            const auto r = coefficient_rates(mdl, t);
            return SurfaceDerivatives<Scalar>{value_from(c, x), r.da * x * x / 2 + r.db * x + r.dc,
                                              c.a_minus_gamma * x + c.b, c.a_minus_gamma};
        };
    }
    return s;
}

template <typename Scalar>
struct Grid {
    Scalar t_min = 0, t_max = 0;
    int nt = 0;
    Scalar x_min = 0, x_max = 0;
    int nx = 0;

    Scalar dt() const { return (t_max - t_min) / (nt - 1); }
    Scalar dx() const { return (x_max - x_min) / (nx - 1); }
    Scalar t(int i) const { return i == nt - 1 ? t_max : t_min + i * dt(); }
    Scalar x(int j) const { return j == nx - 1 ? x_max : x_min + j * dx(); }
};

template <typename Scalar>
struct HjbResidualReport {
    Grid<Scalar> grid;
    Scalar max_abs = 0;
    Scalar max_rel = 0;
    Scalar worst_t = 0;
    Scalar worst_x = 0;
};

template <typename Scalar>
struct HjbTerms {
    Scalar values[6];

    Scalar sum() const {
        Scalar s = 0;
        for (auto v : values) s += v;
        return s;
    }
    Scalar scale() const {
        Scalar s = 0;
        for (auto v : values) s = std::max<Scalar>(s, std::abs(v));
        return s;
    }
};

template <typename Scalar>
HjbTerms<Scalar> hjb_terms(const Model<Scalar>& mdl, Scalar x, const SurfaceDerivatives<Scalar>& d) {
    const auto& p = mdl.params;
    const Scalar u = d.wx + p.gamma * x - 2 * p.lambda1 * p.v_bar;
    return {{d.wt, p.m * p.m * d.wxx / 2, -p.lambda2 * p.m * p.m * d.wx * d.wx / 2, p.gamma * p.m * p.m,
             -p.lambda1 * p.v_bar * p.v_bar, u * u / (4 * (p.eta + p.lambda1))}};
}

namespace detail {

// Fornberg's recursion for finite-difference weights of derivative `order`
// at z over the given nodes.
template <typename Scalar>
std::vector<Scalar> fd_weights(Scalar z, const std::vector<Scalar>& nodes, int order) {
    const int n = static_cast<int>(nodes.size());
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> c =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, order + 1);
    Scalar c1 = 1, c4 = nodes[0] - z;
    c(0, 0) = 1;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, order);
        Scalar c2 = 1;
        const Scalar c5 = c4;
        c4 = nodes[i] - z;
        for (int j = 0; j < i; ++j) {
            const Scalar c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
                c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
            }
            for (int k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
            c(j, 0) = c4 * c(j, 0) / c3;
        }
        c1 = c2;
    }
    std::vector<Scalar> w(n);
    for (int i = 0; i < n; ++i) w[i] = c(i, order);
    return w;
}

// Fourth-order derivative of `order` (1 or 2) at index i of uniformly spaced
// samples f with spacing h. Centered where possible, one-sided near the ends.
template <typename Scalar, typename Getter>
Scalar fd4(const Getter& f, int n, int i, Scalar h, int order) {
    const int width = order == 1 ? 5 : (i < 2 || i > n - 3 ? 6 : 5);
    int start = i - 2;
    start = std::clamp(start, 0, n - width);
    std::vector<Scalar> nodes(width);
    for (int k = 0; k < width; ++k) nodes[k] = Scalar(start + k - i);
    const auto w = fd_weights<Scalar>(0, nodes, order);
    Scalar s = 0;
    for (int k = 0; k < width; ++k) s += w[k] * f(start + k);
    Scalar hp = order == 1 ? h : h * h;
    return s / hp;
}

} // namespace detail

template <typename Scalar>
HjbResidualReport<Scalar> hjb_residual(const Model<Scalar>& mdl, const CandidateSurface<Scalar>& w, const Grid<Scalar>& g) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const bool numeric = !w.derivatives;
    const int min_points = numeric ? 6 : 1;
    if (g.nt < min_points || g.nx < min_points || !(g.t_max > g.t_min || g.nt == 1) || !(g.x_max > g.x_min || g.nx == 1))
        throw GridError("degenerate residual grid");
    if (g.t_min < 0 || g.t_max > mdl.params.T) throw GridError("time grid outside [0, T]");

    Matrix W;
    if (numeric) {
        W.resize(g.nt, g.nx);
        for (int i = 0; i < g.nt; ++i)
            for (int j = 0; j < g.nx; ++j) W(i, j) = w.value(g.t(i), g.x(j));
    }

    HjbResidualReport<Scalar> rep;
    rep.grid = g;
    for (int i = 0; i < g.nt; ++i) {
        for (int j = 0; j < g.nx; ++j) {
            const Scalar t = g.t(i), x = g.x(j);
            SurfaceDerivatives<Scalar> d;
            if (numeric) {
                d.w = W(i, j);
                d.wt = detail::fd4<Scalar>([&](int k) { return W(k, j); }, g.nt, i, g.dt(), 1);
                d.wx = detail::fd4<Scalar>([&](int k) { return W(i, k); }, g.nx, j, g.dx(), 1);
                d.wxx = detail::fd4<Scalar>([&](int k) { return W(i, k); }, g.nx, j, g.dx(), 2);
            } else {
                d = w.derivatives(t, x);
            }
            const auto terms = hjb_terms(mdl, x, d);
            const Scalar r = std::abs(terms.sum());
            const Scalar scale = terms.scale();
            const Scalar rel = scale > 0 ? r / scale : r;
            rep.max_abs = std::max(rep.max_abs, r);
            if (rel > rep.max_rel || (i == 0 && j == 0)) {
                rep.max_rel = rel;
                rep.worst_t = t;
                rep.worst_x = x;
            }
        }
    }
    return rep;
}

/// Right-hand side (d/dt) of the Riccati system for (a, b, c).
template <typename Scalar>
Vec3<Scalar> riccati_rhs(const Model<Scalar>& mdl, const Vec3<Scalar>& y) {
    const auto& p = mdl.params;
    const Scalar k = mdl.derived.k;
    const Scalar mu = p.lambda2 * p.m * p.m;
    const Scalar lv = p.lambda1 * p.v_bar;
    const Scalar a = y(0), b = y(1);
    return Vec3<Scalar>((mu - k) * a * a - 2 * mu * p.gamma * a + mu * p.gamma * p.gamma,
                        (mu - k) * a * b - mu * p.gamma * b + 2 * k * lv * a,
                        (mu - k) * b * b / 2 + 2 * k * lv * b - p.m * p.m * a / 2 - p.m * p.m * p.gamma / 2
                            + lv * p.v_bar - 2 * k * lv * lv);
}

template <typename Scalar>
struct RiccatiSolution {
    std::vector<Scalar> t, a, b, c;
};

/// Classical RK4 in τ = T − t from the terminal values, sampled on the
/// uniform grid t_j = j T / steps.
template <typename Scalar>
RiccatiSolution<Scalar> integrate_riccati(const Model<Scalar>& mdl, int steps, Scalar bound = Scalar(1e100)) {
    if (steps < 10) throw GridError("integrate_riccati needs at least 10 steps");
    const auto& p = mdl.params;
    const Scalar h = p.T / steps;
    auto f = [&](const Vec3<Scalar>& y) -> Vec3<Scalar> { return -riccati_rhs(mdl, y); };
    RiccatiSolution<Scalar> out;
    out.t.resize(steps + 1);
    out.a.resize(steps + 1);
    out.b.resize(steps + 1);
    out.c.resize(steps + 1);
    Vec3<Scalar> y(-2 * p.beta + p.gamma, 0, 0);
    for (int n = 0; n <= steps; ++n) {
        const int j = steps - n;
        out.t[j] = j == 0 ? Scalar(0) : p.T - n * h;
        out.a[j] = y(0);
        out.b[j] = y(1);
        out.c[j] = y(2);
        if (!(y.cwiseAbs().maxCoeff() <= bound)) throw BlowUp("Riccati coefficient exceeded bound");
        if (n == steps) break;
        const Vec3<Scalar> k1 = f(y);
        const Vec3<Scalar> k2 = f(y + h / 2 * k1);
        const Vec3<Scalar> k3 = f(y + h / 2 * k2);
        const Vec3<Scalar> k4 = f(y + h * k3);
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    out.t[steps] = p.T;
    return out;
}

} // namespace optexec

#endif // OPTEXEC_HJB_HPP
