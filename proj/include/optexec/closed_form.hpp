#ifndef OPTEXEC_CLOSED_FORM_HPP
#define OPTEXEC_CLOSED_FORM_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "optexec/params.hpp"

namespace optexec {

template <typename Scalar>
struct PolicyCoefficients {
    Scalar t = 0;
    Scalar a = 0;
    Scalar b = 0;
    Scalar c = 0;
    Scalar a_minus_gamma = 0;
    Scalar ell = 0; // scheduled target l(T - t) = -b/a
};

/// Time derivatives (d/dt) of a, b, c obtained by differentiating the
/// explicit solution, not by evaluating the ODE right-hand side.
template <typename Scalar>
struct CoefficientRates {
    Scalar da = 0;
    Scalar db = 0;
    Scalar dc = 0;
};

template <typename Scalar>
struct BackwardControls {
    Scalar zt1 = 0; // shifted controls
    Scalar zt2 = 0;
    Scalar z1 = 0;  // controls of the risk-adjusted value
    Scalar z2 = 0;
};

template <typename Scalar>
struct RateForms {
    Scalar feedback = 0; // -(a x + b - 2 lambda1 v_bar) / (2 (eta + lambda1))
    Scalar anchored = 0; // v_bar_ell - a (x - l) / (2 (eta + lambda1))
};

template <typename Scalar>
struct LateStage {
    Scalar ell0 = 0;
    Scalar a0 = 0;
};

template <typename Scalar>
struct EarlyStage {
    Scalar ell_inf = 0;
    Scalar a_inf = 0;
    Scalar x_bar_inf = 0;    // (2/γ)(η+λ₁)(1/√(κλ₂) + 1)λ₁v̄ as stated for the OU limit
    Scalar x_stationary = 0; // zero of the limiting drift, 2λ₁v̄/γ
    Scalar reversion = 0;    // -a_inf / (2 (eta + lambda1))
};

template <typename Scalar>
struct AsymptoticRegime {
    LateStage<Scalar> late;
    EarlyStage<Scalar> early;
};

namespace detail {

// Below this value of kappa * lambda2 the hyperbolic forms are replaced by
// their analytic limits.
template <typename Scalar>
constexpr Scalar rho_floor() { return Scalar(1e-14); }

template <typename Scalar>
Scalar effective_s(const DerivedConstants<Scalar>& d) {
    return d.rho < rho_floor<Scalar>() ? Scalar(0) : d.s;
}

// tanh(x)/x
template <typename Scalar>
Scalar tanhc(Scalar x) {
    using std::tanh;
    if (x < Scalar(1e-2)) {
        const Scalar y = x * x;
        return 1 + y * (Scalar(-1) / 3 + y * (Scalar(2) / 15 + y * (Scalar(-17) / 315 + y * Scalar(62) / 2835)));
    }
    return tanh(x) / x;
}

// (1 - sech x) / x^2
template <typename Scalar>
Scalar sech_gap(Scalar x) {
    using std::cosh;
    using std::exp;
    using std::sinh;
    if (x < Scalar(1e-4)) {
        const Scalar y = x * x;
        return Scalar(1) / 2 + y * (Scalar(-5) / 24 + y * Scalar(61) / 720);
    }
    if (x > 30) {
        const Scalar e = exp(-x);
        return (1 - 2 * e / (1 + e * e)) / (x * x);
    }
    const Scalar h = sinh(x / 2);
    return 2 * h * h / (cosh(x) * x * x);
}

template <typename Scalar>
Scalar sech(Scalar x) {
    using std::exp;
    const Scalar e = exp(-x);
    return 2 * e / (1 + e * e);
}

template <typename Scalar>
Scalar log_cosh(Scalar x) {
    using std::exp;
    using std::log;
    using std::log1p;
    using std::sinh;
    if (x < 1) {
        const Scalar h = sinh(x / 2);
        return log1p(2 * h * h);
    }
    return x + log1p(exp(-2 * x)) - log(Scalar(2));
}

// Shared intermediates of the explicit solution at horizon tau = T - t.
template <typename Scalar>
struct Kernel {
    Scalar s, x, theta, chi, E, den;
};

template <typename Scalar>
Kernel<Scalar> kernel(const Model<Scalar>& mdl, Scalar tau) {
    const auto& p = mdl.params;
    const auto& d = mdl.derived;
    Kernel<Scalar> q;
    q.s = effective_s(d);
    q.x = p.gamma * q.s * d.k * tau;
    q.theta = d.k * tau * tanhc(q.x);
    q.chi = sech_gap(q.x) * q.s * q.s * d.k * d.k * tau * tau;
    q.E = 2 * p.beta - p.gamma - 2 * p.beta * q.s * q.s;
    q.den = 1 + q.theta * q.E;
    return q;
}

template <typename Scalar>
void check_time(const Model<Scalar>& mdl, Scalar t) {
    if (!(t >= 0 && t <= mdl.params.T)) throw OutOfRange("t outside [0, T]");
}

} // namespace detail

/// Explicit Riccati solution at horizon tau = T - t (no range check).
template <typename Scalar>
PolicyCoefficients<Scalar> coefficients_at_horizon(const Model<Scalar>& mdl, Scalar tau) {
    using std::log1p;
    const auto& p = mdl.params;
    const auto q = detail::kernel(mdl, tau);
    const Scalar two_beta_gamma = 2 * p.beta - p.gamma;
    const Scalar s2 = q.s * q.s;
    const Scalar lv = p.lambda1 * p.v_bar;

    PolicyCoefficients<Scalar> out;
    out.t = p.T - tau;
    const Scalar a_num = two_beta_gamma + 2 * p.beta * p.gamma * s2 * q.theta;
    const Scalar b_num = two_beta_gamma * q.theta + 2 * p.beta * p.gamma * q.chi;
    out.a = -a_num / q.den;
    out.a_minus_gamma = -(2 * p.beta + p.gamma * two_beta_gamma * q.theta) / q.den;
    out.b = 2 * lv * b_num / q.den;
    out.ell = 2 * lv * b_num / a_num;
    out.c = p.m * p.m * p.gamma * tau * (1 - 2 * s2) / (2 * (1 - s2))
            - p.m * p.m * (p.eta + p.lambda1) / (1 - s2) * (detail::log_cosh(q.x) + log1p(q.theta * q.E))
            - lv * p.v_bar * tau
            + 2 * lv * lv * (q.theta - 4 * p.beta * q.chi) / q.den;
    return out;
}

template <typename Scalar>
PolicyCoefficients<Scalar> eval_coefficients(const Model<Scalar>& mdl, Scalar t) {
    detail::check_time(mdl, t);
    auto c = coefficients_at_horizon(mdl, mdl.params.T - t);
    c.t = t;
    return c;
}

template <typename Scalar>
CoefficientRates<Scalar> coefficient_rates(const Model<Scalar>& mdl, Scalar t) {
    using std::tanh;
    detail::check_time(mdl, t);
    const auto& p = mdl.params;
    const auto& d = mdl.derived;
    const Scalar tau = p.T - t;
    const auto q = detail::kernel(mdl, tau);
    const Scalar s2 = q.s * q.s;
    const Scalar sech = detail::sech(q.x);
    const Scalar dtheta = d.k * sech * sech;
    const Scalar dchi = s2 * d.k * sech * q.theta;
    const Scalar two_beta_gamma = 2 * p.beta - p.gamma;
    const Scalar lv = p.lambda1 * p.v_bar;
    const Scalar den2 = q.den * q.den;

    const Scalar da = -dtheta * (4 * p.beta * p.beta * s2 - two_beta_gamma * two_beta_gamma) / den2;
    const Scalar b_num = two_beta_gamma * q.theta + 2 * p.beta * p.gamma * q.chi;
    const Scalar db_num = two_beta_gamma * dtheta + 2 * p.beta * p.gamma * dchi;
    const Scalar db = 2 * lv * (db_num * q.den - b_num * q.E * dtheta) / den2;
    const Scalar c_num = q.theta - 4 * p.beta * q.chi;
    const Scalar dc_num = dtheta - 4 * p.beta * dchi;
    const Scalar dc = p.m * p.m * p.gamma * (1 - 2 * s2) / (2 * (1 - s2))
                      - p.m * p.m * (p.eta + p.lambda1) / (1 - s2) * (d.rate_arg * (q.s > 0 ? tanh(q.x) : Scalar(0)) + q.E * dtheta / q.den)
                      - lv * p.v_bar
                      + 2 * lv * lv * (dc_num * q.den - c_num * q.E * dtheta) / den2;
    return {-da, -db, -dc};
}

/// a(t) evaluated literally from the sinh/cosh expression. Requires γ√(κλ₂) > 0;
/// returns NaN where the hyperbolic functions would overflow.
template <typename Scalar>
Scalar a_hyperbolic_form(const Model<Scalar>& mdl, Scalar t) {
    using std::cosh;
    using std::sinh;
    const auto& p = mdl.params;
    const Scalar s = mdl.derived.s;
    const Scalar x = mdl.derived.rate_arg * (p.T - t);
    if (!(x < std::log(std::numeric_limits<Scalar>::max()) - 1)) return std::numeric_limits<Scalar>::quiet_NaN();
    const Scalar sh = sinh(x), ch = cosh(x);
    return -p.gamma * s * (2 * p.beta * s * sh + (2 * p.beta - p.gamma) * ch)
           / ((2 * p.beta * (1 - s * s) - p.gamma) * sh + p.gamma * s * ch);
}

/// a(t) from the tanh restatement of the policy. Requires γ√(κλ₂) > 0.
template <typename Scalar>
Scalar a_tanh_form(const Model<Scalar>& mdl, Scalar t) {
    using std::tanh;
    const auto& p = mdl.params;
    const Scalar s = mdl.derived.s;
    const Scalar th = tanh(mdl.derived.rate_arg * (p.T - t));
    const Scalar tbg = 2 * p.beta - p.gamma;
    return -p.gamma * s * (2 * p.beta * s * th + tbg)
           / (tbg * (1 - s * s) * th + p.gamma * s * (1 - s * th));
}

/// l(T - t) evaluated literally from the sinh/cosh expression.
template <typename Scalar>
Scalar ell_hyperbolic_form(const Model<Scalar>& mdl, Scalar t) {
    using std::cosh;
    using std::sinh;
    const auto& p = mdl.params;
    const Scalar s = mdl.derived.s;
    const Scalar x = mdl.derived.rate_arg * (p.T - t);
    if (!(x < std::log(std::numeric_limits<Scalar>::max()) - 1)) return std::numeric_limits<Scalar>::quiet_NaN();
    const Scalar sh = sinh(x), ch = cosh(x);
    const Scalar r = (2 * p.beta - p.gamma) / s;
    return 2 * p.lambda1 * p.v_bar / (p.gamma * s) * (2 * p.beta * (ch - 1) + r * sh) / (2 * p.beta * sh + r * ch);
}

template <typename Scalar>
RateForms<Scalar> optimal_rate_forms(const Model<Scalar>& mdl, Scalar t, Scalar x) {
    const auto& p = mdl.params;
    const auto c = eval_coefficients(mdl, t);
    const Scalar two_el = 2 * (p.eta + p.lambda1);
    return {-(c.a * x + c.b - 2 * p.lambda1 * p.v_bar) / two_el,
            mdl.derived.v_bar_ell - c.a * (x - c.ell) / two_el};
}

template <typename Scalar>
Scalar optimal_rate(const Model<Scalar>& mdl, Scalar t, Scalar x) {
    return optimal_rate_forms(mdl, t, x).feedback;
}

template <typename Scalar>
Scalar rate_from(const Model<Scalar>& mdl, const PolicyCoefficients<Scalar>& c, Scalar x) {
    const auto& p = mdl.params;
    return -(c.a * x + c.b - 2 * p.lambda1 * p.v_bar) / (2 * (p.eta + p.lambda1));
}

template <typename Scalar>
BackwardControls<Scalar> controls_from(const Model<Scalar>& mdl, const PolicyCoefficients<Scalar>& c, Scalar x) {
    const auto& p = mdl.params;
    BackwardControls<Scalar> z;
    z.zt1 = -p.m * (c.a_minus_gamma * x + c.b);
    z.zt2 = 0;
    z.z1 = -p.m / (2 * (p.eta + p.lambda1))
           * ((p.eta + 2 * p.lambda1) * (c.a * x + c.b) + 2 * p.eta * p.lambda1 * p.v_bar);
    z.z2 = -p.sigma * x;
    return z;
}

template <typename Scalar>
BackwardControls<Scalar> backward_controls(const Model<Scalar>& mdl, Scalar t, Scalar x) {
    return controls_from(mdl, eval_coefficients(mdl, t), x);
}

template <typename Scalar>
Scalar value_from(const PolicyCoefficients<Scalar>& c, Scalar x) {
    return c.a_minus_gamma * x * x / 2 + c.b * x + c.c;
}

template <typename Scalar>
Scalar value_function(const Model<Scalar>& mdl, Scalar t, Scalar x) {
    return value_from(eval_coefficients(mdl, t), x);
}

/// Linearization of the policy for small remaining horizon T - t.
template <typename Scalar>
LateStage<Scalar> late_stage(const Model<Scalar>& mdl, Scalar t) {
    detail::check_time(mdl, t);
    const auto& p = mdl.params;
    const auto& d = mdl.derived;
    const Scalar tau = p.T - t;
    const Scalar tbg = 2 * p.beta - p.gamma;
    const Scalar ml = p.m * p.m * p.lambda2;
    LateStage<Scalar> r;
    r.ell0 = d.v_bar_ell * tau / (1 + ml * tau * p.gamma * p.beta / tbg);
    r.a0 = -(tbg + 2 * p.beta * p.gamma * ml * tau) / (1 + d.k * tau * (tbg - 2 * p.beta * d.rho));
    return r;
}

/// Limits for large remaining horizon. Requires γ m √λ₂ > 0.
template <typename Scalar>
EarlyStage<Scalar> early_stage(const Model<Scalar>& mdl) {
    const auto& p = mdl.params;
    const auto& d = mdl.derived;
    if (!(p.gamma > 0 && d.rho >= detail::rho_floor<Scalar>()))
        throw DegenerateRegime("early-stage limits need gamma * m * sqrt(lambda2) > 0");
    const Scalar lv = p.lambda1 * p.v_bar;
    EarlyStage<Scalar> r;
    r.ell_inf = 2 * lv / (p.gamma * d.s);
    r.a_inf = -p.gamma * d.s / (1 - d.s);
    r.x_bar_inf = 2 / p.gamma * (p.eta + p.lambda1) * (1 / d.s + 1) * lv;
    r.x_stationary = 2 * lv / p.gamma;
    r.reversion = -r.a_inf * d.k;
    return r;
}

template <typename Scalar>
AsymptoticRegime<Scalar> asymptotics(const Model<Scalar>& mdl, Scalar t) {
    return {late_stage(mdl, t), early_stage(mdl)};
}

/// Limit of -a(t) as κλ₂ → 0.
template <typename Scalar>
Scalar risk_neutral_minus_a(const Model<Scalar>& mdl, Scalar t) {
    detail::check_time(mdl, t);
    const auto& p = mdl.params;
    const Scalar el = p.eta + p.lambda1;
    const Scalar h = p.beta - p.gamma / 2;
    return el * 2 * h / (el + h * (p.T - t));
}

/// Evaluates the policy coefficients along a time grid once so that
/// simulations can look them up by step index.
template <typename Scalar>
class FeedbackPolicy {
public:
    FeedbackPolicy(Model<Scalar> mdl, int steps, Scalar t0 = 0) : mdl_(std::move(mdl)), t0_(t0) {
        if (steps < 1) throw GridError("policy grid needs at least one step");
        detail::check_time(mdl_, t0);
        table_.reserve(steps + 1);
        const Scalar dt = (mdl_.params.T - t0) / steps;
        for (int i = 0; i <= steps; ++i) {
            const Scalar t = i == steps ? mdl_.params.T : t0 + i * dt;
            table_.push_back(eval_coefficients(mdl_, t));
        }
    }

    const Model<Scalar>& model() const { return mdl_; }
    Scalar t0() const { return t0_; }
    int steps() const { return static_cast<int>(table_.size()) - 1; }
    const PolicyCoefficients<Scalar>& at(int i) const { return table_[i]; }
    Scalar rate(int i, Scalar x) const { return rate_from(mdl_, table_[i], x); }
    BackwardControls<Scalar> controls(int i, Scalar x) const { return controls_from(mdl_, table_[i], x); }
    Scalar value(int i, Scalar x) const { return value_from(table_[i], x); }

private:
    Model<Scalar> mdl_;
    Scalar t0_;
    std::vector<PolicyCoefficients<Scalar>> table_;
};

} // namespace optexec

#endif // OPTEXEC_CLOSED_FORM_HPP
