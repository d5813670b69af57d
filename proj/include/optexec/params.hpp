#ifndef OPTEXEC_PARAMS_HPP
#define OPTEXEC_PARAMS_HPP

#include <cmath>
#include <vector>

#include "optexec/errors.hpp"

namespace optexec {

template <typename Scalar>
struct ModelParams {
    Scalar gamma = 0;   // permanent impact
    Scalar eta = 0;     // temporary impact
    Scalar sigma = 0;   // fair-price volatility
    Scalar m = 0;       // order-fill volatility
    Scalar beta = 0;    // terminal block penalty
    Scalar lambda1 = 0; // running penalty weight
    Scalar lambda2 = 0; // risk aversion
    Scalar v_bar = 0;   // target rate
    Scalar T = 0;
    Scalar x0 = 0;
    Scalar s0 = 0;

    template <typename To>
    ModelParams<To> cast() const {
        return {To(gamma), To(eta), To(sigma), To(m), To(beta), To(lambda1),
                To(lambda2), To(v_bar), To(T), To(x0), To(s0)};
    }

    bool operator==(const ModelParams&) const = default;
};

template <typename Scalar>
struct DerivedConstants {
    Scalar kappa = 0;     // 2 m^2 (eta + lambda1)
    Scalar v_bar_ell = 0; // lambda1 v_bar / (eta + lambda1)
    Scalar rate_arg = 0;  // omega = gamma sqrt(kappa lambda2) / (2 (eta + lambda1))
    Scalar rho = 0;       // kappa lambda2
    Scalar s = 0;         // sqrt(rho)
    Scalar k = 0;         // 1 / (2 (eta + lambda1))

    bool operator==(const DerivedConstants&) const = default;
};

/// A parameter set that passed validation, together with its derived constants.
template <typename Scalar>
struct Model {
    ModelParams<Scalar> params;
    DerivedConstants<Scalar> derived;

    template <typename To>
    Model<To> cast() const;
};

template <typename Scalar>
DerivedConstants<Scalar> derive(const ModelParams<Scalar>& p) {
    using std::sqrt;
    DerivedConstants<Scalar> d;
    const Scalar el = p.eta + p.lambda1;
    d.kappa = 2 * p.m * p.m * el;
    d.v_bar_ell = p.lambda1 * p.v_bar / el;
    d.rho = d.kappa * p.lambda2;
    d.s = sqrt(d.rho);
    d.k = 1 / (2 * el);
    d.rate_arg = p.gamma * d.s * d.k;
    return d;
}

template <typename Scalar>
std::vector<Violation> violations(const ModelParams<Scalar>& p) {
    using std::isfinite;
    std::vector<Violation> v;
    auto need = [&](bool ok, const char* field, const char* constraint) {
        if (!ok) v.push_back({field, constraint});
    };
    const Scalar fields[] = {p.gamma, p.eta, p.sigma, p.m, p.beta, p.lambda1,
                             p.lambda2, p.v_bar, p.T, p.x0, p.s0};
    const char* names[] = {"gamma", "eta", "sigma", "m", "beta", "lambda1",
                           "lambda2", "v_bar", "T", "x0", "s0"};
    bool finite = true;
    for (int i = 0; i < 11; ++i) {
        if (!isfinite(fields[i])) {
            v.push_back({names[i], "finite"});
            finite = false;
        }
    }
    if (!finite) return v;

    need(p.gamma >= 0, "gamma", "γ ≥ 0");
    need(p.eta > 0, "eta", "η > 0");
    need(p.sigma >= 0, "sigma", "σ ≥ 0");
    need(p.m >= 0, "m", "m ≥ 0");
    need(p.beta > 0, "beta", "β > 0");
    need(p.lambda1 >= 0, "lambda1", "λ₁ ≥ 0");
    need(p.lambda2 >= 0, "lambda2", "λ₂ ≥ 0");
    need(p.v_bar > 0, "v_bar", "v̄ > 0");
    need(p.T > 0, "T", "T > 0");
    need(p.s0 > 0, "s0", "s₀ > 0");
    need(p.beta > p.gamma / 2, "beta", "β > γ/2");
    if (p.eta + p.lambda1 > 0) {
        const Scalar rho = 2 * p.m * p.m * (p.eta + p.lambda1) * p.lambda2;
        need(rho < 1, "lambda2", "λ₂ < 1/κ");
    }
    return v;
}

/// Confirms every invariant and attaches the derived constants.
/// Throws Inadmissible listing all violated constraints.
template <typename Scalar>
Model<Scalar> validate(const ModelParams<Scalar>& raw) {
    auto v = violations(raw);
    if (!v.empty()) throw Inadmissible(std::move(v));
    return {raw, derive(raw)};
}

template <typename Scalar>
template <typename To>
Model<To> Model<Scalar>::cast() const {
    return validate(params.template cast<To>());
}

/// Parameter block of the desk-scale example: γ = 2.5e-7, η = 25e-6, m = 2e6,
/// β = 100η, λ₁ = 1e-4, v̄ = 1, T = 5, x₀ = 1e6, with λ₂ = ρ/κ.
template <typename Scalar = double>
ModelParams<Scalar> reference_params(Scalar rho = 0) {
    ModelParams<Scalar> p;
    p.gamma = Scalar(2.5e-7);
    p.eta = Scalar(25e-6);
    p.sigma = Scalar(0.95);
    p.m = Scalar(2e6);
    p.beta = 100 * p.eta;
    p.lambda1 = Scalar(1e-4);
    p.v_bar = 1;
    p.T = 5;
    p.x0 = Scalar(1e6);
    p.s0 = 50;
    p.lambda2 = rho / (2 * p.m * p.m * (p.eta + p.lambda1));
    return p;
}

} // namespace optexec

#endif // OPTEXEC_PARAMS_HPP
