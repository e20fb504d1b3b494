#include "pnpqn/envelope.hpp"

#include <cmath>
#include <limits>

namespace pnpqn {

EnvelopeEngine::EnvelopeEngine(const Fidelity& fid, const Regularizer& reg)
    : fid_(fid), reg_(reg) {}

PartialEval EnvelopeEngine::evaluate_partial(const Image& x, double gamma) {
    if (gamma <= 0.0) throw ParameterError("EnvelopeEngine: gamma <= 0");
    PartialEval p;
    p.x = x;
    p.gamma = gamma;
    p.f_x = fid_.value_and_grad(x, p.grad_f);
    counters_.gradient += 1;
    p.fbs = x;
    p.fbs.axpy(-gamma, p.grad_f);
    p.env = reg_.envelope_term(p.fbs, gamma);
    counters_.potential += 1;
    p.phi_gamma = p.f_x - 0.5 * gamma * p.grad_f.squared_norm() + p.env;
    if (!std::isfinite(p.phi_gamma))
        throw NumericalError("EnvelopeEngine: non-finite envelope value");
    return p;
}

EnvelopeState EnvelopeEngine::complete(PartialEval partial) {
    EnvelopeState st;
    st.T = reg_.prox_step(partial.fbs, partial.gamma);
    counters_.prox += 1;
    st.T.require_finite("EnvelopeEngine: prox output");
    st.x = std::move(partial.x);
    st.grad_f = std::move(partial.grad_f);
    st.fbs = std::move(partial.fbs);
    st.f_x = partial.f_x;
    st.env = partial.env;
    st.phi_gamma = partial.phi_gamma;
    st.gamma = partial.gamma;
    st.R = st.x - st.T;
    st.R *= 1.0 / st.gamma;
    st.r_norm = st.R.norm();
    return st;
}

EnvelopeState EnvelopeEngine::evaluate(const Image& x, double gamma) {
    return complete(evaluate_partial(x, gamma));
}

Image EnvelopeEngine::grad_phi_gamma(const EnvelopeState& st) {
    // (I - gamma hess f) R; exact whenever g_sigma is C^2 around the state.
    Image g = st.R;
    g.axpy(-st.gamma, fid_.hvp(st.R));
    counters_.hvp += 1;
    g.require_finite("EnvelopeEngine: envelope gradient");
    return g;
}

double EnvelopeEngine::phi_at_prox_output(const EnvelopeState& st, double f_at_T) const {
    Image d = st.T - st.fbs;
    const double phi = f_at_T + st.env - d.squared_norm() / (2.0 * st.gamma);
    if (cross_check_) {
        if (auto g = reg_.reg_value(st.T, st.gamma)) {
            const double direct = fid_.value(st.T) + *g;
            if (std::fabs(direct - phi) > 1e-6 * (1.0 + std::fabs(direct)))
                throw NumericalError(
                    "EnvelopeEngine: envelope identity drifted from direct value by " +
                    std::to_string(direct - phi));
        }
    }
    return phi;
}

std::optional<double> EnvelopeEngine::phi_via_value(const Image& x, double gamma) {
    auto g = reg_.reg_value(x, gamma);
    if (!g) return std::nullopt;
    counters_.f_value += 1;
    return fid_.value(x) + *g;
}

bool EnvelopeEngine::gamma_admissible(double gamma, double beta) const {
    if (!(gamma > 0.0)) return false;
    if (gamma >= gamma_smooth_cap(beta)) return false;
    return gamma * reg_.weak_convexity(gamma) < 1.0;
}

double EnvelopeEngine::gamma_smooth_cap(double beta) const {
    const double lf = fid_.lipschitz();
    if (lf <= 0.0) return std::numeric_limits<double>::infinity();
    return (1.0 - beta) / lf;
}

double EnvelopeEngine::f_value(const Image& x) {
    counters_.f_value += 1;
    return fid_.value(x);
}

Image EnvelopeEngine::prox_f(const Image& v, double s) {
    counters_.prox_f += 1;
    return fid_.prox(v, s);
}

Image EnvelopeEngine::f_grad(const Image& x) {
    counters_.gradient += 1;
    return fid_.grad(x);
}

double EnvelopeEngine::f_value_and_grad(const Image& x, Image& grad_out) {
    counters_.gradient += 1;
    return fid_.value_and_grad(x, grad_out);
}

Image EnvelopeEngine::prox_step_at_strength(const Image& v, double gamma, double strength) {
    counters_.prox += 1;
    return reg_.prox_step_at_strength(v, gamma, strength);
}

Image EnvelopeEngine::prox_step(const Image& v, double gamma) {
    counters_.prox += 1;
    return reg_.prox_step(v, gamma);
}

double EnvelopeEngine::envelope_term(const Image& v, double gamma) {
    counters_.potential += 1;
    return reg_.envelope_term(v, gamma);
}

} // namespace pnpqn
