#pragma once

#include "pnpqn/fidelity.hpp"
#include "pnpqn/regularizer.hpp"

namespace pnpqn {

// Oracle-call tally for one engine (equivalently, one solver run). potential,
// prox, gradient and hvp mirror the per-iteration cost vector of the
// quasi-Newton driver; f_value and prox_f track the remaining fidelity work
// (cheap closed forms in this library, but still accounted).
struct CallCounters {
    long potential = 0;
    long prox = 0;
    long gradient = 0;
    long hvp = 0;
    long f_value = 0;
    long prox_f = 0;

    CallCounters operator-(const CallCounters& o) const {
        return {potential - o.potential, prox - o.prox, gradient - o.gradient,
                hvp - o.hvp,             f_value - o.f_value, prox_f - o.prox_f};
    }
    bool operator==(const CallCounters&) const = default;
};

// Everything the forward-backward step at one point produces. fbs is the
// gradient-step point x - gamma grad_f(x); T = prox_{gamma g}(fbs) the
// forward-backward iterate; R = (x - T)/gamma the residual mapping.
struct EnvelopeState {
    Image x;
    Image grad_f;
    Image fbs;
    Image T;
    Image R;
    double f_x = 0.0;
    double env = 0.0; // g^gamma(fbs), Moreau envelope term
    double phi_gamma = 0.0;
    double gamma = 0.0;
    double r_norm = 0.0;
};

// Envelope value without the prox (enough to run an acceptance test on a
// line-search candidate); complete() upgrades it to a full state.
struct PartialEval {
    Image x;
    Image grad_f;
    Image fbs;
    double f_x = 0.0;
    double env = 0.0;
    double phi_gamma = 0.0;
    double gamma = 0.0;
};

// Evaluator of the forward-backward envelope
//   phi_gamma(x) = f(x) - (gamma/2) ||grad f(x)||^2 + g^gamma(x - gamma grad f(x))
// and of its gradient (I - gamma hess f(x)) R_gamma(x), with exact
// bookkeeping of oracle calls:
//   evaluate            = 1 gradient + 1 potential + 1 prox
//   evaluate_partial    = 1 gradient + 1 potential
//   complete            = 1 prox
//   grad_phi_gamma      = 1 hvp
// Objective values at prox outputs come from the envelope identity
//   phi(T) = f(T) + g^gamma(fbs) - ||T - fbs||^2 / (2 gamma),
// so no regularizer value oracle is ever needed on the hot path.
class EnvelopeEngine {
public:
    EnvelopeEngine(const Fidelity& fid, const Regularizer& reg);

    PartialEval evaluate_partial(const Image& x, double gamma);
    EnvelopeState complete(PartialEval partial);
    EnvelopeState evaluate(const Image& x, double gamma);

    Image grad_phi_gamma(const EnvelopeState& st);

    // phi at the prox output st.T given f(st.T), via the envelope identity.
    // With cross-checking enabled and a regularizer value oracle available,
    // verifies the identity against the direct evaluation (diagnostic calls
    // are not counted).
    double phi_at_prox_output(const EnvelopeState& st, double f_at_T) const;

    // Direct phi(x) = f(x) + g(x) when the regularizer can evaluate g.
    std::optional<double> phi_via_value(const Image& x, double gamma);

    // Fixed-gamma admissibility gate: gamma in (0, (1-beta)/L_f) and
    // gamma * M(gamma) < 1.
    bool gamma_admissible(double gamma, double beta) const;
    // The (1-beta)/L_f branch of the gate (+inf when L_f == 0).
    double gamma_smooth_cap(double beta) const;

    const Fidelity& fidelity() const { return fid_; }
    const Regularizer& regularizer() const { return reg_; }

    const CallCounters& counters() const { return counters_; }
    void reset_counters() { counters_ = CallCounters{}; }
    void set_cross_check(bool on) { cross_check_ = on; }

    // Counted fidelity value (one operator application).
    double f_value(const Image& x);
    // Counted fidelity prox (used by splitting baselines).
    Image prox_f(const Image& v, double s);
    // Counted plain gradient (baselines that do not need f alongside).
    Image f_grad(const Image& x);
    // Counted fused value+gradient (one operator pass, tallied as a gradient).
    double f_value_and_grad(const Image& x, Image& grad_out);
    // Counted denoiser application at explicit strength.
    Image prox_step_at_strength(const Image& v, double gamma, double strength);
    // Counted prox application (baseline denoiser step).
    Image prox_step(const Image& v, double gamma);
    // Counted envelope term (baseline objective bookkeeping).
    double envelope_term(const Image& v, double gamma);

private:
    const Fidelity& fid_;
    const Regularizer& reg_;
    CallCounters counters_;
    bool cross_check_ = false;
};

} // namespace pnpqn
