#pragma once

#include <optional>
#include <string>

#include "pnpqn/image.hpp"

namespace pnpqn {

// Nonsmooth term g of the composite objective f + g, accessed only through
// its scaled proximal map and Moreau envelope. The envelope identity
//     g(prox_{gamma g}(v)) = envelope_term(v, gamma) - ||prox - v||^2 / (2 gamma)
// must hold for every implementation; solvers rely on it to track objective
// values without ever evaluating g at arbitrary points.
//
// Gradient-step denoisers D = I - alpha grad(g_sigma) realize prox_{gamma g}
// for g = phi_sigma / gamma; their prox does not depend on gamma and their
// weak-convexity modulus scales as 1/gamma, which weak_convexity(gamma)
// reports (so gamma * weak_convexity(gamma) < 1 is the well-posedness gate
// for every flavor).
class Regularizer {
public:
    virtual ~Regularizer() = default;

    // prox_{gamma g}(v); single-valued on the admissible gamma range.
    virtual Image prox_step(const Image& v, double gamma) const = 0;

    // Moreau envelope g^gamma(v) = min_u g(u) + ||u - v||^2 / (2 gamma),
    // evaluated without needing the prox output at the call site.
    virtual double envelope_term(const Image& v, double gamma) const = 0;

    // g(u) at an arbitrary point, when the regularizer can provide it.
    virtual std::optional<double> reg_value(const Image& u, double gamma) const {
        (void)u;
        (void)gamma;
        return std::nullopt;
    }

    // Weak-convexity modulus of g for the family parametrized at this gamma.
    virtual double weak_convexity(double gamma) const = 0;
    double weak_convexity() const { return weak_convexity(1.0); }

    // True when g is twice differentiable (enables finite-difference tests).
    virtual bool smooth() const = 0;

    // Denoiser-strength control for half-quadratic-splitting style schedules.
    // Analytic regularizers have no strength knob; drivers that ask for one
    // should surface a warning when this returns false.
    virtual bool supports_strength() const { return false; }
    virtual Image prox_step_at_strength(const Image& v, double gamma,
                                        double strength) const {
        (void)strength;
        return prox_step(v, gamma);
    }

    virtual std::string describe() const = 0;
};

} // namespace pnpqn
