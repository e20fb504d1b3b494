#pragma once

#include "pnpqn/regularizer.hpp"

namespace pnpqn {

// Denoiser of gradient-step form D = I - alpha * grad(g_sigma) with an
// explicit smooth potential g_sigma whose gradient is L-Lipschitz, L < 1.
// D equals the proximal map of a potential phi (weakly convex with modulus
// alpha L / (alpha L + 1)) given on the image of D by
//     phi(u) = alpha g_sigma(D^{-1} u) - ||D^{-1} u - u||^2 / 2 .
// Used as a Regularizer it realizes g = phi / gamma, so prox_step ignores
// gamma and the envelope is alpha g_sigma(v) / gamma.
class GradStepDenoiser : public Regularizer {
public:
    GradStepDenoiser(double alpha, double sigma_d);

    // The smooth potential and its gradient; grad must be
    // grad_lipschitz()-Lipschitz with grad_lipschitz() < 1.
    virtual double potential(const Image& x) const = 0;
    virtual Image potential_grad(const Image& x) const = 0;
    virtual double grad_lipschitz() const = 0;

    Image denoise(const Image& v) const; // v - alpha grad g_sigma(v)
    // Inverse of denoise; generic damped fixed point (contraction factor
    // alpha L), overridable when a closed form exists.
    virtual Image denoise_inverse(const Image& u) const;
    // phi at u (alpha-relaxed potential of the prox characterization).
    double prox_potential(const Image& u) const;

    Image prox_step(const Image& v, double gamma) const override;
    double envelope_term(const Image& v, double gamma) const override;
    std::optional<double> reg_value(const Image& u, double gamma) const override;
    double weak_convexity(double gamma) const override;
    bool smooth() const override { return true; }

    double alpha() const { return alpha_; }
    double sigma_d() const { return sigma_d_; }

protected:
    // Derived constructors call this once grad_lipschitz() is computable.
    void validate() const;

    double alpha_;
    double sigma_d_;
};

// g_sigma(x) = (L/2) ||x - b||^2. Denoise is an affine contraction toward b;
// everything (inverse, potential) is closed-form and the induced phi is the
// convex quadratic (c / (2(1-c))) ||u - b||^2 with c = alpha L.
class QuadraticGradStep final : public GradStepDenoiser {
public:
    QuadraticGradStep(double l, Image b, double alpha = 1.0, double sigma_d = 0.0);

    double potential(const Image& x) const override;
    Image potential_grad(const Image& x) const override;
    double grad_lipschitz() const override { return l_; }
    Image denoise_inverse(const Image& u) const override;
    std::string describe() const override;

    const Image& bias() const { return b_; }

private:
    double l_;
    Image b_;
};

// g_sigma(x) = amp * sum_i (1 - cos(omega x_i)), a smooth nonconvex
// potential with grad Lipschitz constant L = amp * omega^2. Entrywise, so
// the prox characterization can be brute-force checked on scalar grids.
class CosineGradStep final : public GradStepDenoiser {
public:
    CosineGradStep(double amp, double omega, double alpha = 1.0, double sigma_d = 0.0);

    double potential(const Image& x) const override;
    Image potential_grad(const Image& x) const override;
    double grad_lipschitz() const override { return amp_ * omega_ * omega_; }
    std::string describe() const override;

    double amp() const { return amp_; }
    double omega() const { return omega_; }

private:
    double amp_;
    double omega_;
};

} // namespace pnpqn
