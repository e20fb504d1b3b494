#pragma once

#include "pnpqn/linop.hpp"

namespace pnpqn {

// Quadratic data fit f(x) = (lambda/2) ||A x - y||^2.
// grad f = lambda A^T (A x - y) is (lambda ||A^T A||)-Lipschitz and the
// Hessian-vector product lambda A^T A v is constant in x.
class Fidelity {
public:
    // Pass norm_ata when the caller already knows ||A^T A||; otherwise it is
    // taken from the Fourier symbol when exact, else estimated by power
    // iteration with a fixed internal seed.
    Fidelity(LinearOpPtr a, Image y, double lambda, double norm_ata = -1.0);

    double value(const Image& x) const;
    Image grad(const Image& x) const;
    double value_and_grad(const Image& x, Image& grad_out) const;
    Image hvp(const Image& v) const;

    // prox_{s f}(v) = argmin_u  f(u) + ||u - v||^2 / (2 s), s >= 0.
    // Closed form per Fourier frequency when A carries a symbol; otherwise
    // conjugate gradient on (I + s lambda A^T A) u = v + s lambda A^T y
    // (relative tolerance cg_tol, at most cg_max_iters, NumericalError on
    // stagnation). s = 0 returns v.
    Image prox(const Image& v, double s) const;

    double lambda() const { return lambda_; }
    double lipschitz() const { return lambda_ * norm_ata_; }
    double norm_ata() const { return norm_ata_; }
    const LinearOp& op() const { return *a_; }
    LinearOpPtr op_ptr() const { return a_; }
    const Image& measurement() const { return y_; }

    static constexpr double cg_tol = 1e-10;
    static constexpr int cg_max_iters = 500;

private:
    Image prox_fourier(const Image& v, double s) const;
    Image prox_cg(const Image& v, double s) const;

    LinearOpPtr a_;
    Image y_;
    double lambda_;
    double norm_ata_;
    Image aty_; // cached A^T y, the prox right-hand side building block
    std::optional<std::vector<std::complex<double>>> symbol_;
    std::optional<std::vector<std::complex<double>>> y_spec_; // FFT of y per channel, packed
    std::shared_ptr<const Fft2D> fft_;
};

} // namespace pnpqn
