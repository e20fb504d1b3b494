#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pnpqn/fft2d.hpp"
#include "pnpqn/image.hpp"
#include "pnpqn/kernel.hpp"
#include "pnpqn/rng.hpp"

namespace pnpqn {

// Bounded linear operator between image spaces. Implementations are immutable
// after construction and safe to share across threads. apply_adjoint is the
// exact Euclidean adjoint: <A x, u> == <x, A^T u> up to roundoff.
class LinearOp {
public:
    virtual ~LinearOp() = default;

    virtual Shape input_shape() const = 0;
    virtual Shape output_shape() const = 0;
    virtual Image apply(const Image& x) const = 0;
    virtual Image apply_adjoint(const Image& u) const = 0;

    // Per-frequency transfer function in FFTW r2c packing (h x (w/2+1)),
    // identical across channels, when the operator is diagonal in the Fourier
    // basis (circular convolutions and their compositions). Used for exact
    // norms and closed-form quadratic solves.
    virtual std::optional<std::vector<std::complex<double>>> fourier_symbol() const {
        return std::nullopt;
    }

    virtual std::string describe() const = 0;

protected:
    void check_input(const Image& x) const;
    void check_output(const Image& u) const;
};

using LinearOpPtr = std::shared_ptr<const LinearOp>;

class IdentityOp final : public LinearOp {
public:
    explicit IdentityOp(Shape s) : shape_(s) {}
    Shape input_shape() const override { return shape_; }
    Shape output_shape() const override { return shape_; }
    Image apply(const Image& x) const override;
    Image apply_adjoint(const Image& u) const override;
    std::optional<std::vector<std::complex<double>>> fourier_symbol() const override;
    std::string describe() const override { return "identity"; }

private:
    Shape shape_;
};

// Circular (periodic) convolution with a small kernel, uniformly scaled by
// `gain`. Anchored at the kernel center (h/2, w/2); implemented per channel
// via FFT. The adjoint equals circular convolution with the 180-degree
// flipped kernel at the same gain.
class CircularConvOp final : public LinearOp {
public:
    CircularConvOp(Shape image_shape, Kernel kernel, double gain = 1.0);

    Shape input_shape() const override { return shape_; }
    Shape output_shape() const override { return shape_; }
    Image apply(const Image& x) const override;
    Image apply_adjoint(const Image& u) const override;
    std::optional<std::vector<std::complex<double>>> fourier_symbol() const override;
    std::string describe() const override;

    const Kernel& kernel() const { return kernel_; }
    double gain() const { return gain_; }
    // Exact operator norm of A^T A: max_freq |gain * khat|^2.
    double exact_gram_norm() const;

private:
    Shape shape_;
    Kernel kernel_;
    double gain_;
    std::shared_ptr<const Fft2D> fft_;
    std::vector<std::complex<double>> symbol_; // gain * FFT(embedded kernel)
};

// Lattice subsampling: keeps pixels whose row and column indices are both
// multiples of `scale`, truncated to (floor(H/s), floor(W/s)). The adjoint
// places values back on that lattice and zero-fills everywhere else, so
// S S^T = I on the small space and S^T S is a binary mask.
class DownsampleOp final : public LinearOp {
public:
    DownsampleOp(Shape input_shape, int scale);

    Shape input_shape() const override { return in_; }
    Shape output_shape() const override { return out_; }
    Image apply(const Image& x) const override;
    Image apply_adjoint(const Image& u) const override;
    std::string describe() const override;

    int scale() const { return scale_; }

private:
    Shape in_, out_;
    int scale_;
};

// first applied first: apply(x) = last(... first(x)), adjoint in reverse.
class ComposedOp final : public LinearOp {
public:
    ComposedOp(std::vector<LinearOpPtr> stages);

    Shape input_shape() const override { return stages_.front()->input_shape(); }
    Shape output_shape() const override { return stages_.back()->output_shape(); }
    Image apply(const Image& x) const override;
    Image apply_adjoint(const Image& u) const override;
    std::optional<std::vector<std::complex<double>>> fourier_symbol() const override;
    std::string describe() const override;

private:
    std::vector<LinearOpPtr> stages_;
};

// Dense matrix acting on flattened tensors; test and small-problem support.
class DenseOp final : public LinearOp {
public:
    // matrix is row-major, rows = out.numel(), cols = in.numel().
    DenseOp(Shape in, Shape out, std::vector<double> matrix);

    Shape input_shape() const override { return in_; }
    Shape output_shape() const override { return out_; }
    Image apply(const Image& x) const override;
    Image apply_adjoint(const Image& u) const override;
    std::string describe() const override { return "dense"; }

private:
    Shape in_, out_;
    std::vector<double> m_;
};

// Largest eigenvalue of a symmetric PSD operator by power iteration with
// Rayleigh-quotient stopping. A zero start (or null-space hit) restarts with
// a fresh random vector; identically-zero operators return 0.
double power_iteration_norm(const std::function<Image(const Image&)>& sym_op,
                            Shape shape, int max_iters, double tol, Rng& rng);

// ||A^T A||_op estimated by power iteration (fixed internal seed by default).
double gram_norm(const LinearOp& a, int max_iters = 200, double tol = 1e-8,
                 std::uint64_t seed = 0x9E3779B9ULL);

// Exact ||A^T A||_op when a Fourier symbol is available.
std::optional<double> exact_gram_norm(const LinearOp& a);

} // namespace pnpqn
