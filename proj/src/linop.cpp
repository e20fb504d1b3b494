#include "pnpqn/linop.hpp"

#include <cmath>
#include <sstream>

#include "pnpqn/metrics.hpp"

namespace pnpqn {

void LinearOp::check_input(const Image& x) const {
    if (!(x.shape() == input_shape()))
        throw DimensionError(describe() + ": input shape " + x.shape().str() +
                             ", expected " + input_shape().str());
}

void LinearOp::check_output(const Image& u) const {
    if (!(u.shape() == output_shape()))
        throw DimensionError(describe() + ": adjoint input shape " + u.shape().str() +
                             ", expected " + output_shape().str());
}

Image IdentityOp::apply(const Image& x) const {
    check_input(x);
    return x;
}

Image IdentityOp::apply_adjoint(const Image& u) const {
    check_output(u);
    return u;
}

std::optional<std::vector<std::complex<double>>> IdentityOp::fourier_symbol() const {
    const std::size_t n =
        static_cast<std::size_t>(shape_.h) * (static_cast<std::size_t>(shape_.w) / 2 + 1);
    return std::vector<std::complex<double>>(n, {1.0, 0.0});
}

CircularConvOp::CircularConvOp(Shape image_shape, Kernel kernel, double gain)
    : shape_(image_shape), kernel_(std::move(kernel)), gain_(gain) {
    if (shape_.c <= 0 || shape_.h <= 0 || shape_.w <= 0)
        throw DimensionError("CircularConvOp: bad image shape " + shape_.str());
    if (kernel_.h <= 0 || kernel_.w <= 0 ||
        kernel_.wts.size() != static_cast<std::size_t>(kernel_.h) * kernel_.w)
        throw DimensionError("CircularConvOp: malformed kernel");
    fft_ = std::make_shared<Fft2D>(shape_.h, shape_.w);

    // Embed the kernel periodically with its anchor at the origin; taps that
    // wrap past the image extent accumulate, which is exactly circular
    // convolution with the periodized kernel.
    std::vector<double> embed(static_cast<std::size_t>(shape_.h) * shape_.w, 0.0);
    const int cr = kernel_.center_row(), cc = kernel_.center_col();
    for (int a = 0; a < kernel_.h; ++a)
        for (int b = 0; b < kernel_.w; ++b) {
            const int i = ((a - cr) % shape_.h + shape_.h) % shape_.h;
            const int j = ((b - cc) % shape_.w + shape_.w) % shape_.w;
            embed[static_cast<std::size_t>(i) * shape_.w + j] += kernel_.at(a, b);
        }
    symbol_ = fft_->forward(embed);
    for (auto& s : symbol_) s *= gain_;
}

Image CircularConvOp::apply(const Image& x) const {
    check_input(x);
    Image out(shape_);
    std::vector<std::complex<double>> spec(fft_->spec_size());
    for (int c = 0; c < shape_.c; ++c) {
        fft_->forward(x.channel(c), spec.data());
        for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= symbol_[k];
        fft_->inverse(spec.data(), out.channel(c));
    }
    return out;
}

Image CircularConvOp::apply_adjoint(const Image& u) const {
    check_output(u);
    Image out(shape_);
    std::vector<std::complex<double>> spec(fft_->spec_size());
    for (int c = 0; c < shape_.c; ++c) {
        fft_->forward(u.channel(c), spec.data());
        for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= std::conj(symbol_[k]);
        fft_->inverse(spec.data(), out.channel(c));
    }
    return out;
}

std::optional<std::vector<std::complex<double>>> CircularConvOp::fourier_symbol() const {
    return symbol_;
}

std::string CircularConvOp::describe() const {
    std::ostringstream os;
    os << "circular_conv " << kernel_.h << "x" << kernel_.w << " gain=" << gain_;
    return os.str();
}

double CircularConvOp::exact_gram_norm() const {
    // |symbol| is conjugate-symmetric, so the packed half covers the maximum.
    double m = 0.0;
    for (const auto& s : symbol_) m = std::max(m, std::norm(s));
    return m;
}

DownsampleOp::DownsampleOp(Shape input_shape, int scale) : in_(input_shape), scale_(scale) {
    if (scale <= 0) throw ParameterError("DownsampleOp: scale must be positive");
    out_ = Shape{in_.c, in_.h / scale, in_.w / scale};
    if (out_.h <= 0 || out_.w <= 0)
        throw DimensionError("DownsampleOp: image " + in_.str() + " too small for scale " +
                             std::to_string(scale));
}

Image DownsampleOp::apply(const Image& x) const {
    check_input(x);
    Image out(out_);
    for (int c = 0; c < out_.c; ++c)
        for (int i = 0; i < out_.h; ++i)
            for (int j = 0; j < out_.w; ++j) out(c, i, j) = x(c, i * scale_, j * scale_);
    return out;
}

Image DownsampleOp::apply_adjoint(const Image& u) const {
    check_output(u);
    Image out(in_); // zero-filled off the lattice
    for (int c = 0; c < out_.c; ++c)
        for (int i = 0; i < out_.h; ++i)
            for (int j = 0; j < out_.w; ++j) out(c, i * scale_, j * scale_) = u(c, i, j);
    return out;
}

std::string DownsampleOp::describe() const {
    return "downsample x" + std::to_string(scale_);
}

ComposedOp::ComposedOp(std::vector<LinearOpPtr> stages) : stages_(std::move(stages)) {
    if (stages_.empty()) throw ParameterError("ComposedOp: no stages");
    for (std::size_t k = 0; k + 1 < stages_.size(); ++k)
        if (!(stages_[k]->output_shape() == stages_[k + 1]->input_shape()))
            throw DimensionError("ComposedOp: stage " + std::to_string(k) + " output " +
                                 stages_[k]->output_shape().str() + " != stage " +
                                 std::to_string(k + 1) + " input " +
                                 stages_[k + 1]->input_shape().str());
}

Image ComposedOp::apply(const Image& x) const {
    check_input(x);
    Image cur = stages_.front()->apply(x);
    for (std::size_t k = 1; k < stages_.size(); ++k) cur = stages_[k]->apply(cur);
    return cur;
}

Image ComposedOp::apply_adjoint(const Image& u) const {
    check_output(u);
    Image cur = stages_.back()->apply_adjoint(u);
    for (std::size_t k = stages_.size() - 1; k-- > 0;) cur = stages_[k]->apply_adjoint(cur);
    return cur;
}

std::optional<std::vector<std::complex<double>>> ComposedOp::fourier_symbol() const {
    auto acc = stages_.front()->fourier_symbol();
    if (!acc) return std::nullopt;
    for (std::size_t k = 1; k < stages_.size(); ++k) {
        auto s = stages_[k]->fourier_symbol();
        if (!s || s->size() != acc->size()) return std::nullopt;
        for (std::size_t i = 0; i < acc->size(); ++i) (*acc)[i] *= (*s)[i];
    }
    return acc;
}

std::string ComposedOp::describe() const {
    std::string d = "composed[";
    for (std::size_t k = 0; k < stages_.size(); ++k) {
        if (k) d += " ; ";
        d += stages_[k]->describe();
    }
    return d + "]";
}

DenseOp::DenseOp(Shape in, Shape out, std::vector<double> matrix)
    : in_(in), out_(out), m_(std::move(matrix)) {
    if (m_.size() != in_.numel() * out_.numel())
        throw DimensionError("DenseOp: matrix size does not match shapes");
}

Image DenseOp::apply(const Image& x) const {
    check_input(x);
    Image out(out_);
    const std::size_t rows = out_.numel(), cols = in_.numel();
    for (std::size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        const double* row = m_.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
        out[i] = acc;
    }
    return out;
}

Image DenseOp::apply_adjoint(const Image& u) const {
    check_output(u);
    Image out(in_);
    const std::size_t rows = out_.numel(), cols = in_.numel();
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = m_.data() + i * cols;
        const double ui = u[i];
        for (std::size_t j = 0; j < cols; ++j) out[j] += row[j] * ui;
    }
    return out;
}

double power_iteration_norm(const std::function<Image(const Image&)>& sym_op,
                            Shape shape, int max_iters, double tol, Rng& rng) {
    if (max_iters <= 0) throw ParameterError("power_iteration_norm: max_iters <= 0");
    Image v = random_normal_image(shape, rng);
    double nv = v.norm();
    int restarts = 0;
    while (nv == 0.0 && restarts++ < 8) {
        v = random_normal_image(shape, rng);
        nv = v.norm();
    }
    if (nv == 0.0) return 0.0;
    v *= 1.0 / nv;

    double lam_prev = 0.0, lam = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Image w = sym_op(v);
        lam = inner(v, w); // Rayleigh quotient, ||v|| == 1
        const double nw = w.norm();
        if (nw == 0.0) {
            // start vector fell entirely in the null space; try again
            if (++restarts > 8) return 0.0;
            v = random_normal_image(shape, rng);
            v *= 1.0 / v.norm();
            lam_prev = 0.0;
            continue;
        }
        w *= 1.0 / nw;
        v = std::move(w);
        if (it > 0 && std::fabs(lam - lam_prev) < tol) break;
        lam_prev = lam;
    }
    return std::max(lam, 0.0);
}

double gram_norm(const LinearOp& a, int max_iters, double tol, std::uint64_t seed) {
    Rng rng(seed);
    return power_iteration_norm(
        [&a](const Image& v) { return a.apply_adjoint(a.apply(v)); }, a.input_shape(),
        max_iters, tol, rng);
}

std::optional<double> exact_gram_norm(const LinearOp& a) {
    auto sym = a.fourier_symbol();
    if (!sym) return std::nullopt;
    double m = 0.0;
    for (const auto& s : *sym) m = std::max(m, std::norm(s));
    return m;
}

} // namespace pnpqn
