#include "pnpqn/fidelity.hpp"

#include <cmath>

namespace pnpqn {

Fidelity::Fidelity(LinearOpPtr a, Image y, double lambda, double norm_ata)
    : a_(std::move(a)), y_(std::move(y)), lambda_(lambda) {
    if (!a_) throw ParameterError("Fidelity: null operator");
    if (lambda_ < 0.0) throw ParameterError("Fidelity: lambda < 0");
    if (!(y_.shape() == a_->output_shape()))
        throw DimensionError("Fidelity: measurement shape " + y_.shape().str() +
                             " != operator output " + a_->output_shape().str());
    if (norm_ata >= 0.0) {
        norm_ata_ = norm_ata;
    } else if (auto exact = exact_gram_norm(*a_)) {
        norm_ata_ = *exact;
    } else {
        norm_ata_ = gram_norm(*a_);
    }
    aty_ = a_->apply_adjoint(y_);

    symbol_ = a_->fourier_symbol();
    if (symbol_) {
        const Shape s = a_->input_shape();
        fft_ = std::make_shared<Fft2D>(s.h, s.w);
        std::vector<std::complex<double>> spec(fft_->spec_size());
        y_spec_ = std::vector<std::complex<double>>();
        y_spec_->reserve(fft_->spec_size() * s.c);
        for (int c = 0; c < s.c; ++c) {
            fft_->forward(y_.channel(c), spec.data());
            y_spec_->insert(y_spec_->end(), spec.begin(), spec.end());
        }
    }
}

double Fidelity::value(const Image& x) const {
    Image r = a_->apply(x);
    r -= y_;
    return 0.5 * lambda_ * r.squared_norm();
}

Image Fidelity::grad(const Image& x) const {
    Image r = a_->apply(x);
    r -= y_;
    Image g = a_->apply_adjoint(r);
    g *= lambda_;
    return g;
}

double Fidelity::value_and_grad(const Image& x, Image& grad_out) const {
    Image r = a_->apply(x);
    r -= y_;
    const double f = 0.5 * lambda_ * r.squared_norm();
    grad_out = a_->apply_adjoint(r);
    grad_out *= lambda_;
    return f;
}

Image Fidelity::hvp(const Image& v) const {
    Image g = a_->apply_adjoint(a_->apply(v));
    g *= lambda_;
    return g;
}

Image Fidelity::prox(const Image& v, double s) const {
    if (s < 0.0) throw ParameterError("Fidelity::prox: negative step");
    if (!(v.shape() == a_->input_shape()))
        throw DimensionError("Fidelity::prox: shape mismatch");
    if (s == 0.0 || lambda_ == 0.0) return v;
    return symbol_ ? prox_fourier(v, s) : prox_cg(v, s);
}

Image Fidelity::prox_fourier(const Image& v, double s) const {
    const double sl = s * lambda_;
    const Shape shp = a_->input_shape();
    Image out(shp);
    std::vector<std::complex<double>> spec(fft_->spec_size());
    for (int c = 0; c < shp.c; ++c) {
        fft_->forward(v.channel(c), spec.data());
        const std::complex<double>* ys = y_spec_->data() + fft_->spec_size() * c;
        for (std::size_t k = 0; k < spec.size(); ++k) {
            const std::complex<double> chi = (*symbol_)[k];
            spec[k] = (spec[k] + sl * std::conj(chi) * ys[k]) / (1.0 + sl * std::norm(chi));
        }
        fft_->inverse(spec.data(), out.channel(c));
    }
    return out;
}

Image Fidelity::prox_cg(const Image& v, double s) const {
    const double sl = s * lambda_;
    const auto normal_op = [&](const Image& u) {
        Image m = a_->apply_adjoint(a_->apply(u));
        m *= sl;
        m += u;
        return m;
    };
    Image rhs = aty_;
    rhs *= sl;
    rhs += v;
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) return Image::zeros_like(v);

    // CG on the SPD system (I + s lambda A^T A) u = rhs, warm-started at v.
    Image u = v;
    Image r = rhs - normal_op(u);
    Image p = r;
    double rr = r.squared_norm();
    for (int it = 0; it < cg_max_iters; ++it) {
        if (std::sqrt(rr) <= cg_tol * rhs_norm) return u;
        Image mp = normal_op(p);
        const double alpha = rr / inner(p, mp);
        u.axpy(alpha, p);
        r.axpy(-alpha, mp);
        const double rr_new = r.squared_norm();
        p *= rr_new / rr;
        p += r;
        rr = rr_new;
    }
    if (std::sqrt(rr) <= cg_tol * rhs_norm) return u;
    throw NumericalError("Fidelity::prox: CG stalled, relative residual " +
                         std::to_string(std::sqrt(rr) / rhs_norm));
}

} // namespace pnpqn
