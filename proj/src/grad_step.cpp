#include "pnpqn/grad_step.hpp"

#include <cmath>
#include <sstream>

namespace pnpqn {

GradStepDenoiser::GradStepDenoiser(double alpha, double sigma_d)
    : alpha_(alpha), sigma_d_(sigma_d) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ParameterError("GradStepDenoiser: alpha must be in (0,1]");
    if (sigma_d < 0.0) throw ParameterError("GradStepDenoiser: sigma_d < 0");
}

void GradStepDenoiser::validate() const {
    const double l = grad_lipschitz();
    if (!(l > 0.0 && l < 1.0))
        throw ParameterError("GradStepDenoiser: potential gradient Lipschitz constant " +
                             std::to_string(l) + " outside (0,1)");
}

Image GradStepDenoiser::denoise(const Image& v) const {
    Image out = v;
    out.axpy(-alpha_, potential_grad(v));
    return out;
}

Image GradStepDenoiser::denoise_inverse(const Image& u) const {
    // Solve z - alpha grad(z) = u by z <- u + alpha grad(z); sup-norm
    // contraction with factor alpha * L < 1.
    const double target = 1e-12;
    const int max_iters = 200000;
    Image z = u;
    for (int it = 0; it < max_iters; ++it) {
        Image znext = u;
        znext.axpy(alpha_, potential_grad(z));
        double step = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k)
            step = std::max(step, std::fabs(znext[k] - z[k]));
        z = std::move(znext);
        if (step <= target) return z;
    }
    throw NumericalError("GradStepDenoiser::denoise_inverse: fixed point stalled");
}

double GradStepDenoiser::prox_potential(const Image& u) const {
    Image z = denoise_inverse(u);
    Image d = z - u;
    return alpha_ * potential(z) - 0.5 * d.squared_norm();
}

Image GradStepDenoiser::prox_step(const Image& v, double gamma) const {
    if (gamma <= 0.0) throw ParameterError("prox_step: gamma <= 0");
    return denoise(v);
}

double GradStepDenoiser::envelope_term(const Image& v, double gamma) const {
    if (gamma <= 0.0) throw ParameterError("envelope_term: gamma <= 0");
    return alpha_ * potential(v) / gamma;
}

std::optional<double> GradStepDenoiser::reg_value(const Image& u, double gamma) const {
    if (gamma <= 0.0) throw ParameterError("reg_value: gamma <= 0");
    return prox_potential(u) / gamma;
}

double GradStepDenoiser::weak_convexity(double gamma) const {
    if (gamma <= 0.0) throw ParameterError("weak_convexity: gamma <= 0");
    const double c = alpha_ * grad_lipschitz();
    return c / ((c + 1.0) * gamma);
}

QuadraticGradStep::QuadraticGradStep(double l, Image b, double alpha, double sigma_d)
    : GradStepDenoiser(alpha, sigma_d), l_(l), b_(std::move(b)) {
    validate();
}

double QuadraticGradStep::potential(const Image& x) const {
    require_same_shape(x, b_, "QuadraticGradStep::potential");
    Image d = x - b_;
    return 0.5 * l_ * d.squared_norm();
}

Image QuadraticGradStep::potential_grad(const Image& x) const {
    require_same_shape(x, b_, "QuadraticGradStep::potential_grad");
    Image g = x - b_;
    g *= l_;
    return g;
}

Image QuadraticGradStep::denoise_inverse(const Image& u) const {
    // (1-c) z + c b = u  =>  z = (u - c b) / (1 - c)
    const double c = alpha_ * l_;
    Image z = u;
    z.axpy(-c, b_);
    z *= 1.0 / (1.0 - c);
    return z;
}

std::string QuadraticGradStep::describe() const {
    std::ostringstream os;
    os << "quadratic_grad_step L=" << l_ << " alpha=" << alpha_;
    return os.str();
}

CosineGradStep::CosineGradStep(double amp, double omega, double alpha, double sigma_d)
    : GradStepDenoiser(alpha, sigma_d), amp_(amp), omega_(omega) {
    if (amp <= 0.0 || omega <= 0.0)
        throw ParameterError("CosineGradStep: amp and omega must be positive");
    validate();
}

double CosineGradStep::potential(const Image& x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += 1.0 - std::cos(omega_ * x[k]);
    return amp_ * acc;
}

Image CosineGradStep::potential_grad(const Image& x) const {
    Image g = Image::zeros_like(x);
    for (std::size_t k = 0; k < x.size(); ++k)
        g[k] = amp_ * omega_ * std::sin(omega_ * x[k]);
    return g;
}

std::string CosineGradStep::describe() const {
    std::ostringstream os;
    os << "cosine_grad_step amp=" << amp_ << " omega=" << omega_ << " alpha=" << alpha_;
    return os.str();
}

} // namespace pnpqn
