#include "pnpqn/soft_threshold.hpp"

#include <cmath>
#include <sstream>

namespace pnpqn {

SoftThreshold::SoftThreshold(double tau) : tau_(tau) {
    if (tau < 0.0) throw ParameterError("SoftThreshold: tau < 0");
}

Image SoftThreshold::prox_step(const Image& v, double gamma) const {
    if (gamma <= 0.0) throw ParameterError("SoftThreshold::prox_step: gamma <= 0");
    const double t = gamma * tau_;
    Image out = Image::zeros_like(v);
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double a = std::fabs(v[k]) - t;
        out[k] = a > 0.0 ? std::copysign(a, v[k]) : 0.0;
    }
    return out;
}

double SoftThreshold::envelope_term(const Image& v, double gamma) const {
    if (gamma <= 0.0) throw ParameterError("SoftThreshold::envelope_term: gamma <= 0");
    const double t = gamma * tau_;
    double acc = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double a = std::fabs(v[k]);
        // Huber: quadratic cap inside |v| <= gamma tau, affine outside.
        acc += a <= t ? a * a / (2.0 * gamma) : tau_ * a - gamma * tau_ * tau_ / 2.0;
    }
    return acc;
}

std::optional<double> SoftThreshold::reg_value(const Image& u, double gamma) const {
    (void)gamma;
    double acc = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) acc += std::fabs(u[k]);
    return tau_ * acc;
}

std::string SoftThreshold::describe() const {
    std::ostringstream os;
    os << "soft_threshold tau=" << tau_;
    return os.str();
}

} // namespace pnpqn
