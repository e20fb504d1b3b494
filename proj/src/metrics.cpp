#include "pnpqn/metrics.hpp"

#include <cmath>
#include <limits>

namespace pnpqn {

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    if (a.size() == 0) throw DimensionError("mse: empty tensors");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(m);
}

Image add_gaussian_noise(const Image& x, double sigma, Rng& rng) {
    if (sigma < 0.0) throw ParameterError("add_gaussian_noise: sigma < 0");
    Image out = x;
    if (sigma == 0.0) return out;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += sigma * rng.normal();
    out.require_finite("add_gaussian_noise");
    return out;
}

Image random_normal_image(Shape s, Rng& rng) {
    Image out(s);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = rng.normal();
    return out;
}

Image random_uniform_image(Shape s, Rng& rng) {
    Image out(s);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = rng.uniform();
    return out;
}

} // namespace pnpqn
