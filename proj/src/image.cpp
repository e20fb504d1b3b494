#include "pnpqn/image.hpp"

#include <cmath>
#include <sstream>

namespace pnpqn {

std::string Shape::str() const {
    std::ostringstream os;
    os << "(" << c << "," << h << "," << w << ")";
    return os.str();
}

Image::Image(int c, int h, int w, double fill) : Image(Shape{c, h, w}, fill) {}

Image::Image(Shape s, double fill) : shape_(s) {
    if (s.c < 0 || s.h < 0 || s.w < 0)
        throw DimensionError("Image: negative extent in shape " + s.str());
    data_.assign(s.numel(), fill);
}

void require_same_shape(const Image& a, const Image& b, const char* who) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(who) + ": shape mismatch " + a.shape().str() +
                             " vs " + b.shape().str());
}

Image& Image::operator+=(const Image& rhs) {
    require_same_shape(*this, rhs, "Image::operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += rhs.data_[k];
    return *this;
}

Image& Image::operator-=(const Image& rhs) {
    require_same_shape(*this, rhs, "Image::operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= rhs.data_[k];
    return *this;
}

Image& Image::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Image& Image::axpy(double a, const Image& x) {
    require_same_shape(*this, x, "Image::axpy");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += a * x.data_[k];
    return *this;
}

void Image::fill(double v) { data_.assign(data_.size(), v); }

bool Image::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Image::require_finite(const char* who) const {
    if (!all_finite())
        throw NumericalError(std::string(who) + ": non-finite entry in tensor " +
                             shape_.str());
}

double Image::squared_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return acc;
}

double Image::norm() const { return std::sqrt(squared_norm()); }

double Image::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

Image operator+(Image a, const Image& b) {
    a += b;
    return a;
}

Image operator-(Image a, const Image& b) {
    a -= b;
    return a;
}

Image operator*(double s, Image a) {
    a *= s;
    return a;
}

double inner(const Image& a, const Image& b) {
    require_same_shape(a, b, "inner");
    double acc = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t k = 0; k < a.size(); ++k) acc += pa[k] * pb[k];
    return acc;
}

} // namespace pnpqn
