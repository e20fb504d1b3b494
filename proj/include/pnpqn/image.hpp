#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pnpqn/errors.hpp"

namespace pnpqn {

// Channels-first tensor shape. Images are (C,H,W); a plain vector of length n
// is represented as (1,1,n).
struct Shape {
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

// Dense double-precision image tensor, channels-first, row-major per channel.
// Value semantics; all arithmetic is elementwise and shape-checked.
class Image {
public:
    Image() = default;
    Image(int c, int h, int w, double fill = 0.0);
    explicit Image(Shape s, double fill = 0.0);

    static Image zeros_like(const Image& other) { return Image(other.shape_); }

    Shape shape() const { return shape_; }
    int channels() const { return shape_.c; }
    int height() const { return shape_.h; }
    int width() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int c, int i, int j) {
        return data_[(static_cast<std::size_t>(c) * shape_.h + i) * shape_.w + j];
    }
    double operator()(int c, int i, int j) const {
        return data_[(static_cast<std::size_t>(c) * shape_.h + i) * shape_.w + j];
    }
    double& operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* channel(int c) { return data_.data() + static_cast<std::size_t>(c) * plane(); }
    const double* channel(int c) const {
        return data_.data() + static_cast<std::size_t>(c) * plane();
    }
    std::size_t plane() const {
        return static_cast<std::size_t>(shape_.h) * static_cast<std::size_t>(shape_.w);
    }

    Image& operator+=(const Image& rhs);
    Image& operator-=(const Image& rhs);
    Image& operator*=(double s);
    // *this += a * x  (fused update, the workhorse of every solver loop)
    Image& axpy(double a, const Image& x);
    void fill(double v);

    bool same_shape(const Image& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    // Throws NumericalError naming `who` if any entry is NaN/Inf.
    void require_finite(const char* who) const;

    double squared_norm() const;
    double norm() const;
    double max_abs() const;

private:
    Shape shape_{};
    std::vector<double> data_;
};

Image operator+(Image a, const Image& b);
Image operator-(Image a, const Image& b);
Image operator*(double s, Image a);

// Euclidean inner product over all entries (oracle-checked elementwise sum).
double inner(const Image& a, const Image& b);

void require_same_shape(const Image& a, const Image& b, const char* who);

} // namespace pnpqn
