#pragma once

#include <string>
#include <vector>

#include "pnpqn/errors.hpp"

namespace pnpqn {

// Small 2-D convolution stencil. The anchor pixel is (h/2, w/2) with floor
// division, which for the odd sizes used in practice is the exact center.
struct Kernel {
    int h = 0;
    int w = 0;
    std::vector<double> wts; // row-major, size h*w

    double at(int a, int b) const { return wts[static_cast<std::size_t>(a) * w + b]; }
    double& at(int a, int b) { return wts[static_cast<std::size_t>(a) * w + b]; }
    int center_row() const { return h / 2; }
    int center_col() const { return w / 2; }
    double sum() const;

    // Divides by sum(); throws ParameterError if |sum| is numerically zero.
    void normalize();
};

Kernel delta_kernel();
Kernel uniform_kernel(int size);
// Isotropic Gaussian truncated to size x size, normalized to sum 1.
Kernel gaussian_kernel(int size, double sigma);

// Named kernels available without any data files:
//   delta, uniform9x9, gauss25_1.6 (deblurring),
//   gauss25_0.7 gauss25_1.2 gauss25_1.6 gauss25_2.0 (super-resolution blurs).
std::vector<std::string> builtin_kernel_names();
bool is_builtin_kernel(const std::string& name);
Kernel builtin_kernel(const std::string& name);

// Text format: first line "H W", then H lines of W space-separated floats.
// Loader normalizes to sum 1 unless normalize=false.
Kernel load_kernel(const std::string& path, bool normalize = true);
void save_kernel(const std::string& path, const Kernel& k);

// Dispatch: "builtin:<name>" or plain builtin name, "file:<path>" or a path.
Kernel resolve_kernel(const std::string& spec, bool normalize = true);

} // namespace pnpqn
