#include "pnpqn/kernel.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace pnpqn {

double Kernel::sum() const {
    double s = 0.0;
    for (double v : wts) s += v;
    return s;
}

void Kernel::normalize() {
    const double s = sum();
    if (std::fabs(s) < 1e-300)
        throw ParameterError("Kernel::normalize: weights sum to zero");
    for (double& v : wts) v /= s;
}

Kernel delta_kernel() { return Kernel{1, 1, {1.0}}; }

Kernel uniform_kernel(int size) {
    if (size <= 0) throw ParameterError("uniform_kernel: size must be positive");
    Kernel k{size, size, {}};
    k.wts.assign(static_cast<std::size_t>(size) * size,
                 1.0 / (static_cast<double>(size) * size));
    return k;
}

Kernel gaussian_kernel(int size, double sigma) {
    if (size <= 0) throw ParameterError("gaussian_kernel: size must be positive");
    if (sigma <= 0.0) throw ParameterError("gaussian_kernel: sigma must be positive");
    Kernel k{size, size, std::vector<double>(static_cast<std::size_t>(size) * size)};
    const int cr = k.center_row(), cc = k.center_col();
    for (int a = 0; a < size; ++a)
        for (int b = 0; b < size; ++b) {
            const double d2 = static_cast<double>((a - cr) * (a - cr) + (b - cc) * (b - cc));
            k.at(a, b) = std::exp(-d2 / (2.0 * sigma * sigma));
        }
    k.normalize();
    return k;
}

std::vector<std::string> builtin_kernel_names() {
    return {"delta",       "uniform9x9",  "gauss25_1.6",
            "gauss25_0.7", "gauss25_1.2", "gauss25_2.0"};
}

bool is_builtin_kernel(const std::string& name) {
    for (const auto& n : builtin_kernel_names())
        if (n == name) return true;
    return false;
}

Kernel builtin_kernel(const std::string& name) {
    if (name == "delta") return delta_kernel();
    if (name == "uniform9x9") return uniform_kernel(9);
    if (name == "gauss25_0.7") return gaussian_kernel(25, 0.7);
    if (name == "gauss25_1.2") return gaussian_kernel(25, 1.2);
    if (name == "gauss25_1.6") return gaussian_kernel(25, 1.6);
    if (name == "gauss25_2.0") return gaussian_kernel(25, 2.0);
    throw ParameterError("builtin_kernel: unknown name '" + name + "'");
}

Kernel load_kernel(const std::string& path, bool normalize) {
    std::ifstream in(path);
    if (!in) throw IoError("load_kernel: cannot open '" + path + "'");
    int h = 0, w = 0;
    if (!(in >> h >> w) || h <= 0 || w <= 0)
        throw IoError("load_kernel: bad header in '" + path + "'");
    Kernel k{h, w, std::vector<double>(static_cast<std::size_t>(h) * w)};
    for (auto& v : k.wts)
        if (!(in >> v)) throw IoError("load_kernel: truncated weights in '" + path + "'");
    if (normalize) k.normalize();
    return k;
}

void save_kernel(const std::string& path, const Kernel& k) {
    std::ofstream out(path);
    if (!out) throw IoError("save_kernel: cannot open '" + path + "'");
    out << k.h << " " << k.w << "\n";
    out.precision(17);
    for (int a = 0; a < k.h; ++a) {
        for (int b = 0; b < k.w; ++b) out << (b ? " " : "") << k.at(a, b);
        out << "\n";
    }
    if (!out) throw IoError("save_kernel: write failed for '" + path + "'");
}

Kernel resolve_kernel(const std::string& spec, bool normalize) {
    if (spec.rfind("builtin:", 0) == 0) return builtin_kernel(spec.substr(8));
    if (spec.rfind("file:", 0) == 0) return load_kernel(spec.substr(5), normalize);
    if (is_builtin_kernel(spec)) return builtin_kernel(spec);
    return load_kernel(spec, normalize);
}

} // namespace pnpqn
