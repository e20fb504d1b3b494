#include "pnpqn/fft2d.hpp"

#include <fftw3.h>

#include <mutex>

#include "pnpqn/errors.hpp"

namespace pnpqn {

namespace {
// FFTW planner is not thread-safe; executions on separate arrays are.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace

Fft2D::Fft2D(int h, int w) : h_(h), w_(w) {
    if (h <= 0 || w <= 0) throw DimensionError("Fft2D: non-positive extent");
    std::lock_guard<std::mutex> lock(planner_mutex());
    std::vector<double> re(static_cast<std::size_t>(h) * w);
    std::vector<std::complex<double>> sp(spec_size());
    // FFTW_UNALIGNED: plans stay valid for any caller-provided buffers.
    fwd_ = fftw_plan_dft_r2c_2d(h, w, re.data(),
                                reinterpret_cast<fftw_complex*>(sp.data()),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    bwd_ = fftw_plan_dft_c2r_2d(h, w, reinterpret_cast<fftw_complex*>(sp.data()),
                                re.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!fwd_ || !bwd_) throw NumericalError("Fft2D: FFTW plan creation failed");
}

Fft2D::~Fft2D() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    if (bwd_) fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

void Fft2D::forward(const double* in, std::complex<double>* out) const {
    // r2c leaves the input intact; the const_cast only satisfies the C API.
    fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_), const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
}

void Fft2D::inverse(const std::complex<double>* in, double* out) const {
    // c2r destroys its input, so run on a scratch copy.
    std::vector<std::complex<double>> scratch(in, in + spec_size());
    fftw_execute_dft_c2r(static_cast<fftw_plan>(bwd_),
                         reinterpret_cast<fftw_complex*>(scratch.data()), out);
    const double scale = 1.0 / (static_cast<double>(h_) * static_cast<double>(w_));
    const std::size_t n = static_cast<std::size_t>(h_) * w_;
    for (std::size_t k = 0; k < n; ++k) out[k] *= scale;
}

std::vector<std::complex<double>> Fft2D::forward(const std::vector<double>& in) const {
    if (in.size() != static_cast<std::size_t>(h_) * w_)
        throw DimensionError("Fft2D::forward: buffer size mismatch");
    std::vector<std::complex<double>> out(spec_size());
    forward(in.data(), out.data());
    return out;
}

} // namespace pnpqn
