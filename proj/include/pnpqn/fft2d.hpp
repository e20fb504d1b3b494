#pragma once

#include <complex>
#include <vector>

namespace pnpqn {

// Real 2-D FFT pair for one H x W plane, backed by FFTW. Plans are created
// once per instance (plan creation is serialized globally; execution on
// distinct buffers is safe concurrently), with FFTW_UNALIGNED so transforms
// run on ordinary std::vector storage. Instances are immutable after
// construction and shareable across threads.
//
// Spectrum layout is FFTW r2c packing: H rows by (W/2+1) columns, row-major.
// inverse() applies the 1/(H*W) normalization, so inverse(forward(x)) == x.
class Fft2D {
public:
    Fft2D(int h, int w);
    ~Fft2D();
    Fft2D(const Fft2D&) = delete;
    Fft2D& operator=(const Fft2D&) = delete;

    int h() const { return h_; }
    int w() const { return w_; }
    int spec_cols() const { return w_ / 2 + 1; }
    std::size_t spec_size() const {
        return static_cast<std::size_t>(h_) * static_cast<std::size_t>(spec_cols());
    }

    void forward(const double* in, std::complex<double>* out) const;
    void inverse(const std::complex<double>* in, double* out) const;

    std::vector<std::complex<double>> forward(const std::vector<double>& in) const;

private:
    int h_, w_;
    void* fwd_ = nullptr; // fftw_plan
    void* bwd_ = nullptr;
};

} // namespace pnpqn
