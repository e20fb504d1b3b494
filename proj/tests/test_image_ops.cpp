#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "pnpqn/image.hpp"
#include "pnpqn/kernel.hpp"
#include "pnpqn/linop.hpp"
#include "pnpqn/metrics.hpp"
#include "pnpqn/png_io.hpp"
#include "pnpqn/rng.hpp"

using namespace pnpqn;

namespace {

Image ramp(Shape s, double scale = 1.0) {
    Image img(s);
    for (std::size_t k = 0; k < img.size(); ++k)
        img[k] = scale * (0.1 * static_cast<double>(k) - 0.3);
    return img;
}

} // namespace

TEST_CASE("image arithmetic is elementwise") {
    const Shape s{2, 3, 4};
    Image a = ramp(s), b = ramp(s, -0.5);
    const Image sum = a + b;
    const Image diff = a - b;
    for (std::size_t k = 0; k < sum.size(); ++k) {
        CHECK(sum[k] == doctest::Approx(a[k] + b[k]));
        CHECK(diff[k] == doctest::Approx(a[k] - b[k]));
    }
    Image c = a;
    c.axpy(2.5, b);
    for (std::size_t k = 0; k < c.size(); ++k)
        CHECK(c[k] == doctest::Approx(a[k] + 2.5 * b[k]));
    const Image d = 3.0 * a;
    CHECK(d.max_abs() == doctest::Approx(3.0 * a.max_abs()));
}

TEST_CASE("inner and norms agree with the elementwise sums") {
    const Shape s{1, 4, 5};
    const Image a = ramp(s), b = ramp(s, 0.7);
    double ip = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ip += a[k] * b[k];
        sq += a[k] * a[k];
    }
    CHECK(inner(a, b) == doctest::Approx(ip).epsilon(1e-14));
    CHECK(a.squared_norm() == doctest::Approx(sq).epsilon(1e-14));
    CHECK(a.norm() == doctest::Approx(std::sqrt(sq)).epsilon(1e-14));
}

TEST_CASE("shape mismatches throw") {
    Image a(1, 2, 2), b(1, 2, 3);
    CHECK_THROWS_AS(a += b, DimensionError);
    CHECK_THROWS_AS((void)inner(a, b), DimensionError);
}

TEST_CASE("indexing is channels-first row-major") {
    Image a(2, 3, 4);
    a(1, 2, 3) = 9.0;
    CHECK(a[(1 * 3 + 2) * 4 + 3] == 9.0);
    CHECK(a.channel(1)[2 * 4 + 3] == 9.0);
}

TEST_CASE("require_finite names the offender") {
    Image a(1, 1, 2);
    a[0] = std::nan("");
    CHECK_FALSE(a.all_finite());
    CHECK_THROWS_AS(a.require_finite("unit"), NumericalError);
}

TEST_CASE("rng streams are reproducible and children are decoupled") {
    Rng a(42), b(42);
    for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
    // child(k) ignores parent consumption
    Rng fresh(42);
    Rng c1 = fresh.child(3);
    (void)fresh.uniform();
    (void)fresh.uniform();
    Rng c2 = fresh.child(3);
    CHECK(c1.next_u64() == c2.next_u64());
    CHECK(std::string(Rng::algorithm_id) == "splitmix64-polar");
}

TEST_CASE("normal draws have roughly unit moments") {
    Rng r(7);
    double m1 = 0.0, m2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        m1 += z;
        m2 += z * z;
    }
    m1 /= n;
    m2 /= n;
    CHECK(std::fabs(m1) < 0.03);
    CHECK(m2 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("psnr and mse at known values") {
    Image a(1, 2, 2, 0.5), b(1, 2, 2, 0.5);
    CHECK(std::isinf(psnr(a, b)));
    b[0] = 0.6; // mse = 0.01/4
    CHECK(mse(a, b) == doctest::Approx(0.0025));
    CHECK(psnr(a, b) == doctest::Approx(-10.0 * std::log10(0.0025)));
}

TEST_CASE("gaussian noise has the requested scale") {
    const Image x(3, 16, 16, 0.5);
    Rng r(11);
    const Image y = add_gaussian_noise(x, 0.05, r);
    const Image d = y - x;
    const double sd = std::sqrt(d.squared_norm() / static_cast<double>(d.size()));
    CHECK(sd == doctest::Approx(0.05).epsilon(0.1));
    Rng r2(11);
    const Image y0 = add_gaussian_noise(x, 0.0, r2);
    CHECK((y0 - x).max_abs() == 0.0);
}

TEST_CASE("builtin kernels are normalized") {
    for (const auto& name : builtin_kernel_names()) {
        CAPTURE(name);
        const Kernel k = builtin_kernel(name);
        CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(is_builtin_kernel(name));
    }
    CHECK_FALSE(is_builtin_kernel("no_such_kernel"));
    CHECK_THROWS_AS(builtin_kernel("no_such_kernel"), ParameterError);
}

TEST_CASE("delta kernel is the identity stencil") {
    const Kernel k = delta_kernel();
    CHECK(k.at(k.center_row(), k.center_col()) == 1.0);
    CHECK(k.sum() == 1.0);
}

TEST_CASE("gaussian kernel is symmetric and centered") {
    const Kernel k = gaussian_kernel(5, 0.7);
    CHECK(k.h == 5);
    CHECK(k.w == 5);
    CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
            CHECK(k.at(a, b) == doctest::Approx(k.at(4 - a, 4 - b)));
    // peak at the center
    CHECK(k.at(2, 2) > k.at(2, 1));
}

TEST_CASE("normalize rejects zero-sum stencils") {
    Kernel k{1, 2, {1.0, -1.0}};
    CHECK_THROWS_AS(k.normalize(), ParameterError);
}

TEST_CASE("kernel file round trip and resolve dispatch") {
    Kernel k = gaussian_kernel(3, 0.9);
    const std::string path = "kernel_tmp.txt";
    save_kernel(path, k);
    const Kernel back = load_kernel(path);
    REQUIRE(back.h == k.h);
    REQUIRE(back.w == k.w);
    for (std::size_t i = 0; i < k.wts.size(); ++i)
        CHECK(back.wts[i] == doctest::Approx(k.wts[i]).epsilon(1e-12));
    const Kernel via_resolve = resolve_kernel("file:" + path);
    CHECK(via_resolve.wts == back.wts);
    std::remove(path.c_str());
    CHECK(resolve_kernel("builtin:delta").wts == delta_kernel().wts);
    CHECK(resolve_kernel("uniform9x9").h == 9);
    CHECK_THROWS_AS(resolve_kernel("file:missing_kernel.txt"), IoError);
}

TEST_CASE("circular convolution matches the spatial-domain sum") {
    const Shape s{1, 5, 6};
    const Kernel k = gaussian_kernel(3, 0.8);
    const CircularConvOp op(s, k, 1.3);
    Rng r(5);
    const Image x = random_normal_image(s, r);
    const Image ax = op.apply(x);
    const int cr = k.center_row(), cc = k.center_col();
    for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j) {
            double acc = 0.0;
            for (int a = 0; a < k.h; ++a)
                for (int b = 0; b < k.w; ++b)
                    acc += k.at(a, b) *
                           x(0, ((i - (a - cr)) % s.h + s.h) % s.h,
                             ((j - (b - cc)) % s.w + s.w) % s.w);
            CHECK(ax(0, i, j) == doctest::Approx(1.3 * acc).epsilon(1e-10));
        }
}

TEST_CASE("adjoints satisfy the inner-product identity") {
    const Shape s{2, 6, 6};
    Rng r(17);
    auto check_adjoint = [&](const LinearOp& op) {
        const Image x = random_normal_image(op.input_shape(), r);
        const Image u = random_normal_image(op.output_shape(), r);
        const double lhs = inner(op.apply(x), u);
        const double rhs = inner(x, op.apply_adjoint(u));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
    };
    check_adjoint(CircularConvOp(s, gaussian_kernel(5, 1.1)));
    check_adjoint(DownsampleOp(s, 2));
    check_adjoint(IdentityOp(s));
    std::vector<LinearOpPtr> stages{
        std::make_shared<CircularConvOp>(s, gaussian_kernel(3, 0.7)),
        std::make_shared<DownsampleOp>(s, 3)};
    check_adjoint(ComposedOp(stages));
}

TEST_CASE("downsample keeps the lattice and its adjoint zero-fills") {
    const Shape s{1, 4, 6};
    const DownsampleOp op(s, 2);
    CHECK(op.output_shape() == Shape{1, 2, 3});
    Image x(s);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = static_cast<double>(k);
    const Image y = op.apply(x);
    CHECK(y(0, 1, 2) == x(0, 2, 4));
    // S S^T = I on the small space
    const Image back = op.apply(op.apply_adjoint(y));
    CHECK((back - y).max_abs() == 0.0);
    // S^T S keeps lattice entries, zeroes the rest
    const Image m = op.apply_adjoint(op.apply(x));
    CHECK(m(0, 0, 2) == x(0, 0, 2));
    CHECK(m(0, 1, 2) == 0.0);
}

TEST_CASE("fourier symbol reproduces the operator and its exact norm") {
    const Shape s{1, 8, 8};
    const CircularConvOp op(s, gaussian_kernel(5, 1.3), 0.9);
    REQUIRE(op.fourier_symbol().has_value());
    CHECK(op.exact_gram_norm() == doctest::Approx(*exact_gram_norm(op)));
    // power iteration converges to the symbol bound
    CHECK(gram_norm(op) == doctest::Approx(op.exact_gram_norm()).epsilon(1e-6));
    CHECK(*exact_gram_norm(IdentityOp(s)) == doctest::Approx(1.0));
}

TEST_CASE("dense op reproduces explicit matrix action") {
    const Shape in{1, 1, 2}, out{1, 1, 3};
    const DenseOp op(in, out, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    Image x(in);
    x[0] = 1.0;
    x[1] = -1.0;
    const Image y = op.apply(x);
    CHECK(y[0] == doctest::Approx(-1.0));
    CHECK(y[1] == doctest::Approx(-1.0));
    CHECK(y[2] == doctest::Approx(-1.0));
    Image u(out);
    u[0] = 1.0;
    u[1] = 0.0;
    u[2] = 2.0;
    const Image at = op.apply_adjoint(u);
    CHECK(at[0] == doctest::Approx(1.0 + 2.0 * 5.0));
    CHECK(at[1] == doctest::Approx(2.0 + 2.0 * 6.0));
}

TEST_CASE("power iteration finds the top eigenvalue of a diagonal map") {
    const Shape s{1, 1, 3};
    Rng r(23);
    auto diag = [](const Image& v) {
        Image out = v;
        out[0] *= 0.5;
        out[1] *= 2.0;
        out[2] *= 1.5;
        return out;
    };
    CHECK(power_iteration_norm(diag, s, 500, 1e-12, r) == doctest::Approx(2.0));
    auto zero = [](const Image& v) { return Image::zeros_like(v); };
    CHECK(power_iteration_norm(zero, s, 50, 1e-12, r) == 0.0);
}

TEST_CASE("png round trip is 8-bit exact") {
    Image img(3, 5, 7);
    Rng r(3);
    for (std::size_t k = 0; k < img.size(); ++k) img[k] = r.uniform();
    img[0] = -0.2; // clamped on save
    img[1] = 1.7;
    const std::string path = "png_tmp.png";
    save_png(path, img);
    const Image back = load_png(path);
    std::remove(path.c_str());
    REQUIRE(back.shape() == img.shape());
    CHECK(back[0] == 0.0);
    CHECK(back[1] == 1.0);
    for (std::size_t k = 2; k < img.size(); ++k)
        CHECK(std::fabs(back[k] - img[k]) <= 0.5 / 255.0 + 1e-12);
    CHECK_THROWS_AS(load_png("missing.png"), IoError);
}
