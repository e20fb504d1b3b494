#include "doctest.h"

#include <cmath>
#include <memory>

#include "pnpqn/fidelity.hpp"
#include "pnpqn/metrics.hpp"

using namespace pnpqn;

namespace {

// small blur fidelity with an exact Fourier symbol
Fidelity make_conv_fidelity(double lambda = 1.4) {
    const Shape s{1, 6, 6};
    auto op = std::make_shared<CircularConvOp>(s, gaussian_kernel(3, 0.9), 0.8);
    Rng r(2);
    return Fidelity(op, random_uniform_image(s, r), lambda);
}

// same matrix without a symbol, to force the CG prox path
Fidelity make_dense_fidelity(const Fidelity& conv) {
    const auto& op = dynamic_cast<const CircularConvOp&>(conv.op());
    const Shape s = op.input_shape();
    const std::size_t n = s.numel();
    std::vector<double> m(n * n);
    for (std::size_t j = 0; j < n; ++j) {
        Image e(s);
        e[j] = 1.0;
        const Image col = op.apply(e);
        for (std::size_t i = 0; i < n; ++i) m[i * n + j] = col[i];
    }
    auto dense = std::make_shared<DenseOp>(s, s, std::move(m));
    return Fidelity(dense, conv.measurement(), conv.lambda());
}

} // namespace

TEST_CASE("value and gradient match the quadratic by hand") {
    const Fidelity fid = make_conv_fidelity();
    Rng r(9);
    const Image x = random_normal_image(fid.op().input_shape(), r);
    const Image res = fid.op().apply(x) - fid.measurement();
    CHECK(fid.value(x) ==
          doctest::Approx(0.5 * fid.lambda() * res.squared_norm()).epsilon(1e-12));
    const Image g = fid.grad(x);
    const Image g_hand = fid.lambda() * fid.op().apply_adjoint(res);
    CHECK((g - g_hand).max_abs() < 1e-12);

    Image g2;
    const double v2 = fid.value_and_grad(x, g2);
    CHECK(v2 == doctest::Approx(fid.value(x)).epsilon(1e-13));
    CHECK((g2 - g).max_abs() < 1e-13);
}

TEST_CASE("gradient passes a central finite-difference probe") {
    const Fidelity fid = make_conv_fidelity();
    Rng r(13);
    const Image x = random_normal_image(fid.op().input_shape(), r);
    const Image g = fid.grad(x);
    const double h = 1e-6;
    for (std::size_t k : {std::size_t{0}, std::size_t{7}, std::size_t{20}}) {
        Image xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const double fd = (fid.value(xp) - fid.value(xm)) / (2.0 * h);
        CHECK(std::fabs(g[k] - fd) < 1e-7 * (1.0 + std::fabs(g[k])));
    }
}

TEST_CASE("hvp is the constant map lambda AtA v") {
    const Fidelity fid = make_conv_fidelity();
    Rng r(4);
    const Image v = random_normal_image(fid.op().input_shape(), r);
    const Image hv = fid.hvp(v);
    const Image hand = fid.lambda() * fid.op().apply_adjoint(fid.op().apply(v));
    CHECK((hv - hand).max_abs() < 1e-12);
    // independence from any base point: grad is affine
    const Image x = random_normal_image(fid.op().input_shape(), r);
    const Image diff = fid.grad(x + v) - fid.grad(x);
    CHECK((diff - hv).max_abs() < 1e-10);
}

TEST_CASE("lipschitz constant equals lambda times the exact gram norm") {
    const Fidelity fid = make_conv_fidelity(2.0);
    const auto& op = dynamic_cast<const CircularConvOp&>(fid.op());
    CHECK(fid.norm_ata() == doctest::Approx(op.exact_gram_norm()).epsilon(1e-12));
    CHECK(fid.lipschitz() == doctest::Approx(2.0 * op.exact_gram_norm()));
    // explicit override wins
    const Fidelity pinned(fid.op_ptr(), fid.measurement(), 2.0, 0.5);
    CHECK(pinned.norm_ata() == 0.5);
}

TEST_CASE("prox solves the regularized normal equations") {
    const Fidelity fid = make_conv_fidelity();
    Rng r(6);
    const Image v = random_normal_image(fid.op().input_shape(), r);
    const double s = 0.7;
    const Image u = fid.prox(v, s);
    // optimality: u + s grad f(u) = v
    const Image res = u + s * fid.grad(u) - v;
    CHECK(res.max_abs() < 1e-9);
    CHECK((fid.prox(v, 0.0) - v).max_abs() == 0.0);
    CHECK_THROWS_AS(fid.prox(v, -0.1), ParameterError);
}

TEST_CASE("fourier and cg prox paths agree") {
    const Fidelity conv = make_conv_fidelity();
    const Fidelity dense = make_dense_fidelity(conv);
    Rng r(21);
    const Image v = random_normal_image(conv.op().input_shape(), r);
    for (double s : {0.05, 0.9, 4.0}) {
        const Image a = conv.prox(v, s);
        const Image b = dense.prox(v, s);
        CHECK((a - b).max_abs() < 1e-8);
    }
}

TEST_CASE("construction rejects bad parameters") {
    const Shape s{1, 4, 4};
    auto op = std::make_shared<IdentityOp>(s);
    const Image y(s, 0.2);
    CHECK_THROWS_AS(Fidelity(nullptr, y, 1.0), ParameterError);
    CHECK_THROWS_AS(Fidelity(op, y, -1.0), ParameterError);
    CHECK_THROWS_AS(Fidelity(op, Image(Shape{1, 2, 2}, 0.0), 1.0), DimensionError);
}
