#include "doctest.h"

#include <cmath>

#include "pnpqn/lbfgs.hpp"
#include "pnpqn/metrics.hpp"

using namespace pnpqn;

namespace {

const Shape kS{1, 1, 4};

Image vec(double a, double b, double c, double d) {
    Image v(kS);
    v[0] = a;
    v[1] = b;
    v[2] = c;
    v[3] = d;
    return v;
}

} // namespace

TEST_CASE("empty store applies the seed scale") {
    SecantStore st(5, 0.7);
    CHECK(st.empty());
    CHECK(st.seed_scale() == 0.7);
    const Image v = vec(1.0, -2.0, 0.5, 3.0);
    CHECK((st.apply(v) - 0.7 * v).max_abs() < 1e-15);
}

TEST_CASE("curvature safeguard rejects non-positive pairs") {
    SecantStore st(5, 1.0);
    const Image s = vec(1.0, 0.0, 0.0, 0.0);
    CHECK_FALSE(st.push(s, vec(-1.0, 0.0, 0.0, 0.0))); // <s,y> < 0
    CHECK_FALSE(st.push(s, vec(0.0, 1.0, 0.0, 0.0)));  // <s,y> = 0
    CHECK_FALSE(st.push(s, vec(std::nan(""), 0.0, 0.0, 0.0)));
    CHECK_FALSE(st.push(Image::zeros_like(s), Image::zeros_like(s)));
    CHECK(st.empty()); // rejected pairs leave the model unchanged
    CHECK(st.push(s, vec(2.0, 0.0, 0.0, 0.0)));
    CHECK(st.size() == 1);
}

TEST_CASE("single pair reproduces the closed-form bfgs update") {
    // one secant pair has an explicit H:
    //   H = (I - rho s y^T) c I (I - rho y s^T) + rho s s^T,  c = <s,y>/<y,y>
    const Image s = vec(0.4, -0.2, 0.1, 0.3);
    const Image y = vec(0.5, 0.1, -0.1, 0.2);
    SecantStore st(3, 1.0);
    REQUIRE(st.push(s, y));
    const double sy = inner(s, y), yy = inner(y, y), c = sy / yy;
    CHECK(st.seed_scale() == doctest::Approx(c));
    const Image v = vec(1.0, 2.0, -1.0, 0.5);
    const double rho = 1.0 / sy;
    const Image t = v - (rho * inner(s, v)) * y;            // (I - rho y s^T) v
    const Image ht = c * t;                                  // H0 t
    const Image hand = ht - (rho * inner(y, ht)) * s + (rho * inner(s, v)) * s;
    CHECK((st.apply(v) - hand).max_abs() < 1e-13);
}

TEST_CASE("memory evicts the oldest pair") {
    SecantStore st(2, 1.0);
    Rng r(3);
    for (int i = 0; i < 4; ++i) {
        const Image s = random_normal_image(kS, r);
        Image y = s; // <s,y> = ||s||^2 > 0
        y.axpy(0.1, random_normal_image(kS, r));
        if (inner(s, y) <= 0.0) continue;
        st.push(s, y);
    }
    CHECK(st.size() == 2);

    // a 2-pair store must differ from the 1-pair store built from the same
    // last push; eviction changed the model
    SecantStore one(1, 1.0);
    Rng r2(3);
    Image last_s = Image::zeros_like(vec(0, 0, 0, 0)), last_y = last_s;
    for (int i = 0; i < 4; ++i) {
        const Image s = random_normal_image(kS, r2);
        Image y = s;
        y.axpy(0.1, random_normal_image(kS, r2));
        if (inner(s, y) <= 0.0) continue;
        last_s = s;
        last_y = y;
    }
    one.push(last_s, last_y);
    const Image v = vec(0.3, -1.0, 0.8, 0.1);
    CHECK((st.apply(v) - one.apply(v)).max_abs() > 1e-12);
}

TEST_CASE("the implied model is symmetric positive definite") {
    SecantStore st(6, 0.9);
    Rng r(8);
    for (int i = 0; i < 6; ++i) {
        const Image s = random_normal_image(kS, r);
        Image y = s;
        y.axpy(0.3, random_normal_image(kS, r));
        if (inner(s, y) > 0.0) st.push(s, y);
    }
    REQUIRE(st.size() >= 3);
    for (int trial = 0; trial < 8; ++trial) {
        const Image a = random_normal_image(kS, r);
        const Image b = random_normal_image(kS, r);
        // symmetry through inner products
        CHECK(inner(a, st.apply(b)) == doctest::Approx(inner(b, st.apply(a))).epsilon(1e-10));
        // positive definiteness makes -H grad a descent direction
        CHECK(inner(a, st.apply(a)) > 0.0);
    }
}

TEST_CASE("clear resets to the empty-scale model") {
    SecantStore st(4, 1.3);
    const Image s = vec(1.0, 0.5, 0.0, -0.2);
    REQUIRE(st.push(s, s));
    st.clear();
    CHECK(st.empty());
    const Image v = vec(2.0, 0.0, -1.0, 1.0);
    CHECK((st.apply(v) - 1.3 * v).max_abs() < 1e-15);
}

TEST_CASE("on a quadratic the model converges to the true inverse") {
    // diagonal quadratic: grad = D x, exact inverse Hessian diag(1/d_i).
    // After n independent exact secant pairs the two-loop model reproduces
    // D^{-1} on the span of the pairs.
    const Image d = vec(0.5, 1.0, 2.0, 4.0);
    SecantStore st(8, 1.0);
    for (int i = 0; i < 4; ++i) {
        Image s(kS);
        s[i] = 1.0;
        Image y(kS);
        y[i] = d[i]; // y = D s exactly
        REQUIRE(st.push(s, y));
    }
    const Image v = vec(1.0, 1.0, 1.0, 1.0);
    const Image hv = st.apply(v);
    for (int i = 0; i < 4; ++i) CHECK(hv[i] == doctest::Approx(1.0 / d[i]).epsilon(1e-12));
}
