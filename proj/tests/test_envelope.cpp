#include "doctest.h"

#include <cmath>
#include <memory>

#include "pnpqn/envelope.hpp"
#include "pnpqn/grad_step.hpp"
#include "pnpqn/metrics.hpp"
#include "pnpqn/soft_threshold.hpp"

using namespace pnpqn;

namespace {

struct Setup {
    std::shared_ptr<Fidelity> fid;
    std::shared_ptr<Regularizer> reg;
    Image x;
};

Setup smooth_setup() {
    const Shape s{1, 6, 6};
    auto op = std::make_shared<CircularConvOp>(s, gaussian_kernel(3, 0.8), 0.9);
    Rng r(41);
    Setup st;
    st.fid = std::make_shared<Fidelity>(op, random_uniform_image(s, r), 1.2);
    st.reg = std::make_shared<CosineGradStep>(0.03, 4.0, 0.9);
    st.x = random_normal_image(s, r);
    return st;
}

} // namespace

TEST_CASE("evaluate assembles the envelope from its definition") {
    Setup su = smooth_setup();
    EnvelopeEngine eng(*su.fid, *su.reg);
    const double gamma = 0.8;
    const EnvelopeState st = eng.evaluate(su.x, gamma);

    CHECK(st.gamma == gamma);
    CHECK(st.f_x == doctest::Approx(su.fid->value(su.x)).epsilon(1e-13));
    const Image fbs_hand = su.x - gamma * su.fid->grad(su.x);
    CHECK((st.fbs - fbs_hand).max_abs() < 1e-12);
    CHECK((st.T - su.reg->prox_step(st.fbs, gamma)).max_abs() == 0.0);
    CHECK(st.env == doctest::Approx(su.reg->envelope_term(st.fbs, gamma)));
    const double phi_hand =
        st.f_x - 0.5 * gamma * su.fid->grad(su.x).squared_norm() + st.env;
    CHECK(st.phi_gamma == doctest::Approx(phi_hand).epsilon(1e-12));

    // residual mapping and the exact reconstruction x = T + gamma R
    CHECK(st.r_norm == doctest::Approx(st.R.norm()));
    const Image recon = st.T + gamma * st.R;
    CHECK((recon - su.x).max_abs() < 1e-12);
}

TEST_CASE("partial evaluation upgrades to the full state") {
    Setup su = smooth_setup();
    EnvelopeEngine eng(*su.fid, *su.reg);
    const PartialEval pe = eng.evaluate_partial(su.x, 0.7);
    const EnvelopeState full = eng.complete(pe);
    const EnvelopeState direct = eng.evaluate(su.x, 0.7);
    CHECK(full.phi_gamma == doctest::Approx(direct.phi_gamma).epsilon(1e-14));
    CHECK((full.T - direct.T).max_abs() == 0.0);
    CHECK((full.R - direct.R).max_abs() == 0.0);
    CHECK(pe.phi_gamma == doctest::Approx(direct.phi_gamma).epsilon(1e-14));
}

TEST_CASE("oracle counters match the documented cost vector") {
    Setup su = smooth_setup();
    EnvelopeEngine eng(*su.fid, *su.reg);

    const CallCounters c0 = eng.counters();
    (void)eng.evaluate(su.x, 0.8);
    CallCounters d = eng.counters() - c0;
    CHECK(d == CallCounters{1, 1, 1, 0, 0, 0});

    const CallCounters c1 = eng.counters();
    const PartialEval pe = eng.evaluate_partial(su.x, 0.8);
    d = eng.counters() - c1;
    CHECK(d == CallCounters{1, 0, 1, 0, 0, 0});

    const CallCounters c2 = eng.counters();
    const EnvelopeState st = eng.complete(pe);
    d = eng.counters() - c2;
    CHECK(d == CallCounters{0, 1, 0, 0, 0, 0});

    const CallCounters c3 = eng.counters();
    (void)eng.grad_phi_gamma(st);
    d = eng.counters() - c3;
    CHECK(d == CallCounters{0, 0, 0, 1, 0, 0});

    eng.reset_counters();
    CHECK(eng.counters() == CallCounters{});
}

TEST_CASE("envelope gradient matches finite differences of phi_gamma") {
    Setup su = smooth_setup();
    EnvelopeEngine eng(*su.fid, *su.reg);
    const double gamma = 0.6;
    const EnvelopeState st = eng.evaluate(su.x, gamma);
    const Image g = eng.grad_phi_gamma(st);
    const double h = 1e-6;
    for (std::size_t k : {std::size_t{0}, std::size_t{11}, std::size_t{30}}) {
        Image xp = su.x, xm = su.x;
        xp[k] += h;
        xm[k] -= h;
        const double fd = (eng.evaluate(xp, gamma).phi_gamma -
                           eng.evaluate(xm, gamma).phi_gamma) /
                          (2.0 * h);
        CHECK(std::fabs(g[k] - fd) < 5e-6 * (1.0 + std::fabs(g[k])));
    }
}

TEST_CASE("phi at the prox output agrees with the direct evaluation") {
    Setup su = smooth_setup();
    EnvelopeEngine eng(*su.fid, *su.reg);
    eng.set_cross_check(true); // identity is re-verified internally
    const EnvelopeState st = eng.evaluate(su.x, 0.8);
    const double f_T = su.fid->value(st.T);
    const double phi_T = eng.phi_at_prox_output(st, f_T);
    const auto direct = eng.phi_via_value(st.T, 0.8);
    REQUIRE(direct.has_value());
    CHECK(phi_T == doctest::Approx(*direct).epsilon(1e-10));
}

TEST_CASE("step admissibility gate") {
    Setup su = smooth_setup();
    EnvelopeEngine eng(*su.fid, *su.reg);
    const double beta = 0.01;
    const double cap = eng.gamma_smooth_cap(beta);
    CHECK(cap == doctest::Approx((1.0 - beta) / su.fid->lipschitz()));
    CHECK(eng.gamma_admissible(0.9 * cap, beta));
    CHECK_FALSE(eng.gamma_admissible(1.01 * cap, beta));
    CHECK_FALSE(eng.gamma_admissible(0.0, beta));
    CHECK_FALSE(eng.gamma_admissible(-0.5, beta));
}

TEST_CASE("weak-convexity branch of the gate binds for the denoiser family") {
    // gamma M(gamma) for a gradient-step denoiser is constant c/(c+1) < 1,
    // so the smooth cap is the only active constraint there; exercise the
    // 1/M branch with an artificially tight fidelity instead
    const Shape s{1, 3, 3};
    auto op = std::make_shared<IdentityOp>(s);
    const Fidelity fid(op, Image(s, 0.1), 1e-6); // nearly flat smooth part
    const CosineGradStep reg(0.09, 3.0, 1.0);    // c = 0.81
    EnvelopeEngine eng(fid, reg);
    // both branches generous at small gamma
    CHECK(eng.gamma_admissible(1.0, 0.01));
    CHECK(eng.gamma_admissible(1e5, 0.01));
    CHECK_FALSE(eng.gamma_admissible(1e7, 0.01)); // smooth cap finally binds
}

TEST_CASE("counted fidelity helpers tally their oracles") {
    Setup su = smooth_setup();
    EnvelopeEngine eng(*su.fid, *su.reg);
    const CallCounters c0 = eng.counters();
    (void)eng.f_value(su.x);
    (void)eng.prox_f(su.x, 0.4);
    (void)eng.f_grad(su.x);
    Image g;
    (void)eng.f_value_and_grad(su.x, g);
    (void)eng.prox_step(su.x, 0.8);
    (void)eng.envelope_term(su.x, 0.8);
    const CallCounters d = eng.counters() - c0;
    CHECK(d.f_value == 1);
    CHECK(d.prox_f == 1);
    CHECK(d.gradient == 2); // plain grad + fused value-and-grad
    CHECK(d.prox == 1);
    CHECK(d.potential == 1);
}
