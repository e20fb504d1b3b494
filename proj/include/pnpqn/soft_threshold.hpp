#pragma once

#include "pnpqn/regularizer.hpp"

namespace pnpqn {

// g(u) = tau ||u||_1. Convex (weak-convexity modulus 0); prox is entrywise
// soft thresholding at gamma*tau and the Moreau envelope is the Huber sum.
// This is the regularizer with a genuine gamma-scaled prox family, so it is
// the one used to exercise step-size backtracking end to end.
class SoftThreshold final : public Regularizer {
public:
    explicit SoftThreshold(double tau);

    Image prox_step(const Image& v, double gamma) const override;
    double envelope_term(const Image& v, double gamma) const override;
    std::optional<double> reg_value(const Image& u, double gamma) const override;
    double weak_convexity(double gamma) const override {
        (void)gamma;
        return 0.0;
    }
    bool smooth() const override { return false; }
    std::string describe() const override;

    double tau() const { return tau_; }

private:
    double tau_;
};

} // namespace pnpqn
