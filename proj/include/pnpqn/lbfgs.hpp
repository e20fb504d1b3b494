#pragma once

#include <deque>

#include "pnpqn/image.hpp"

namespace pnpqn {

// Limited-memory inverse-Hessian model built from secant pairs (s, y).
// push() enforces the curvature safeguard <s,y> > 0; rejected pairs leave the
// model unchanged, so the implied H stays symmetric positive definite and
// -apply(grad) is always a descent direction for grad != 0.
//
// apply() is the standard two-loop recursion seeded with the scaled identity
// H0 = c I, c = <s_last, y_last> / <y_last, y_last> (empty store: c =
// empty_scale, the driver's step parameter gamma).
class SecantStore {
public:
    SecantStore(int memory, double empty_scale);

    // Returns false (and keeps the store unchanged) if <s,y> <= 0 or the
    // pair is degenerate/non-finite.
    bool push(const Image& s, const Image& y);

    // H * v via two-loop recursion over the stored pairs, newest first.
    Image apply(const Image& v) const;

    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }
    int memory() const { return memory_; }
    double seed_scale() const; // c used for H0 on the next apply()
    void clear() { pairs_.clear(); }

private:
    struct Pair {
        Image s;
        Image y;
        double rho; // 1 / <s,y>
        double yy;  // <y,y>
    };
    int memory_;
    double empty_scale_;
    std::deque<Pair> pairs_; // oldest at front
};

} // namespace pnpqn
