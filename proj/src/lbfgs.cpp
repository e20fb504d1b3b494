#include "pnpqn/lbfgs.hpp"

#include <cmath>
#include <vector>

#include "pnpqn/errors.hpp"

namespace pnpqn {

SecantStore::SecantStore(int memory, double empty_scale)
    : memory_(memory), empty_scale_(empty_scale) {
    if (memory <= 0) throw ParameterError("SecantStore: memory must be positive");
    if (!(empty_scale > 0.0)) throw ParameterError("SecantStore: empty_scale must be positive");
}

bool SecantStore::push(const Image& s, const Image& y) {
    require_same_shape(s, y, "SecantStore::push");
    const double sy = inner(s, y);
    const double yy = y.squared_norm();
    if (!(sy > 0.0) || !(yy > 0.0) || !std::isfinite(sy) || !std::isfinite(yy))
        return false;
    pairs_.push_back(Pair{s, y, 1.0 / sy, yy});
    while (pairs_.size() > static_cast<std::size_t>(memory_)) pairs_.pop_front();
    return true;
}

double SecantStore::seed_scale() const {
    if (pairs_.empty()) return empty_scale_;
    const Pair& last = pairs_.back();
    return 1.0 / (last.rho * last.yy); // <s,y>/<y,y>
}

Image SecantStore::apply(const Image& v) const {
    Image q = v;
    if (pairs_.empty()) {
        q *= empty_scale_;
        return q;
    }
    std::vector<double> a(pairs_.size());
    for (std::size_t i = pairs_.size(); i-- > 0;) {
        const Pair& p = pairs_[i];
        a[i] = p.rho * inner(p.s, q);
        q.axpy(-a[i], p.y);
    }
    q *= seed_scale();
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        const Pair& p = pairs_[i];
        const double b = p.rho * inner(p.y, q);
        q.axpy(a[i] - b, p.s);
    }
    return q;
}

} // namespace pnpqn
