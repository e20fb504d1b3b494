#include "pnpqn/rng.hpp"

#include <cmath>

namespace pnpqn {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Marsaglia polar method; rejection keeps (u,v) strictly inside the unit
    // disc and away from the origin so the log is finite.
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

Rng Rng::child(std::uint64_t stream) const {
    // One extra splitmix scramble of (seed, stream) so siblings do not share
    // prefixes of the parent walk.
    std::uint64_t z = seed_of_record_ + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
}

} // namespace pnpqn
