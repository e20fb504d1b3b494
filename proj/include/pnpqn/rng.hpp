#pragma once

#include <cstdint>

namespace pnpqn {

// Deterministic RNG used everywhere randomness is needed. splitmix64 state
// walk with Marsaglia polar rejection for normals; identical streams across
// platforms and process runs for a given seed. Run metadata records
// Rng::algorithm_id next to the seed so outputs are attributable.
class Rng {
public:
    static constexpr const char* algorithm_id = "splitmix64-polar";

    explicit Rng(std::uint64_t seed) : state_(seed), seed_of_record_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double normal();

    // Independent substream; child(k) depends only on the parent seed and k,
    // not on how much the parent has been consumed.
    Rng child(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_of_record_; }

private:
    std::uint64_t state_;
    std::uint64_t seed_of_record_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace pnpqn
