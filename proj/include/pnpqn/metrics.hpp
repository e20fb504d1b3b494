#pragma once

#include "pnpqn/image.hpp"
#include "pnpqn/rng.hpp"

namespace pnpqn {

double mse(const Image& a, const Image& b);

// Peak signal-to-noise ratio with peak 1.0 (images live in [0,1]).
// Returns +inf when the images are identical.
double psnr(const Image& a, const Image& b);

// Returns x + sigma * n with n ~ N(0, I) drawn from `rng`. sigma is on the
// internal [0,1] intensity scale (raw 0..255 levels are divided by 255 by the
// harness before reaching here). sigma must be >= 0.
Image add_gaussian_noise(const Image& x, double sigma, Rng& rng);

// Image with i.i.d. N(0,1) entries (test helper and power-iteration seed).
Image random_normal_image(Shape s, Rng& rng);

// Image with i.i.d. U[0,1) entries.
Image random_uniform_image(Shape s, Rng& rng);

} // namespace pnpqn
