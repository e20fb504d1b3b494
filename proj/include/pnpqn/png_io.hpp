#pragma once

#include <string>

#include "pnpqn/image.hpp"

namespace pnpqn {

// Decodes an 8- or 16-bit PNG (gray, gray+alpha, RGB, RGBA, palette) into a
// 1- or 3-channel [0,1] image; alpha is dropped. Throws IoError on anything
// unreadable.
Image load_png(const std::string& path);

// Encodes as 8-bit PNG (gray for 1 channel, RGB for 3), clamping to [0,1] and
// rounding. Clamping happens only here, never inside iterations.
void save_png(const std::string& path, const Image& img);

} // namespace pnpqn
