#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pnpqn/image.hpp"

namespace pnpqn::protocol {

inline constexpr uint8_t kVersion = 1;
inline constexpr uint8_t kOpDenoise = 1;
inline constexpr uint8_t kOpPotential = 2;
inline constexpr uint8_t kStatusOk = 0;

// "PNPX"
extern const uint8_t kMagic[4];

// Pulls exactly n bytes from the peer or throws (IoError on EOF).
using ReadFn = std::function<void(uint8_t*, std::size_t)>;

struct Request {
    uint8_t opcode = 0;
    double sigma = 0.0;
    Shape shape;
    std::vector<float> payload; // c*h*w entries, channels-first
};

// Little-endian frame:
//   magic(4) version(1) opcode(1) sigma f32 C u32 H u32 W u32 payload f32[C*H*W]
std::vector<uint8_t> encode_request(uint8_t opcode, double sigma, const Image& img);
Request decode_request(const ReadFn& read);

// Little-endian frame: magic(4) status(1) payload
std::vector<uint8_t> encode_image_response(const Image& img);
std::vector<uint8_t> encode_scalar_response(double value);
std::vector<uint8_t> encode_error_response(uint8_t status);

// Client side. Throw ProtocolError on magic mismatch and RemoteDeclined on a
// nonzero status; `who` names the operation for diagnostics.
Image decode_image_response(const ReadFn& read, Shape expected, const char* who);
double decode_scalar_response(const ReadFn& read, const char* who);

Image image_from_payload(Shape s, const std::vector<float>& payload);

} // namespace pnpqn::protocol
