#include "pnpqn/protocol.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "pnpqn/errors.hpp"

namespace pnpqn::protocol {

const uint8_t kMagic[4] = {'P', 'N', 'P', 'X'};

namespace {

// generous desk-scale caps; anything beyond is a framing error, not data
constexpr uint32_t kMaxExtent = 1u << 15;
constexpr std::size_t kMaxElems = std::size_t{1} << 26;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<uint32_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

float get_f32(const uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

void read_magic_or_throw(const ReadFn& read, const char* who) {
    uint8_t m[4];
    read(m, 4);
    if (std::memcmp(m, kMagic, 4) != 0)
        throw ProtocolError(std::string(who) + ": bad magic in frame header");
}

std::vector<float> read_f32_block(const ReadFn& read, std::size_t count) {
    std::vector<uint8_t> raw(count * 4);
    if (!raw.empty()) read(raw.data(), raw.size());
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = get_f32(raw.data() + 4 * i);
    return out;
}

} // namespace

std::vector<uint8_t> encode_request(uint8_t opcode, double sigma, const Image& img) {
    if (opcode != kOpDenoise && opcode != kOpPotential)
        throw ProtocolError("encode_request: unknown opcode " + std::to_string(opcode));
    std::vector<uint8_t> out;
    out.reserve(18 + img.size() * 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kVersion);
    out.push_back(opcode);
    put_f32(out, static_cast<float>(sigma));
    put_u32(out, static_cast<uint32_t>(img.channels()));
    put_u32(out, static_cast<uint32_t>(img.height()));
    put_u32(out, static_cast<uint32_t>(img.width()));
    for (std::size_t i = 0; i < img.size(); ++i)
        put_f32(out, static_cast<float>(img[i]));
    return out;
}

Request decode_request(const ReadFn& read) {
    read_magic_or_throw(read, "decode_request");
    uint8_t hdr[14];
    read(hdr, sizeof hdr);
    if (hdr[0] != kVersion)
        throw ProtocolError("decode_request: unsupported version " +
                            std::to_string(hdr[0]));
    Request rq;
    rq.opcode = hdr[1];
    if (rq.opcode != kOpDenoise && rq.opcode != kOpPotential)
        throw ProtocolError("decode_request: unknown opcode " +
                            std::to_string(rq.opcode));
    rq.sigma = get_f32(hdr + 2);
    const uint32_t c = get_u32(hdr + 6);
    const uint32_t h = get_u32(hdr + 10);
    uint8_t wbuf[4];
    read(wbuf, 4);
    const uint32_t w = get_u32(wbuf);
    if (c == 0 || h == 0 || w == 0 || c > kMaxExtent || h > kMaxExtent || w > kMaxExtent)
        throw ProtocolError("decode_request: dimensions out of range");
    const std::size_t n = std::size_t{c} * h * w;
    if (n > kMaxElems) throw ProtocolError("decode_request: payload too large");
    rq.shape = Shape{static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)};
    rq.payload = read_f32_block(read, n);
    return rq;
}

std::vector<uint8_t> encode_image_response(const Image& img) {
    std::vector<uint8_t> out;
    out.reserve(5 + img.size() * 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kStatusOk);
    for (std::size_t i = 0; i < img.size(); ++i)
        put_f32(out, static_cast<float>(img[i]));
    return out;
}

std::vector<uint8_t> encode_scalar_response(double value) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kStatusOk);
    put_f32(out, static_cast<float>(value));
    return out;
}

std::vector<uint8_t> encode_error_response(uint8_t status) {
    if (status == kStatusOk)
        throw ProtocolError("encode_error_response: status 0 is not an error");
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(status);
    return out;
}

Image decode_image_response(const ReadFn& read, Shape expected, const char* who) {
    read_magic_or_throw(read, who);
    uint8_t status;
    read(&status, 1);
    if (status != kStatusOk)
        throw RemoteDeclined(std::string(who) + ": remote answered status " +
                             std::to_string(status));
    const auto payload = read_f32_block(read, expected.numel());
    return image_from_payload(expected, payload);
}

double decode_scalar_response(const ReadFn& read, const char* who) {
    read_magic_or_throw(read, who);
    uint8_t status;
    read(&status, 1);
    if (status != kStatusOk)
        throw RemoteDeclined(std::string(who) + ": remote answered status " +
                             std::to_string(status));
    uint8_t buf[4];
    read(buf, 4);
    return static_cast<double>(get_f32(buf));
}

Image image_from_payload(Shape s, const std::vector<float>& payload) {
    if (payload.size() != s.numel())
        throw ProtocolError("image_from_payload: payload/shape mismatch");
    Image img(s);
    for (std::size_t i = 0; i < payload.size(); ++i)
        img[i] = static_cast<double>(payload[i]);
    return img;
}

} // namespace pnpqn::protocol
