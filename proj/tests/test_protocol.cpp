#include "doctest.h"

#include <cstring>

#include "pnpqn/errors.hpp"
#include "pnpqn/external_denoiser.hpp"
#include "pnpqn/protocol.hpp"

using namespace pnpqn;
using namespace pnpqn::protocol;

namespace {

ReadFn reader_over(const std::vector<uint8_t>& buf, std::size_t& pos) {
    return [&buf, &pos](uint8_t* out, std::size_t n) {
        if (pos + n > buf.size()) throw IoError("short read");
        std::memcpy(out, buf.data() + pos, n);
        pos += n;
    };
}

Image tiny_image() {
    Image img(2, 2, 3);
    for (std::size_t k = 0; k < img.size(); ++k)
        img[k] = 0.25 * static_cast<double>(k) - 0.5;
    return img;
}

} // namespace

TEST_CASE("request frame layout is little-endian and fixed") {
    const Image img = tiny_image();
    const std::vector<uint8_t> frame = encode_request(kOpDenoise, 0.5, img);
    REQUIRE(frame.size() == 4 + 1 + 1 + 4 + 12 + 4 * img.size());
    CHECK(std::memcmp(frame.data(), kMagic, 4) == 0);
    CHECK(frame[0] == 'P');
    CHECK(frame[3] == 'X');
    CHECK(frame[4] == kVersion);
    CHECK(frame[5] == kOpDenoise);
    float sig = 0.0f;
    std::memcpy(&sig, frame.data() + 6, 4);
    CHECK(sig == 0.5f);
    uint32_t c = 0, h = 0, w = 0;
    std::memcpy(&c, frame.data() + 10, 4);
    std::memcpy(&h, frame.data() + 14, 4);
    std::memcpy(&w, frame.data() + 18, 4);
    CHECK(c == 2);
    CHECK(h == 2);
    CHECK(w == 3);
    float first = 0.0f;
    std::memcpy(&first, frame.data() + 22, 4);
    CHECK(first == -0.5f);
}

TEST_CASE("request decode inverts encode") {
    const Image img = tiny_image();
    const std::vector<uint8_t> frame = encode_request(kOpPotential, 1.25, img);
    std::size_t pos = 0;
    const Request req = decode_request(reader_over(frame, pos));
    CHECK(pos == frame.size());
    CHECK(req.opcode == kOpPotential);
    CHECK(req.sigma == 1.25); // exactly representable through f32
    CHECK(req.shape == img.shape());
    const Image back = image_from_payload(req.shape, req.payload);
    for (std::size_t k = 0; k < img.size(); ++k)
        CHECK(back[k] == static_cast<double>(static_cast<float>(img[k])));
}

TEST_CASE("payload ordering is channels-first row-major") {
    Image img(2, 2, 2, 0.0);
    img(1, 0, 1) = 7.0;
    const std::vector<uint8_t> frame = encode_request(kOpDenoise, 0.0, img);
    std::size_t pos = 0;
    const Request req = decode_request(reader_over(frame, pos));
    CHECK(req.payload[4 + 1] == 7.0f); // channel 1 plane starts at index 4
}

TEST_CASE("image response round trips and checks status") {
    const Image img = tiny_image();
    const std::vector<uint8_t> ok = encode_image_response(img);
    std::size_t pos = 0;
    const Image back = decode_image_response(reader_over(ok, pos), img.shape(), "t");
    for (std::size_t k = 0; k < img.size(); ++k)
        CHECK(back[k] == static_cast<double>(static_cast<float>(img[k])));

    const std::vector<uint8_t> err = encode_error_response(3);
    pos = 0;
    CHECK_THROWS_AS(
        (void)decode_image_response(reader_over(err, pos), img.shape(), "t"),
        RemoteDeclined);

    std::vector<uint8_t> bad = ok;
    bad[1] = 'Q';
    pos = 0;
    CHECK_THROWS_AS(
        (void)decode_image_response(reader_over(bad, pos), img.shape(), "t"),
        ProtocolError);

    std::vector<uint8_t> cut(ok.begin(), ok.begin() + 9); // payload truncated
    pos = 0;
    CHECK_THROWS_AS(
        (void)decode_image_response(reader_over(cut, pos), img.shape(), "t"),
        IoError);
}

TEST_CASE("scalar response round trips") {
    const std::vector<uint8_t> frame = encode_scalar_response(-2.75);
    std::size_t pos = 0;
    CHECK(decode_scalar_response(reader_over(frame, pos), "t") == -2.75);
}

TEST_CASE("command splitting honors quotes") {
    const auto parts = split_command("python3 'my script.py' --flag \"a b\" plain");
    REQUIRE(parts.size() == 5);
    CHECK(parts[0] == "python3");
    CHECK(parts[1] == "my script.py");
    CHECK(parts[2] == "--flag");
    CHECK(parts[3] == "a b");
    CHECK(parts[4] == "plain");
    CHECK(split_command("   ").empty());
    CHECK_THROWS_AS(split_command("broken 'quote"), ParameterError);
}

TEST_CASE("process transport moves exact byte counts") {
    // cat echoes our request frame back; read it as a request again
    auto tr = spawn_process_transport({"/bin/cat"});
    const Image img = tiny_image();
    const std::vector<uint8_t> frame = encode_request(kOpDenoise, 0.25, img);
    tr->send_all(frame.data(), frame.size());
    std::vector<uint8_t> echoed(frame.size());
    tr->recv_all(echoed.data(), echoed.size());
    CHECK(echoed == frame);
}

TEST_CASE("spawning a missing binary reports an io failure") {
    CHECK_THROWS_AS(
        [] {
            auto tr = spawn_process_transport({"/no/such/binary_xyz"});
            uint8_t b = 0;
            tr->send_all(&b, 1);
            tr->recv_all(&b, 1); // child is dead, the pipe must fail
        }(),
        IoError);
}
