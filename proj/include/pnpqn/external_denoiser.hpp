#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pnpqn/regularizer.hpp"

namespace pnpqn {

// Byte pipe to a denoiser server; framing lives in protocol.*. Implementations
// must send/receive exact byte counts and throw IoError on transport failure.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send_all(const uint8_t* data, std::size_t n) = 0;
    virtual void recv_all(uint8_t* out, std::size_t n) = 0;
    virtual std::string describe() const = 0;
};

// Spawns `argv` as a child process and frames over its stdin/stdout.
std::unique_ptr<Transport> spawn_process_transport(const std::vector<std::string>& argv);
// Connects to a listening server.
std::unique_ptr<Transport> connect_tcp_transport(const std::string& host, int port);

// Splits a command line on whitespace, honoring single and double quotes.
std::vector<std::string> split_command(const std::string& cmd);

// Remote gradient-step denoiser D = I - grad(g_sigma) behind the wire
// protocol. Relaxation is applied client-side: prox_step returns
// (1-alpha) v + alpha D(v). The envelope term is alpha g_sigma(v) / gamma via
// the potential opcode; servers may decline that opcode (RemoteDeclined), in
// which case callers fall back to identity-based objective bookkeeping.
// lipschitz is the configured bound on grad(g_sigma), required in (0,1).
class ExternalDenoiser final : public Regularizer {
public:
    ExternalDenoiser(std::unique_ptr<Transport> transport, double alpha,
                     double sigma_d, double lipschitz);

    Image prox_step(const Image& v, double gamma) const override;
    double envelope_term(const Image& v, double gamma) const override;
    double weak_convexity(double gamma) const override;
    bool smooth() const override { return true; }
    bool supports_strength() const override { return true; }
    Image prox_step_at_strength(const Image& v, double gamma,
                                double strength) const override;
    std::string describe() const override;

    double alpha() const { return alpha_; }
    double sigma_d() const { return sigma_d_; }

    // Unrelaxed remote application (handshake checks, tests).
    Image raw_denoise(const Image& v, double sigma) const;
    double raw_potential(const Image& v, double sigma) const;

private:
    Image relaxed_denoise(const Image& v, double sigma) const;
    Transport& live_transport() const;
    template <typename Fn> auto guarded(Fn&& fn) const;

    mutable std::unique_ptr<Transport> transport_; // requests are serialized
    double alpha_;
    double sigma_d_;
    double lipschitz_;
};

} // namespace pnpqn
