#include "pnpqn/external_denoiser.hpp"

#include <cerrno>
#include <cmath>
#include <cstring>
#include <utility>

#include <fcntl.h>
#include <netdb.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "pnpqn/errors.hpp"
#include "pnpqn/protocol.hpp"

namespace pnpqn {

namespace {

// A peer that died must surface as EPIPE -> IoError from write(), not as a
// process-killing SIGPIPE. Installed once, before the first transport opens.
void ignore_sigpipe() {
    static const int installed = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return 0;
    }();
    (void)installed;
}

void write_fd_all(int fd, const uint8_t* data, std::size_t n, const char* who) {
    while (n > 0) {
        const ssize_t k = ::write(fd, data, n);
        if (k < 0) {
            if (errno == EINTR) continue;
            throw IoError(std::string(who) + ": write failed: " + std::strerror(errno));
        }
        data += k;
        n -= static_cast<std::size_t>(k);
    }
}

void read_fd_all(int fd, uint8_t* out, std::size_t n, const char* who) {
    while (n > 0) {
        const ssize_t k = ::read(fd, out, n);
        if (k < 0) {
            if (errno == EINTR) continue;
            throw IoError(std::string(who) + ": read failed: " + std::strerror(errno));
        }
        if (k == 0)
            throw IoError(std::string(who) + ": peer closed the connection mid-frame");
        out += k;
        n -= static_cast<std::size_t>(k);
    }
}

class ProcessTransport final : public Transport {
public:
    explicit ProcessTransport(const std::vector<std::string>& argv) {
        if (argv.empty()) throw ParameterError("spawn_process_transport: empty command");
        ignore_sigpipe();
        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0)
            throw IoError("spawn_process_transport: pipe: " +
                          std::string(std::strerror(errno)));
        if (::pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw IoError("spawn_process_transport: pipe: " +
                          std::string(std::strerror(errno)));
        }
        pid_ = ::fork();
        if (pid_ < 0) {
            for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]})
                ::close(fd);
            throw IoError("spawn_process_transport: fork: " +
                          std::string(std::strerror(errno)));
        }
        if (pid_ == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]})
                ::close(fd);
            std::vector<char*> args;
            args.reserve(argv.size() + 1);
            for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
            args.push_back(nullptr);
            ::execvp(args[0], args.data());
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        wfd_ = to_child[1];
        rfd_ = from_child[0];
        name_ = "process:" + argv[0];
    }

    ~ProcessTransport() override {
        close_fds();
        if (pid_ > 0) {
            // give the child a moment to exit on EOF, then insist
            for (int i = 0; i < 200; ++i) {
                int status = 0;
                const pid_t r = ::waitpid(pid_, &status, WNOHANG);
                if (r == pid_ || r < 0) return;
                ::usleep(10 * 1000);
            }
            ::kill(pid_, SIGKILL);
            int status = 0;
            ::waitpid(pid_, &status, 0);
        }
    }

    void send_all(const uint8_t* data, std::size_t n) override {
        if (wfd_ < 0) throw IoError(name_ + ": transport is closed");
        write_fd_all(wfd_, data, n, name_.c_str());
    }

    void recv_all(uint8_t* out, std::size_t n) override {
        if (rfd_ < 0) throw IoError(name_ + ": transport is closed");
        read_fd_all(rfd_, out, n, name_.c_str());
    }

    std::string describe() const override { return name_; }

private:
    void close_fds() {
        if (wfd_ >= 0) ::close(wfd_);
        if (rfd_ >= 0) ::close(rfd_);
        wfd_ = rfd_ = -1;
    }

    pid_t pid_ = -1;
    int wfd_ = -1;
    int rfd_ = -1;
    std::string name_;
};

class TcpTransport final : public Transport {
public:
    TcpTransport(const std::string& host, int port) {
        if (port <= 0 || port > 65535)
            throw ParameterError("connect_tcp_transport: port out of range");
        ignore_sigpipe();
        name_ = "tcp:" + host + ":" + std::to_string(port);
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        const int rc =
            ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
        if (rc != 0)
            throw IoError(name_ + ": resolve failed: " + gai_strerror(rc));
        int last_errno = 0;
        for (addrinfo* ai = res; ai; ai = ai->ai_next) {
            fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd_ < 0) {
                last_errno = errno;
                continue;
            }
            if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
            last_errno = errno;
            ::close(fd_);
            fd_ = -1;
        }
        ::freeaddrinfo(res);
        if (fd_ < 0)
            throw IoError(name_ + ": connect failed: " +
                          std::string(std::strerror(last_errno)));
    }

    ~TcpTransport() override {
        if (fd_ >= 0) ::close(fd_);
    }

    void send_all(const uint8_t* data, std::size_t n) override {
        write_fd_all(fd_, data, n, name_.c_str());
    }

    void recv_all(uint8_t* out, std::size_t n) override {
        read_fd_all(fd_, out, n, name_.c_str());
    }

    std::string describe() const override { return name_; }

private:
    int fd_ = -1;
    std::string name_;
};

} // namespace

std::unique_ptr<Transport> spawn_process_transport(const std::vector<std::string>& argv) {
    return std::make_unique<ProcessTransport>(argv);
}

std::unique_ptr<Transport> connect_tcp_transport(const std::string& host, int port) {
    return std::make_unique<TcpTransport>(host, port);
}

std::vector<std::string> split_command(const std::string& cmd) {
    std::vector<std::string> out;
    std::string cur;
    bool in_token = false;
    char quote = 0;
    for (char ch : cmd) {
        if (quote != 0) {
            if (ch == quote)
                quote = 0;
            else
                cur.push_back(ch);
            continue;
        }
        if (ch == '\'' || ch == '"') {
            quote = ch;
            in_token = true;
            continue;
        }
        if (ch == ' ' || ch == '\t' || ch == '\n') {
            if (in_token) {
                out.push_back(cur);
                cur.clear();
                in_token = false;
            }
            continue;
        }
        cur.push_back(ch);
        in_token = true;
    }
    if (quote != 0) throw ParameterError("split_command: unterminated quote");
    if (in_token) out.push_back(cur);
    return out;
}

ExternalDenoiser::ExternalDenoiser(std::unique_ptr<Transport> transport, double alpha,
                                   double sigma_d, double lipschitz)
    : transport_(std::move(transport)),
      alpha_(alpha),
      sigma_d_(sigma_d),
      lipschitz_(lipschitz) {
    if (!transport_) throw ParameterError("ExternalDenoiser: null transport");
    if (!(alpha_ > 0.0 && alpha_ <= 1.0))
        throw ParameterError("ExternalDenoiser: alpha outside (0,1]");
    if (!(sigma_d_ >= 0.0)) throw ParameterError("ExternalDenoiser: sigma_d < 0");
    if (!(lipschitz_ > 0.0 && lipschitz_ < 1.0))
        throw ParameterError(
            "ExternalDenoiser: configured gradient Lipschitz bound must lie in (0,1)");
}

Transport& ExternalDenoiser::live_transport() const {
    if (!transport_)
        throw IoError("ExternalDenoiser: connection was closed after a framing error");
    return *transport_;
}

// After a framing error the stream offset is unknowable, so the connection is
// dropped rather than resynchronized.
template <typename Fn>
auto ExternalDenoiser::guarded(Fn&& fn) const {
    try {
        return fn();
    } catch (const ProtocolError&) {
        transport_.reset();
        throw;
    } catch (const IoError&) {
        transport_.reset();
        throw;
    }
}

Image ExternalDenoiser::raw_denoise(const Image& v, double sigma) const {
    return guarded([&] {
        Transport& tr = live_transport();
        const auto frame = protocol::encode_request(protocol::kOpDenoise, sigma, v);
        tr.send_all(frame.data(), frame.size());
        protocol::ReadFn read = [&tr](uint8_t* out, std::size_t n) {
            tr.recv_all(out, n);
        };
        Image d = protocol::decode_image_response(read, v.shape(), "denoise");
        d.require_finite("remote denoiser output");
        return d;
    });
}

double ExternalDenoiser::raw_potential(const Image& v, double sigma) const {
    return guarded([&] {
        Transport& tr = live_transport();
        const auto frame = protocol::encode_request(protocol::kOpPotential, sigma, v);
        tr.send_all(frame.data(), frame.size());
        protocol::ReadFn read = [&tr](uint8_t* out, std::size_t n) {
            tr.recv_all(out, n);
        };
        const double g = protocol::decode_scalar_response(read, "potential");
        if (!std::isfinite(g))
            throw NumericalError("remote potential returned a non-finite value");
        return g;
    });
}

Image ExternalDenoiser::relaxed_denoise(const Image& v, double sigma) const {
    Image d = raw_denoise(v, sigma);
    if (alpha_ == 1.0) return d;
    // (1-alpha) v + alpha D(v)
    d *= alpha_;
    d.axpy(1.0 - alpha_, v);
    return d;
}

Image ExternalDenoiser::prox_step(const Image& v, double gamma) const {
    if (!(gamma > 0.0)) throw ParameterError("ExternalDenoiser::prox_step: gamma <= 0");
    return relaxed_denoise(v, sigma_d_);
}

Image ExternalDenoiser::prox_step_at_strength(const Image& v, double gamma,
                                              double strength) const {
    if (!(gamma > 0.0))
        throw ParameterError("ExternalDenoiser::prox_step_at_strength: gamma <= 0");
    if (!(strength >= 0.0))
        throw ParameterError("ExternalDenoiser::prox_step_at_strength: strength < 0");
    return relaxed_denoise(v, strength);
}

double ExternalDenoiser::envelope_term(const Image& v, double gamma) const {
    if (!(gamma > 0.0))
        throw ParameterError("ExternalDenoiser::envelope_term: gamma <= 0");
    return alpha_ * raw_potential(v, sigma_d_) / gamma;
}

double ExternalDenoiser::weak_convexity(double gamma) const {
    if (!(gamma > 0.0))
        throw ParameterError("ExternalDenoiser::weak_convexity: gamma <= 0");
    const double c = alpha_ * lipschitz_;
    return c / ((c + 1.0) * gamma);
}

std::string ExternalDenoiser::describe() const {
    const std::string where = transport_ ? transport_->describe() : "closed";
    return "external(" + where + ", alpha=" + std::to_string(alpha_) +
           ", sigma_d=" + std::to_string(sigma_d_) + ")";
}

} // namespace pnpqn
