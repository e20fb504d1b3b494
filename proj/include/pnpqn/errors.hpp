#pragma once

#include <stdexcept>
#include <string>

namespace pnpqn {

// Error taxonomy used across the library. Every throw site picks the most
// specific class; callers that only care about "something went wrong" can
// catch Error.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/axis mismatches between images, kernels and operators.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// A parameter outside its admissible range (gamma gates, negative sigma, ...).
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& msg) : Error(msg) {}
};

// Numerical breakdown: non-finite values, iterative solver stagnation.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// File system / pipe / socket failures.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Malformed frames on the external-denoiser wire protocol.
class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& msg) : Error(msg) {}
};

// The remote denoiser answered with a non-zero status for a request that was
// otherwise well formed (e.g. it does not implement potential evaluation).
class RemoteDeclined : public Error {
public:
    explicit RemoteDeclined(const std::string& msg) : Error(msg) {}
};

} // namespace pnpqn
