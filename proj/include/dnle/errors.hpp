#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace dnle {

// Base of every error raised by the library. `kind()` is a stable machine-readable tag
// that the command-line front end copies into its error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& what) : Error("InvalidArgument", what) {}
};

struct RegimeError : Error {
    explicit RegimeError(const std::string& what) : Error("RegimeError", what) {}
};

struct NonConvergence : Error {
    explicit NonConvergence(const std::string& what) : Error("NonConvergence", what) {}
};

struct NoCrossing : Error {
    explicit NoCrossing(const std::string& what) : Error("NoCrossing", what) {}
};

struct IntegrationFailure : Error {
    explicit IntegrationFailure(const std::string& what) : Error("IntegrationFailure", what) {}
};

struct Infeasible : Error {
    explicit Infeasible(const std::string& what) : Error("Infeasible", what) {}
};

struct EmptyRegion : Error {
    explicit EmptyRegion(const std::string& what) : Error("EmptyRegion", what) {}
};

struct NotConverged : Error {
    explicit NotConverged(const std::string& what) : Error("NotConverged", what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
};

/// Compact %g formatting for error messages.
inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

#define DNLE_REQUIRE(cond, ExceptionType, message) \
    do {                                           \
        if (!(cond)) throw ExceptionType(message); \
    } while (false)

}  // namespace dnle
