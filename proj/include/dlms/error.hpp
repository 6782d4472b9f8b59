#pragma once

#include <stdexcept>
#include <string>

namespace dlms {

/// Bad input: malformed matrices, out-of-range parameters, bad config.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The second-moment recursion does not converge for this configuration.
class UnstableError : public std::runtime_error {
public:
    UnstableError(const std::string& what, double spectral_radius)
        : std::runtime_error(what), spectral_radius_(spectral_radius) {}

    double spectral_radius() const noexcept { return spectral_radius_; }

private:
    double spectral_radius_;
};

}  // namespace dlms
