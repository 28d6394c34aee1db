#pragma once

#include <stdexcept>
#include <string>

namespace volterra {

/// Raised when a factorization or optimization fails for numerical reasons.
/// The message carries the diagnostics collected up to the failure.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace volterra
