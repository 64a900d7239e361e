#pragma once

#include <stdexcept>
#include <string>

namespace hapticforge {

/// Base exception for every domain failure. `code()` is a stable,
/// machine-parsable identifier such as "OutOfRangeValue" or "WrongPhase".
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

} // namespace hapticforge
