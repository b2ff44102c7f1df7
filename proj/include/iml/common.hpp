#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace iml {

/// Error with a stable machine-readable code ("SymmetryViolation",
/// "TooLarge", ...) next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& what) {
    throw Error(code, what);
}

/// Extended real value: either finite or +infinity. Rate functions return
/// this instead of a sentinel float.
class ExtendedReal {
public:
    static ExtendedReal finite(double v) { return ExtendedReal(v, false); }
    static ExtendedReal infinity() { return ExtendedReal(0.0, true); }

    bool is_finite() const noexcept { return !infinite_; }
    bool is_infinite() const noexcept { return infinite_; }

    double value() const {
        if (infinite_) fail("InfiniteValue", "extended real is +infinity");
        return value_;
    }

    /// For printing/serialization only.
    double value_or_inf() const noexcept {
        return infinite_ ? std::numeric_limits<double>::infinity() : value_;
    }

private:
    ExtendedReal(double v, bool inf) : value_(v), infinite_(inf) {}
    double value_;
    bool infinite_;
};

} // namespace iml
