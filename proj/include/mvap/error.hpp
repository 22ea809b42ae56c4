#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvap {

enum class Errc {
    InvalidParameter,
    ZeroRate,
    EmptyMvdSet,
    EmptyUserSet,
    NonStochasticRow,
    ShapeMismatch,
    InvalidAction,
    NonFiniteInput,
    EmptyBatch,
    ConfigError,
    IoError,
};

constexpr std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::InvalidParameter: return "InvalidParameter";
        case Errc::ZeroRate: return "ZeroRate";
        case Errc::EmptyMvdSet: return "EmptyMvdSet";
        case Errc::EmptyUserSet: return "EmptyUserSet";
        case Errc::NonStochasticRow: return "NonStochasticRow";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::InvalidAction: return "InvalidAction";
        case Errc::NonFiniteInput: return "NonFiniteInput";
        case Errc::EmptyBatch: return "EmptyBatch";
        case Errc::ConfigError: return "ConfigError";
        case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
    if (!ok) fail(code, what);
}

}  // namespace mvap
