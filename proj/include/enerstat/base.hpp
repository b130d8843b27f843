// Core scalar types, ids and the error hierarchy shared by every module.
#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace enerstat {

// All energy in the system is integer micro-energy units (uE). No fractional
// energy ever exists, so conservation is checked with equality, not tolerance.
using Energy = std::int64_t;

using KindId = std::int32_t;      // catalog index, birth order
using InstanceId = std::int32_t;  // 1-based; 0 is the environment account
using LoopId = std::int32_t;
using ChannelId = std::int32_t;
using Step = std::int64_t;

inline constexpr InstanceId kEnvAccount = 0;

enum class Errc {
    InsufficientBalance,
    UnknownAccount,
    UnknownNodeKind,
    SyntaxError,
    DepthLimitExceeded,
    EnergyShortfall,
    RefOutsideNiche,
    ConservationViolation,
    EmptyLoop,
    UnknownKind,
    UnknownInstance,
    DensityTooLow,
    IndexBeyondNext,
    GenerationExhausted,
    ProviderUnavailable,
    EmptyPolicy,
    EmptyWindow,
    DegenerateDisturbance,
    SeverUndefined,
    LengthMismatch,
    ZeroVarianceObserved,
    SchemaError,
    DslError,
    MissingFile,
    IoError,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::InsufficientBalance: return "InsufficientBalance";
        case Errc::UnknownAccount: return "UnknownAccount";
        case Errc::UnknownNodeKind: return "UnknownNodeKind";
        case Errc::SyntaxError: return "SyntaxError";
        case Errc::DepthLimitExceeded: return "DepthLimitExceeded";
        case Errc::EnergyShortfall: return "EnergyShortfall";
        case Errc::RefOutsideNiche: return "RefOutsideNiche";
        case Errc::ConservationViolation: return "ConservationViolation";
        case Errc::EmptyLoop: return "EmptyLoop";
        case Errc::UnknownKind: return "UnknownKind";
        case Errc::UnknownInstance: return "UnknownInstance";
        case Errc::DensityTooLow: return "DensityTooLow";
        case Errc::IndexBeyondNext: return "IndexBeyondNext";
        case Errc::GenerationExhausted: return "GenerationExhausted";
        case Errc::ProviderUnavailable: return "ProviderUnavailable";
        case Errc::EmptyPolicy: return "EmptyPolicy";
        case Errc::EmptyWindow: return "EmptyWindow";
        case Errc::DegenerateDisturbance: return "DegenerateDisturbance";
        case Errc::SeverUndefined: return "SeverUndefined";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::ZeroVarianceObserved: return "ZeroVarianceObserved";
        case Errc::SchemaError: return "SchemaError";
        case Errc::DslError: return "DslError";
        case Errc::MissingFile: return "MissingFile";
        case Errc::IoError: return "IoError";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

// ceil(a / b) for a >= 0, b >= 1. Costs round against the mover so rounding
// can never mint energy.
inline Energy ceil_div(Energy a, Energy b) {
    return (a + b - 1) / b;
}

// Saturating int64 arithmetic used by the DSL evaluator (documented wrap-free
// semantics; overflow clamps to the representable range).
inline std::int64_t sat_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r))
        return b > 0 ? std::numeric_limits<std::int64_t>::max()
                     : std::numeric_limits<std::int64_t>::min();
    return r;
}

inline std::int64_t sat_sub(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_sub_overflow(a, b, &r))
        return b < 0 ? std::numeric_limits<std::int64_t>::max()
                     : std::numeric_limits<std::int64_t>::min();
    return r;
}

inline std::int64_t sat_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r))
        return ((a > 0) == (b > 0)) ? std::numeric_limits<std::int64_t>::max()
                                    : std::numeric_limits<std::int64_t>::min();
    return r;
}

}  // namespace enerstat
