// Exact rational arithmetic for policy weights, channel gains and metric
// rates. Backed by boost multiprecision so compounding (1 +/- eta) updates
// never overflow; equality over these values is exact by construction.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>

#include "enerstat/base.hpp"

namespace enerstat {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Rational make_rational(std::int64_t num, std::int64_t den) {
    return Rational(BigInt(num), BigInt(den));
}

// Parses "3", "-3", "3/4". Throws SchemaError on anything else.
inline Rational parse_rational(const std::string& text) {
    const auto slash = text.find('/');
    try {
        if (slash == std::string::npos) return Rational(BigInt(text));
        BigInt num(text.substr(0, slash));
        BigInt den(text.substr(slash + 1));
        if (den == 0) raise(Errc::SchemaError, "rational with zero denominator: " + text);
        return Rational(num, den);
    } catch (const std::exception&) {
        raise(Errc::SchemaError, "malformed rational: " + text);
    }
}

inline std::string rational_str(const Rational& value) {
    std::string s = numerator(value).str();
    if (denominator(value) != 1) s += "/" + denominator(value).str();
    return s;
}

// Truncation toward zero, saturated into int64.
inline std::int64_t trunc_toward_zero(const Rational& value) {
    BigInt q = numerator(value) / denominator(value);  // cpp_int division truncates
    if (q > std::numeric_limits<std::int64_t>::max()) return std::numeric_limits<std::int64_t>::max();
    if (q < std::numeric_limits<std::int64_t>::min()) return std::numeric_limits<std::int64_t>::min();
    return static_cast<std::int64_t>(q);
}

inline double rational_double(const Rational& value) {
    return value.convert_to<double>();
}

}  // namespace enerstat
