#pragma once

#include <cstdint>
#include <string>

namespace gateward {

/// Simulation clock tick: microseconds since scenario start.
using Micros = std::int64_t;

constexpr Micros kMicrosPerSecond = 1'000'000;

constexpr Micros seconds(std::int64_t s) { return s * kMicrosPerSecond; }

inline Micros from_seconds(double s) {
    return static_cast<Micros>(s * 1e6 + (s >= 0 ? 0.5 : -0.5));
}

inline double to_seconds(Micros t) { return static_cast<double>(t) / 1e6; }

/// "12.500000" — exact decimal seconds, always six fractional digits.
std::string fmt_seconds(Micros t);

/// Inverse of fmt_seconds; accepts up to six fractional digits.
/// Returns false on malformed input.
bool parse_seconds(const std::string& text, Micros& out);

} // namespace gateward
