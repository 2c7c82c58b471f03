#pragma once

#include <cstdint>
#include <type_traits>
#include <string>
#include <string_view>

namespace gateward {

/// Exact count of FP16 floating-point operations.
///
/// Policy quantities reach 1e27 and tallies sum many of them, so the value
/// lives in an unsigned 128-bit integer. All arithmetic is exact; there is
/// no floating accumulation anywhere in a tally.
class Flop {
public:
    using rep = unsigned __int128;

    constexpr Flop() = default;
    constexpr Flop(rep v) : v_(v) {} // NOLINT: implicit from integer literals
    template <class T, std::enable_if_t<std::is_floating_point_v<T>, int> = 0>
    Flop(T) = delete; // no silent rounding; convert explicitly if needed

    /// 10^exp, exp in [0, 38].
    static constexpr Flop pow10(int exp) {
        rep v = 1;
        for (int i = 0; i < exp; ++i) v *= 10;
        return Flop(v);
    }

    /// Parses "123", "1e27", "2.0105e25". Scientific forms must expand to an
    /// exact integer; anything else (sign, fraction left over, overflow) is
    /// rejected.
    static Flop parse(std::string_view text);
    static bool try_parse(std::string_view text, Flop& out);

    std::string str() const;
    double to_double() const { return static_cast<double>(v_); }
    constexpr rep raw() const { return v_; }

    constexpr bool is_zero() const { return v_ == 0; }

    constexpr Flop& operator+=(Flop o) { v_ += o.v_; return *this; }
    constexpr Flop& operator-=(Flop o) { v_ -= o.v_; return *this; }
    friend constexpr Flop operator+(Flop a, Flop b) { return Flop(a.v_ + b.v_); }
    friend constexpr Flop operator-(Flop a, Flop b) { return Flop(a.v_ - b.v_); }
    friend constexpr Flop operator*(Flop a, std::uint64_t k) { return Flop(a.v_ * k); }
    friend constexpr Flop operator/(Flop a, std::uint64_t k) { return Flop(a.v_ / k); }
    friend constexpr bool operator==(Flop a, Flop b) { return a.v_ == b.v_; }
    friend constexpr bool operator!=(Flop a, Flop b) { return a.v_ != b.v_; }
    friend constexpr bool operator<(Flop a, Flop b) { return a.v_ < b.v_; }
    friend constexpr bool operator<=(Flop a, Flop b) { return a.v_ <= b.v_; }
    friend constexpr bool operator>(Flop a, Flop b) { return a.v_ > b.v_; }
    friend constexpr bool operator>=(Flop a, Flop b) { return a.v_ >= b.v_; }

private:
    rep v_ = 0;
};

/// flop / micros: an exact rational rate. Comparisons never round.
struct Rate {
    Flop flop;             // numerator
    std::int64_t micros = 1'000'000; // denominator (> 0)

    static constexpr Rate zero() { return Rate{Flop(0), 1'000'000}; }
    static constexpr Rate per_second(Flop f) { return Rate{f, 1'000'000}; }

    double flop_per_sec() const {
        return flop.to_double() * 1e6 / static_cast<double>(micros);
    }
};

/// Three-way comparison of a.flop/a.micros vs b.flop/b.micros, exact.
/// Cross products need up to 128+63 bits, so they are compared limbwise.
int rate_cmp(const Rate& a, const Rate& b);

inline bool rate_lt(const Rate& a, const Rate& b) { return rate_cmp(a, b) < 0; }
inline bool rate_eq(const Rate& a, const Rate& b) { return rate_cmp(a, b) == 0; }

/// rate > cap (cap given in flop per second)?
inline bool rate_exceeds(const Rate& r, Flop cap_per_sec) {
    return rate_cmp(r, Rate::per_second(cap_per_sec)) > 0;
}

} // namespace gateward
