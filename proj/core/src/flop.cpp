#include "gateward/flop.hpp"

#include <array>
#include <cctype>
#include <stdexcept>

namespace gateward {

namespace {

constexpr Flop::rep kMax = ~static_cast<Flop::rep>(0);

bool mul10_add(Flop::rep& acc, unsigned digit) {
    if (acc > kMax / 10) return false;
    acc *= 10;
    if (acc > kMax - digit) return false;
    acc += digit;
    return true;
}

} // namespace

bool Flop::try_parse(std::string_view text, Flop& out) {
    if (text.empty()) return false;
    std::size_t i = 0;
    rep mantissa = 0;
    bool any_digit = false;
    int frac_digits = 0;
    bool seen_dot = false;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (c >= '0' && c <= '9') {
            if (!mul10_add(mantissa, static_cast<unsigned>(c - '0'))) return false;
            any_digit = true;
            if (seen_dot) ++frac_digits;
        } else if (c == '.') {
            if (seen_dot) return false;
            seen_dot = true;
        } else if (c == 'e' || c == 'E') {
            break;
        } else {
            return false;
        }
    }
    if (!any_digit) return false;
    long exponent = 0;
    if (i < text.size()) { // at 'e'
        ++i;
        if (i >= text.size()) return false;
        bool neg = false;
        if (text[i] == '+') ++i;
        else if (text[i] == '-') { neg = true; ++i; }
        if (i >= text.size()) return false;
        for (; i < text.size(); ++i) {
            char c = text[i];
            if (c < '0' || c > '9') return false;
            exponent = exponent * 10 + (c - '0');
            if (exponent > 100) return false;
        }
        if (neg) exponent = -exponent;
    } else if (seen_dot && frac_digits > 0) {
        return false; // bare fraction like "1.5" is not an integer
    }
    exponent -= frac_digits;
    if (exponent < 0) {
        // only exact: trailing zeros may be stripped
        for (; exponent < 0; ++exponent) {
            if (mantissa % 10 != 0) return false;
            mantissa /= 10;
        }
    } else {
        for (; exponent > 0; --exponent) {
            if (mantissa > kMax / 10) return false;
            mantissa *= 10;
        }
    }
    out = Flop(mantissa);
    return true;
}

Flop Flop::parse(std::string_view text) {
    Flop f;
    if (!try_parse(text, f))
        throw std::invalid_argument("not an exact non-negative integer flop count: '" +
                                    std::string(text) + "'");
    return f;
}

std::string Flop::str() const {
    if (v_ == 0) return "0";
    char buf[40];
    int pos = 40;
    rep v = v_;
    while (v != 0) {
        buf[--pos] = static_cast<char>('0' + static_cast<unsigned>(v % 10));
        v /= 10;
    }
    return std::string(buf + pos, buf + 40);
}

namespace {

// 128 x 64 -> 192-bit product as three 64-bit limbs, most significant first.
std::array<std::uint64_t, 3> mul_128_64(Flop::rep a, std::uint64_t b) {
    const Flop::rep lo = (a & 0xFFFFFFFFFFFFFFFFull) * static_cast<Flop::rep>(b);
    const Flop::rep hi = (a >> 64) * static_cast<Flop::rep>(b) + (lo >> 64);
    return {static_cast<std::uint64_t>(hi >> 64),
            static_cast<std::uint64_t>(hi),
            static_cast<std::uint64_t>(lo)};
}

} // namespace

int rate_cmp(const Rate& a, const Rate& b) {
    const auto lhs = mul_128_64(a.flop.raw(), static_cast<std::uint64_t>(b.micros));
    const auto rhs = mul_128_64(b.flop.raw(), static_cast<std::uint64_t>(a.micros));
    if (lhs < rhs) return -1;
    if (rhs < lhs) return 1;
    return 0;
}

} // namespace gateward
