#include "gateward/sim_time.hpp"

#include <cstdio>
#include <cstdlib>

namespace gateward {

std::string fmt_seconds(Micros t) {
    const bool neg = t < 0;
    const std::uint64_t abs = neg ? static_cast<std::uint64_t>(-t) : static_cast<std::uint64_t>(t);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%s%llu.%06llu", neg ? "-" : "",
                  static_cast<unsigned long long>(abs / kMicrosPerSecond),
                  static_cast<unsigned long long>(abs % kMicrosPerSecond));
    return buf;
}

bool parse_seconds(const std::string& text, Micros& out) {
    if (text.empty()) return false;
    std::size_t i = 0;
    bool neg = false;
    if (text[0] == '-') { neg = true; i = 1; }
    std::int64_t whole = 0;
    bool any = false;
    for (; i < text.size() && text[i] != '.'; ++i) {
        if (text[i] < '0' || text[i] > '9') return false;
        whole = whole * 10 + (text[i] - '0');
        if (whole > 9'000'000'000'000) return false; // ~285k years, plenty
        any = true;
    }
    std::int64_t frac = 0;
    int frac_digits = 0;
    if (i < text.size()) { // at '.'
        for (++i; i < text.size(); ++i) {
            if (text[i] < '0' || text[i] > '9' || frac_digits >= 6) return false;
            frac = frac * 10 + (text[i] - '0');
            ++frac_digits;
        }
        if (frac_digits == 0) return false;
    }
    if (!any && frac_digits == 0) return false;
    while (frac_digits < 6) { frac *= 10; ++frac_digits; }
    out = whole * kMicrosPerSecond + frac;
    if (neg) out = -out;
    return true;
}

} // namespace gateward
