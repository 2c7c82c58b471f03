#include "gateward/canonical.hpp"

#include "gateward/errors.hpp"

namespace gateward {

std::string canonical_dump(const nlohmann::json& j) {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::string hex_encode(const std::uint8_t* data, std::size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xF]);
    }
    return out;
}

std::string hex_encode(const Bytes& data) {
    return hex_encode(data.data(), data.size());
}

namespace {
int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
} // namespace

Bytes hex_decode(std::string_view hex) {
    if (hex.size() % 2 != 0) fail(Errc::parse_error, "odd-length hex string");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int hi = hex_nibble(hex[2 * i]);
        const int lo = hex_nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) fail(Errc::parse_error, "invalid hex digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

nlohmann::json flop_to_json(Flop f) {
    return f.str();
}

Flop flop_from_json(const nlohmann::json& j) {
    if (j.is_number_unsigned()) return Flop(j.get<std::uint64_t>());
    if (j.is_number_integer()) {
        const auto v = j.get<std::int64_t>();
        if (v < 0) fail(Errc::negative_flop, "flop count must be non-negative");
        return Flop(static_cast<std::uint64_t>(v));
    }
    if (j.is_string()) {
        Flop f;
        if (!Flop::try_parse(j.get_ref<const std::string&>(), f))
            fail(Errc::parse_error, "bad flop value '" + j.get<std::string>() + "'");
        return f;
    }
    fail(Errc::parse_error, "flop value must be an unsigned integer or decimal string");
}

} // namespace gateward
