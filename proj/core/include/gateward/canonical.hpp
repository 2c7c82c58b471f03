#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gateward/flop.hpp"

namespace gateward {

using Bytes = std::vector<std::uint8_t>;

/// Canonical JSON bytes: UTF-8, keys in lexicographic order, no insignificant
/// whitespace. Signatures and chain hashes cover these bytes, so every
/// serialization that feeds one goes through here. nlohmann::json already
/// stores object keys sorted; this pins the compact dump.
std::string canonical_dump(const nlohmann::json& j);

std::string hex_encode(const Bytes& data);
std::string hex_encode(const std::uint8_t* data, std::size_t n);
Bytes hex_decode(std::string_view hex); // throws Errc::parse_error

/// Flop values are encoded as decimal strings so that counts above 2^53
/// survive any JSON round trip byte-exactly.
nlohmann::json flop_to_json(Flop f);

/// Accepts an unsigned JSON integer, a digit string, or an exact scientific
/// string ("1e27", "2.0105e25").
Flop flop_from_json(const nlohmann::json& j); // throws Errc::parse_error

} // namespace gateward
