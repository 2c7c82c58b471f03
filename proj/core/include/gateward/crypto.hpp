#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "gateward/canonical.hpp"

namespace gateward {

using Hash32 = std::array<std::uint8_t, 32>;

Hash32 sha256(const std::uint8_t* data, std::size_t n);
Hash32 sha256(const Bytes& data);
Hash32 sha256(std::string_view data);
std::string hash_hex(const Hash32& h);
Hash32 hash_from_hex(std::string_view hex); // throws Errc::parse_error

constexpr Hash32 zero_hash() { return Hash32{}; }

struct KeyPair {
    Bytes public_key;
    Bytes private_key; // raw key material; never serialized by the library
};

/// Asymmetric signature capability. The protocol layer is generic over the
/// scheme; the default is Ed25519 (deterministic signatures, which the
/// reproducible-simulation contract relies on).
class SignatureScheme {
public:
    virtual ~SignatureScheme() = default;
    virtual std::string name() const = 0;
    /// Derives a key pair from a 32-byte seed.
    virtual KeyPair keygen(const Hash32& seed) const = 0;
    virtual Bytes sign(const Bytes& private_key, const Bytes& message) const = 0;
    virtual bool verify(const Bytes& public_key, const Bytes& message,
                        const Bytes& signature) const = 0;
};

const SignatureScheme& ed25519();

/// Known public keys by signer id (chips, governors, stations).
class KeyDirectory {
public:
    void put(const std::string& signer_id, Bytes public_key);
    bool contains(const std::string& signer_id) const;
    const Bytes& get(const std::string& signer_id) const; // throws unknown_target

private:
    std::map<std::string, Bytes> keys_;
};

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

} // namespace gateward
