#pragma once

#include <array>
#include <string>

#include <nlohmann/json.hpp>

#include "gateward/crypto.hpp"

namespace gateward {

using Nonce = std::array<std::uint8_t, 16>;

/// Signed wire message. The signature covers canonical payload bytes
/// followed by the 128-bit nonce, so the payload encoding is normative:
/// re-serializing a payload differently invalidates the envelope.
///
/// Message type (LinkRequest, LinkPermit, ExecuteRequest, TelemetryPush,
/// LicenseRequest, Withhold, AttestationSubmit, Challenge, ChallengeResponse)
/// travels inside the payload under the "type" key.
struct SignedEnvelope {
    std::string payload_bytes; // canonical JSON
    std::string signer;
    Nonce nonce{};
    Bytes signature;

    nlohmann::json payload() const { return nlohmann::json::parse(payload_bytes); }
    std::string type() const;

    nlohmann::json to_json() const;
    static SignedEnvelope from_json(const nlohmann::json& j);
};

SignedEnvelope make_envelope(const SignatureScheme& scheme, const nlohmann::json& payload,
                             const std::string& signer, const Bytes& private_key,
                             const Nonce& nonce);

bool verify_envelope(const SignatureScheme& scheme, const SignedEnvelope& env,
                     const KeyDirectory& keys);

} // namespace gateward
