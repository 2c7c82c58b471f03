#include "gateward/envelope.hpp"

#include "gateward/errors.hpp"

namespace gateward {

namespace {

Bytes signed_bytes(const std::string& payload_bytes, const Nonce& nonce) {
    Bytes msg(payload_bytes.begin(), payload_bytes.end());
    msg.insert(msg.end(), nonce.begin(), nonce.end());
    return msg;
}

} // namespace

std::string SignedEnvelope::type() const {
    const auto p = payload();
    if (p.contains("type") && p["type"].is_string()) return p["type"].get<std::string>();
    return "";
}

nlohmann::json SignedEnvelope::to_json() const {
    return nlohmann::json{
        {"nonce", hex_encode(nonce.data(), nonce.size())},
        {"payload", nlohmann::json::parse(payload_bytes)},
        {"signature", hex_encode(signature)},
        {"signer", signer},
    };
}

SignedEnvelope SignedEnvelope::from_json(const nlohmann::json& j) {
    SignedEnvelope env;
    env.payload_bytes = canonical_dump(j.at("payload"));
    env.signer = j.at("signer").get<std::string>();
    const Bytes nonce = hex_decode(j.at("nonce").get<std::string>());
    if (nonce.size() != env.nonce.size()) fail(Errc::parse_error, "nonce must be 16 bytes");
    std::copy(nonce.begin(), nonce.end(), env.nonce.begin());
    env.signature = hex_decode(j.at("signature").get<std::string>());
    return env;
}

SignedEnvelope make_envelope(const SignatureScheme& scheme, const nlohmann::json& payload,
                             const std::string& signer, const Bytes& private_key,
                             const Nonce& nonce) {
    SignedEnvelope env;
    env.payload_bytes = canonical_dump(payload);
    env.signer = signer;
    env.nonce = nonce;
    env.signature = scheme.sign(private_key, signed_bytes(env.payload_bytes, nonce));
    return env;
}

bool verify_envelope(const SignatureScheme& scheme, const SignedEnvelope& env,
                     const KeyDirectory& keys) {
    if (!keys.contains(env.signer)) return false;
    return scheme.verify(keys.get(env.signer), signed_bytes(env.payload_bytes, env.nonce),
                         env.signature);
}

} // namespace gateward
