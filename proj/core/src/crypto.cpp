#include "gateward/crypto.hpp"

#include <openssl/evp.h>

#include <memory>

#include "gateward/errors.hpp"

namespace gateward {

namespace {

struct EvpMdCtxDeleter {
    void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct EvpPkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, EvpMdCtxDeleter>;
using Pkey = std::unique_ptr<EVP_PKEY, EvpPkeyDeleter>;

} // namespace

Hash32 sha256(const std::uint8_t* data, std::size_t n) {
    Hash32 out{};
    unsigned int len = 0;
    MdCtx ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data, n) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != 32) {
        fail(Errc::io_error, "sha256 digest failed");
    }
    return out;
}

Hash32 sha256(const Bytes& data) { return sha256(data.data(), data.size()); }

Hash32 sha256(std::string_view data) {
    return sha256(reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
}

std::string hash_hex(const Hash32& h) { return hex_encode(h.data(), h.size()); }

Hash32 hash_from_hex(std::string_view hex) {
    const Bytes raw = hex_decode(hex);
    if (raw.size() != 32) fail(Errc::parse_error, "hash must be 32 bytes");
    Hash32 h;
    std::copy(raw.begin(), raw.end(), h.begin());
    return h;
}

namespace {

class Ed25519Scheme final : public SignatureScheme {
public:
    std::string name() const override { return "ed25519"; }

    KeyPair keygen(const Hash32& seed) const override {
        Pkey pkey(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr,
                                               seed.data(), seed.size()));
        if (!pkey) fail(Errc::io_error, "ed25519 keygen failed");
        KeyPair kp;
        kp.private_key.assign(seed.begin(), seed.end());
        std::size_t publen = 32;
        kp.public_key.resize(publen);
        if (EVP_PKEY_get_raw_public_key(pkey.get(), kp.public_key.data(), &publen) != 1)
            fail(Errc::io_error, "ed25519 public key extraction failed");
        kp.public_key.resize(publen);
        return kp;
    }

    Bytes sign(const Bytes& private_key, const Bytes& message) const override {
        Pkey pkey(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr,
                                               private_key.data(), private_key.size()));
        if (!pkey) fail(Errc::io_error, "bad ed25519 private key");
        MdCtx ctx(EVP_MD_CTX_new());
        if (!ctx ||
            EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1)
            fail(Errc::io_error, "ed25519 sign init failed");
        std::size_t siglen = 64;
        Bytes sig(siglen);
        if (EVP_DigestSign(ctx.get(), sig.data(), &siglen, message.data(),
                           message.size()) != 1)
            fail(Errc::io_error, "ed25519 sign failed");
        sig.resize(siglen);
        return sig;
    }

    bool verify(const Bytes& public_key, const Bytes& message,
                const Bytes& signature) const override {
        if (public_key.size() != 32 || signature.size() != 64) return false;
        Pkey pkey(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr,
                                              public_key.data(), public_key.size()));
        if (!pkey) return false;
        MdCtx ctx(EVP_MD_CTX_new());
        if (!ctx ||
            EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1)
            return false;
        return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(),
                                message.data(), message.size()) == 1;
    }
};

} // namespace

const SignatureScheme& ed25519() {
    static const Ed25519Scheme scheme;
    return scheme;
}

void KeyDirectory::put(const std::string& signer_id, Bytes public_key) {
    keys_[signer_id] = std::move(public_key);
}

bool KeyDirectory::contains(const std::string& signer_id) const {
    return keys_.count(signer_id) != 0;
}

const Bytes& KeyDirectory::get(const std::string& signer_id) const {
    auto it = keys_.find(signer_id);
    if (it == keys_.end()) fail(Errc::unknown_target, "no public key for '" + signer_id + "'");
    return it->second;
}

} // namespace gateward
