#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gateward/canonical.hpp"
#include "gateward/crypto.hpp"
#include "gateward/flop.hpp"
#include "gateward/sim_time.hpp"

namespace gateward {

// Threshold signing policy: a grant needs signatures from at least
// `threshold` distinct governors out of the listed set.
struct MultiSigPolicy {
    std::string policy_id;
    std::vector<std::string> governors;
    int threshold = 0;

    int m() const { return static_cast<int>(governors.size()); }
    bool has_governor(const std::string& id) const;
    void validate() const;  // throws Errc::invalid_policy

    nlohmann::json to_json() const;
    static MultiSigPolicy from_json(const nlohmann::json& j);
};

// A metered license: quota of flop usable on the listed chips inside the
// validity window, good only while enough governor signatures accompany it.
struct LicenseGrant {
    std::string grant_id;
    std::vector<std::string> chip_ids;  // kept sorted
    Flop quota;
    Micros valid_from = 0;
    Micros valid_to = 0;
    std::string policy_id;
    std::vector<std::pair<std::string, Bytes>> signatures;  // (governor_id, sig)

    bool covers(const std::string& chip_id) const;

    // Canonical byte string governors sign. Signatures are not part of it.
    nlohmann::json payload_json() const;
    Bytes payload_bytes() const;

    void add_signature(const std::string& governor_id, const KeyPair& key,
                       const SignatureScheme& scheme = ed25519());

    nlohmann::json to_json() const;
    static LicenseGrant from_json(const nlohmann::json& j);
};

enum class GrantDefect {
    none,
    zero_quota,
    outside_window,
    chip_not_covered,
    wrong_policy,
    insufficient_signatures,
    withheld,
};

const char* grant_defect_name(GrantDefect d);

struct GrantCheck {
    bool ok = false;
    GrantDefect defect = GrantDefect::none;
    int valid_signatures = 0;
};

// Full validity check as a chip would perform it before honoring a grant.
// `chip_id` empty skips the coverage test (governor-side bookkeeping).
GrantCheck validate_grant(const LicenseGrant& grant, const MultiSigPolicy& policy,
                          const KeyDirectory& keys, Micros now,
                          const std::string& chip_id = {},
                          const SignatureScheme& scheme = ed25519());

// Shared revocation state: governors write, chips consult.
struct WithholdRegistry {
    std::vector<std::string> withheld_grants;
    std::vector<std::string> withheld_chips;

    bool grant_withheld(const std::string& grant_id) const;
    bool chip_withheld(const std::string& chip_id) const;
    // Both return false if the target was already withheld (idempotence).
    bool withhold_grant(const std::string& grant_id);
    bool withhold_chip(const std::string& chip_id);
};

}  // namespace gateward
