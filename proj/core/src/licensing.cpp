#include "gateward/licensing.hpp"

#include <algorithm>
#include <set>

#include "gateward/errors.hpp"

namespace gateward {

using nlohmann::json;

bool MultiSigPolicy::has_governor(const std::string& id) const {
    return std::find(governors.begin(), governors.end(), id) != governors.end();
}

void MultiSigPolicy::validate() const {
    if (policy_id.empty()) fail(Errc::invalid_policy, "policy_id empty");
    if (governors.empty()) fail(Errc::invalid_policy, "no governors listed");
    std::set<std::string> uniq(governors.begin(), governors.end());
    if (uniq.size() != governors.size())
        fail(Errc::invalid_policy, "duplicate governor id");
    if (threshold < 1 || threshold > m())
        fail(Errc::invalid_policy, "threshold outside [1, M]");
}

json MultiSigPolicy::to_json() const {
    return json{{"policy_id", policy_id},
                {"governors", governors},
                {"threshold", threshold}};
}

MultiSigPolicy MultiSigPolicy::from_json(const json& j) {
    MultiSigPolicy p;
    p.policy_id = j.at("policy_id").get<std::string>();
    p.governors = j.at("governors").get<std::vector<std::string>>();
    p.threshold = j.at("threshold").get<int>();
    p.validate();
    return p;
}

bool LicenseGrant::covers(const std::string& chip_id) const {
    return std::binary_search(chip_ids.begin(), chip_ids.end(), chip_id);
}

json LicenseGrant::payload_json() const {
    std::vector<std::string> chips = chip_ids;
    std::sort(chips.begin(), chips.end());
    return json{{"type", "LicenseGrant"},
                {"grant_id", grant_id},
                {"chip_ids", chips},
                {"quota", flop_to_json(quota)},
                {"valid_from", valid_from},
                {"valid_to", valid_to},
                {"policy_id", policy_id}};
}

Bytes LicenseGrant::payload_bytes() const {
    const std::string s = canonical_dump(payload_json());
    return Bytes(s.begin(), s.end());
}

void LicenseGrant::add_signature(const std::string& governor_id, const KeyPair& key,
                                 const SignatureScheme& scheme) {
    signatures.emplace_back(governor_id, scheme.sign(key.private_key, payload_bytes()));
}

const char* grant_defect_name(GrantDefect d) {
    switch (d) {
        case GrantDefect::none: return "None";
        case GrantDefect::zero_quota: return "ZeroQuota";
        case GrantDefect::outside_window: return "OutsideWindow";
        case GrantDefect::chip_not_covered: return "ChipNotCovered";
        case GrantDefect::wrong_policy: return "WrongPolicy";
        case GrantDefect::insufficient_signatures: return "InsufficientSignatures";
        case GrantDefect::withheld: return "Withheld";
    }
    return "?";
}

json LicenseGrant::to_json() const {
    json sigs = json::array();
    for (const auto& [gov, sig] : signatures)
        sigs.push_back(json{{"governor", gov}, {"signature", hex_encode(sig)}});
    json j = payload_json();
    j["signatures"] = std::move(sigs);
    return j;
}

LicenseGrant LicenseGrant::from_json(const json& j) {
    LicenseGrant g;
    g.grant_id = j.at("grant_id").get<std::string>();
    g.chip_ids = j.at("chip_ids").get<std::vector<std::string>>();
    std::sort(g.chip_ids.begin(), g.chip_ids.end());
    g.quota = flop_from_json(j.at("quota"));
    g.valid_from = j.at("valid_from").get<Micros>();
    g.valid_to = j.at("valid_to").get<Micros>();
    g.policy_id = j.at("policy_id").get<std::string>();
    if (j.contains("signatures")) {
        for (const auto& s : j.at("signatures"))
            g.signatures.emplace_back(s.at("governor").get<std::string>(),
                                      hex_decode(s.at("signature").get<std::string>()));
    }
    return g;
}

GrantCheck validate_grant(const LicenseGrant& grant, const MultiSigPolicy& policy,
                          const KeyDirectory& keys, Micros now,
                          const std::string& chip_id, const SignatureScheme& scheme) {
    GrantCheck out;
    if (grant.quota == Flop(0)) {
        out.defect = GrantDefect::zero_quota;
        return out;
    }
    if (now < grant.valid_from || now > grant.valid_to) {
        out.defect = GrantDefect::outside_window;
        return out;
    }
    if (!chip_id.empty() && !grant.covers(chip_id)) {
        out.defect = GrantDefect::chip_not_covered;
        return out;
    }
    if (grant.policy_id != policy.policy_id) {
        out.defect = GrantDefect::wrong_policy;
        return out;
    }

    const Bytes payload = grant.payload_bytes();
    std::set<std::string> seen;
    for (const auto& [gov, sig] : grant.signatures) {
        if (!policy.has_governor(gov)) continue;   // stranger's signature: ignore
        if (seen.count(gov)) continue;             // same governor twice: counts once
        if (!keys.contains(gov)) continue;
        if (!scheme.verify(keys.get(gov), payload, sig)) continue;
        seen.insert(gov);
    }
    out.valid_signatures = static_cast<int>(seen.size());
    if (out.valid_signatures < policy.threshold) {
        out.defect = GrantDefect::insufficient_signatures;
        return out;
    }
    out.ok = true;
    return out;
}

bool WithholdRegistry::grant_withheld(const std::string& grant_id) const {
    return std::find(withheld_grants.begin(), withheld_grants.end(), grant_id) !=
           withheld_grants.end();
}

bool WithholdRegistry::chip_withheld(const std::string& chip_id) const {
    return std::find(withheld_chips.begin(), withheld_chips.end(), chip_id) !=
           withheld_chips.end();
}

bool WithholdRegistry::withhold_grant(const std::string& grant_id) {
    if (grant_withheld(grant_id)) return false;
    withheld_grants.push_back(grant_id);
    return true;
}

bool WithholdRegistry::withhold_chip(const std::string& chip_id) {
    if (chip_withheld(chip_id)) return false;
    withheld_chips.push_back(chip_id);
    return true;
}

}  // namespace gateward
