#include "gateward/governor.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "gateward/canonical.hpp"
#include "gateward/errors.hpp"

namespace gateward {

using nlohmann::json;

json RegistryEntry::to_json() const {
    return json{{"type", "RegistryEntry"},
                {"model_id", model_id},
                {"developer_id", developer_id},
                {"training_compute", flop_to_json(training_compute)},
                {"max_inference_rate", flop_to_json(max_inference_rate_per_s)},
                {"quarter", quarter},
                {"attestation_proof_id", attestation_proof_id}};
}

RegistryEntry RegistryEntry::from_json(const json& j) {
    RegistryEntry e;
    e.model_id = j.at("model_id").get<std::string>();
    e.developer_id = j.at("developer_id").get<std::string>();
    e.training_compute = flop_from_json(j.at("training_compute"));
    e.max_inference_rate_per_s = flop_from_json(j.at("max_inference_rate"));
    e.quarter = j.at("quarter").get<std::string>();
    e.attestation_proof_id = j.value("attestation_proof_id", "");
    return e;
}

// --- Attestation -------------------------------------------------------------

Hash32 attestation_step_hash(const Hash32& prev, const Hash32& code,
                             const Hash32& data, Flop step_flop) {
    Bytes buf;
    buf.reserve(96 + 40);
    buf.insert(buf.end(), prev.begin(), prev.end());
    buf.insert(buf.end(), code.begin(), code.end());
    buf.insert(buf.end(), data.begin(), data.end());
    const std::string f = step_flop.str();
    buf.insert(buf.end(), f.begin(), f.end());
    return sha256(buf);
}

AttestationProof build_attestation(const std::vector<AttestStepInput>& steps,
                                   const std::string& signer, const KeyPair& key,
                                   const Nonce& nonce) {
    AttestationProof proof;
    Hash32 prev = zero_hash();
    for (const auto& in : steps) {
        AttestationStep s;
        s.prev_hash = prev;
        s.code_hash = in.code_hash;
        s.data_hash = in.data_hash;
        s.step_flop = in.step_flop;
        s.chain_hash = attestation_step_hash(prev, in.code_hash, in.data_hash, in.step_flop);
        prev = s.chain_hash;
        proof.total_flop += in.step_flop;
        proof.steps.push_back(s);
    }
    const json payload{{"type", "AttestationSubmit"},
                       {"final_chain_hash", hash_hex(prev)},
                       {"total_flop", flop_to_json(proof.total_flop)},
                       {"steps", proof.steps.size()}};
    proof.final_signature = make_envelope(ed25519(), payload, signer, key.private_key, nonce);
    return proof;
}

const char* attest_outcome_name(AttestOutcome o) {
    switch (o) {
        case AttestOutcome::ok: return "Ok";
        case AttestOutcome::empty_proof: return "EmptyProof";
        case AttestOutcome::chain_mismatch: return "ChainMismatch";
        case AttestOutcome::bad_signature: return "BadSignature";
        case AttestOutcome::total_mismatch: return "TotalMismatch";
        case AttestOutcome::unexpected_code: return "UnexpectedCode";
        case AttestOutcome::unexpected_data: return "UnexpectedData";
    }
    return "?";
}

AttestOutcome verify_attestation(const AttestationProof& proof,
                                 const std::set<Hash32>& expected_codes,
                                 const std::set<Hash32>& expected_data,
                                 Flop claimed_flop, const KeyDirectory& keys) {
    if (proof.steps.empty()) return AttestOutcome::empty_proof;

    Hash32 prev = zero_hash();
    Flop total;
    for (const auto& s : proof.steps) {
        if (s.prev_hash != prev) return AttestOutcome::chain_mismatch;
        const Hash32 want =
            attestation_step_hash(prev, s.code_hash, s.data_hash, s.step_flop);
        if (s.chain_hash != want) return AttestOutcome::chain_mismatch;
        prev = s.chain_hash;
        total += s.step_flop;
    }

    if (!verify_envelope(ed25519(), proof.final_signature, keys))
        return AttestOutcome::bad_signature;
    const json payload = proof.final_signature.payload();
    if (payload.value("final_chain_hash", "") != hash_hex(prev))
        return AttestOutcome::chain_mismatch;

    if (total != proof.total_flop || total != claimed_flop)
        return AttestOutcome::total_mismatch;
    if (flop_from_json(payload.at("total_flop")) != total)
        return AttestOutcome::total_mismatch;

    for (const auto& s : proof.steps) {
        if (!expected_codes.count(s.code_hash)) return AttestOutcome::unexpected_code;
        if (!expected_data.count(s.data_hash)) return AttestOutcome::unexpected_data;
    }
    return AttestOutcome::ok;
}

namespace {

json hash_json(const Hash32& h) { return hash_hex(h); }
Hash32 hash_from_json(const json& j) { return hash_from_hex(j.get<std::string>()); }

}  // namespace

json AttestationProof::to_json() const {
    json arr = json::array();
    for (const auto& s : steps)
        arr.push_back(json{{"prev", hash_json(s.prev_hash)},
                           {"code", hash_json(s.code_hash)},
                           {"data", hash_json(s.data_hash)},
                           {"flop", flop_to_json(s.step_flop)},
                           {"chain", hash_json(s.chain_hash)}});
    return json{{"type", "AttestationProof"},
                {"steps", arr},
                {"final_signature", final_signature.to_json()},
                {"total_flop", flop_to_json(total_flop)}};
}

AttestationProof AttestationProof::from_json(const json& j) {
    AttestationProof p;
    for (const auto& s : j.at("steps")) {
        AttestationStep step;
        step.prev_hash = hash_from_json(s.at("prev"));
        step.code_hash = hash_from_json(s.at("code"));
        step.data_hash = hash_from_json(s.at("data"));
        step.step_flop = flop_from_json(s.at("flop"));
        step.chain_hash = hash_from_json(s.at("chain"));
        p.steps.push_back(step);
    }
    p.final_signature = SignedEnvelope::from_json(j.at("final_signature"));
    p.total_flop = flop_from_json(j.at("total_flop"));
    return p;
}

// --- GovernorService ---------------------------------------------------------

GovernorService::GovernorService(uint64_t seed, KeyDirectory& keys,
                                 MultiSigPolicy policy, policy::PolicyConfig config)
    : keys_(keys), policy_(std::move(policy)), config_(std::move(config)) {
    policy_.validate();
    config_.validate();
    for (const auto& gov : policy_.governors) {
        const std::string label = "governor-key/" + std::to_string(seed) + "/" + gov;
        KeyPair kp = ed25519().keygen(sha256(label));
        keys_.put(gov, kp.public_key);
        governor_keys_.emplace(gov, std::move(kp));
    }
}

const KeyPair& GovernorService::governor_key(const std::string& governor_id) const {
    auto it = governor_keys_.find(governor_id);
    if (it == governor_keys_.end()) fail(Errc::unknown_target, governor_id);
    return it->second;
}

void GovernorService::enroll_chip(const std::string& chip_id) {
    enrolled_.insert(chip_id);
}

bool GovernorService::chip_enrolled(const std::string& chip_id) const {
    return enrolled_.count(chip_id) != 0;
}

bool GovernorService::registration_required(const RegistryEntry& entry) const {
    return entry.training_compute > config_.registration_flop_threshold ||
           entry.max_inference_rate_per_s > config_.registration_rate_threshold;
}

std::string GovernorService::register_training_run(RegistryEntry entry) {
    if (entry.model_id.empty() || entry.developer_id.empty() || entry.quarter.empty())
        fail(Errc::schema_violation, "registry entry incomplete");
    const auto key = std::make_pair(entry.model_id, entry.quarter);
    if (registry_.count(key))
        fail(Errc::duplicate_registration, entry.model_id + "@" + entry.quarter);
    registry_.emplace(key, std::move(entry));
    registry_order_.push_back(key);
    return "receipt-" + key.first + "-" + key.second;
}

bool GovernorService::registered(const std::string& model_id) const {
    for (const auto& [key, e] : registry_)
        if (key.first == model_id) return true;
    return false;
}

std::optional<RegistryEntry> GovernorService::query(const std::string& model_id,
                                                    const std::string& quarter) const {
    auto it = registry_.find(std::make_pair(model_id, quarter));
    if (it == registry_.end()) return std::nullopt;
    return it->second;
}

std::vector<RegistryEntry> GovernorService::entries() const {
    std::vector<RegistryEntry> out;
    out.reserve(registry_order_.size());
    for (const auto& key : registry_order_) out.push_back(registry_.at(key));
    return out;
}

LicenseDecision GovernorService::request_license(const std::string& model_id,
                                                 const std::vector<std::string>& chip_ids,
                                                 Flop quota, Micros valid_from,
                                                 Micros valid_to, Micros now,
                                                 bool pause_phase,
                                                 const std::set<std::string>& refusing,
                                                 Flop plan_hint,
                                                 bool counts_toward_training) {
    (void)now;  // grants are checked against the clock by the installing chip
    LicenseDecision d;
    Flop projection_quota = counts_toward_training ? quota : Flop(0);
    if (pause_phase && counts_toward_training && plan_hint > quota)
        projection_quota = plan_hint;
    d.projected = cumulative_[model_id] + projection_quota;

    for (const auto& chip : chip_ids) {
        if (!chip_enrolled(chip)) {
            d.error = "UnknownChip";
            d.reason = "unknown_chip";
            return d;
        }
        if (withheld_.chip_withheld(chip)) {
            d.error = "Withheld";
            d.reason = "withheld";
            return d;
        }
    }

    const auto cap = policy::check_caps(d.projected, Rate::zero(), config_);
    if (!cap.allowed) {
        if (pause_phase) {
            // Moratorium wording: the request "might exceed" the cap.
            d.error = "Pause";
            d.reason = "pause";
        } else {
            d.error = "CapWouldBeExceeded";
            d.reason = cap.reason;
        }
        return d;
    }

    LicenseGrant g;
    g.grant_id = "grant-" + std::to_string(++grant_counter_);
    g.chip_ids = chip_ids;
    std::sort(g.chip_ids.begin(), g.chip_ids.end());
    g.quota = quota;
    g.valid_from = valid_from;
    g.valid_to = valid_to;
    g.policy_id = policy_.policy_id;
    for (const auto& gov : policy_.governors) {
        if (refusing.count(gov)) continue;  // abstains (refusal or timeout)
        g.add_signature(gov, governor_keys_.at(gov));
        if (static_cast<int>(g.signatures.size()) >= policy_.threshold) break;
    }
    if (static_cast<int>(g.signatures.size()) < policy_.threshold) {
        d.error = "InsufficientSignatures";
        d.reason = "insufficient_signatures";
        return d;
    }

    if (counts_toward_training) cumulative_[model_id] += quota;
    d.granted = true;
    d.grant = g;
    grants_.emplace(g.grant_id, std::move(g));
    return d;
}

Flop GovernorService::cumulative_granted(const std::string& model_id) const {
    auto it = cumulative_.find(model_id);
    return it == cumulative_.end() ? Flop(0) : it->second;
}

bool GovernorService::has_grant(const std::string& grant_id) const {
    return grants_.count(grant_id) != 0;
}

const LicenseGrant& GovernorService::grant(const std::string& grant_id) const {
    auto it = grants_.find(grant_id);
    if (it == grants_.end()) fail(Errc::unknown_grant, grant_id);
    return it->second;
}

bool GovernorService::withhold(const std::string& governor_id, const std::string& target) {
    if (!policy_.has_governor(governor_id))
        fail(Errc::invalid_policy, "not a policy governor: " + governor_id);
    if (grants_.count(target)) return withheld_.withhold_grant(target);
    if (enrolled_.count(target)) return withheld_.withhold_chip(target);
    fail(Errc::unknown_target, target);
}

TelemetryOutcome GovernorService::collect_telemetry(Fabric& fabric,
                                                    const std::string& chip_id,
                                                    const std::string& period,
                                                    const std::vector<std::string>& agencies,
                                                    Micros now, Rng& rng) {
    TelemetryOutcome out;
    if (!chip_enrolled(chip_id) || !fabric.has_chip(chip_id)) {
        out.flag = "NoResponse";
        return out;
    }
    out.report = fabric.make_telemetry(chip_id, period, agencies, now, rng);
    if (!verify_envelope(ed25519(), out.report, keys_)) {
        out.flag = "BadSignature";
        return out;
    }
    out.ok = true;
    return out;
}

std::vector<std::string> GovernorService::audit_missing(
    const ledger::CausalGraph& graph) const {
    std::vector<std::string> missing;
    for (const auto& [model_id, nodes] : graph.models()) {
        if (graph.training_compute(model_id) > config_.registration_flop_threshold &&
            !registered(model_id))
            missing.push_back(model_id);
    }
    return missing;
}

std::vector<std::string> GovernorService::audit_declared_mismatch(
    const ledger::CausalGraph& graph) const {
    std::vector<std::string> flagged;
    for (const auto& key : registry_order_) {
        const RegistryEntry& e = registry_.at(key);
        if (!graph.models().count(e.model_id)) continue;
        const Flop actual = graph.training_compute(e.model_id);
        const Flop declared = e.training_compute;
        const Flop diff = declared > actual ? declared - actual : actual - declared;
        // flagged when |declared - actual| > actual / 100
        if (diff * 100 > actual) flagged.push_back(e.model_id);
    }
    return flagged;
}

void GovernorService::save_registry(std::ostream& out) const {
    out << "# gateward-registry/1\n";
    for (const auto& key : registry_order_)
        out << canonical_dump(registry_.at(key).to_json()) << "\n";
}

std::vector<RegistryEntry> GovernorService::load_registry(std::istream& in) {
    std::vector<RegistryEntry> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            if (line == "# gateward-registry/1") continue;
        }
        if (line.empty() || line[0] == '#') continue;
        try {
            out.push_back(RegistryEntry::from_json(json::parse(line)));
        } catch (const json::exception& e) {
            fail(Errc::parse_error, std::string("registry line: ") + e.what());
        }
    }
    return out;
}

}  // namespace gateward
