#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gateward/crypto.hpp"
#include "gateward/envelope.hpp"
#include "gateward/fabric.hpp"
#include "gateward/flop.hpp"
#include "gateward/ledger.hpp"
#include "gateward/licensing.hpp"
#include "gateward/policy.hpp"
#include "gateward/rng.hpp"
#include "gateward/sim_time.hpp"

namespace gateward {

struct RegistryEntry {
    std::string model_id;
    std::string developer_id;
    Flop training_compute;
    Flop max_inference_rate_per_s;
    std::string quarter;
    std::string attestation_proof_id;  // empty: none attached

    nlohmann::json to_json() const;
    static RegistryEntry from_json(const nlohmann::json& j);
};

// --- Attested training -----------------------------------------------------

struct AttestationStep {
    Hash32 prev_hash{};
    Hash32 code_hash{};
    Hash32 data_hash{};
    Flop step_flop;
    Hash32 chain_hash{};
};

struct AttestationProof {
    std::vector<AttestationStep> steps;
    SignedEnvelope final_signature;
    Flop total_flop;

    nlohmann::json to_json() const;
    static AttestationProof from_json(const nlohmann::json& j);
};

struct AttestStepInput {
    Hash32 code_hash{};
    Hash32 data_hash{};
    Flop step_flop;
};

// chain(i) = H(chain(i-1) || code(i) || data(i) || decimal step flop).
Hash32 attestation_step_hash(const Hash32& prev, const Hash32& code,
                             const Hash32& data, Flop step_flop);

AttestationProof build_attestation(const std::vector<AttestStepInput>& steps,
                                   const std::string& signer, const KeyPair& key,
                                   const Nonce& nonce);

enum class AttestOutcome {
    ok,
    empty_proof,
    chain_mismatch,
    bad_signature,
    total_mismatch,
    unexpected_code,
    unexpected_data,
};
const char* attest_outcome_name(AttestOutcome o);

AttestOutcome verify_attestation(const AttestationProof& proof,
                                 const std::set<Hash32>& expected_codes,
                                 const std::set<Hash32>& expected_data,
                                 Flop claimed_flop, const KeyDirectory& keys);

// --- Licensing authority ----------------------------------------------------

struct LicenseDecision {
    bool granted = false;
    LicenseGrant grant;
    std::string error;   // CapWouldBeExceeded / InsufficientSignatures / UnknownChip / Pause
    std::string reason;  // rule tag for the event log: training_cap, pause, ...
    Flop projected;      // cumulative compute the decision was made against
};

struct TelemetryOutcome {
    bool ok = false;
    std::string flag;  // "NoResponse" when the chip cannot be reached
    SignedEnvelope report;
};

// The remote licensing/registration/telemetry authority. One service models
// the whole governor set: individual governor keys live here and threshold
// signing is simulated by collecting signatures from the non-refusing ones.
class GovernorService {
  public:
    GovernorService(uint64_t seed, KeyDirectory& keys, MultiSigPolicy policy,
                    policy::PolicyConfig config);

    const MultiSigPolicy& policy() const { return policy_; }
    const policy::PolicyConfig& config() const { return config_; }
    void set_config(policy::PolicyConfig c) { config_ = std::move(c); }
    WithholdRegistry& withheld() { return withheld_; }
    const WithholdRegistry& withheld() const { return withheld_; }
    const KeyPair& governor_key(const std::string& governor_id) const;

    void enroll_chip(const std::string& chip_id);
    bool chip_enrolled(const std::string& chip_id) const;

    // Registration.
    std::string register_training_run(RegistryEntry entry);  // receipt
    bool registered(const std::string& model_id) const;
    std::optional<RegistryEntry> query(const std::string& model_id,
                                       const std::string& quarter) const;
    std::vector<RegistryEntry> entries() const;
    bool registration_required(const RegistryEntry& entry) const;

    // Metered licensing. During the pause phase the projection uses the
    // whole declared plan (`plan_hint`), not just this quota slice: a run
    // that *might* exceed the cap is refused outright. Inference quotas pass
    // counts_toward_training = false; they are capped by rate measurement,
    // not by the training tally.
    LicenseDecision request_license(const std::string& model_id,
                                    const std::vector<std::string>& chip_ids,
                                    Flop quota, Micros valid_from, Micros valid_to,
                                    Micros now, bool pause_phase = false,
                                    const std::set<std::string>& refusing = {},
                                    Flop plan_hint = Flop(0),
                                    bool counts_toward_training = true);
    Flop cumulative_granted(const std::string& model_id) const;
    bool has_grant(const std::string& grant_id) const;
    const LicenseGrant& grant(const std::string& grant_id) const;

    // Off-switch. Returns false when the target was already withheld.
    bool withhold(const std::string& governor_id, const std::string& target);

    TelemetryOutcome collect_telemetry(Fabric& fabric, const std::string& chip_id,
                                       const std::string& period,
                                       const std::vector<std::string>& agencies,
                                       Micros now, Rng& rng);

    // Mandatory-registration audit: models in the ledger above the training
    // threshold with no registry entry.
    std::vector<std::string> audit_missing(const ledger::CausalGraph& graph) const;
    // Declared registry figures diverging > 1% from ledger tallies.
    std::vector<std::string> audit_declared_mismatch(const ledger::CausalGraph& graph) const;

    // Registry persistence (append-only canonical JSON lines).
    void save_registry(std::ostream& out) const;
    static std::vector<RegistryEntry> load_registry(std::istream& in);

  private:
    KeyDirectory& keys_;
    MultiSigPolicy policy_;
    policy::PolicyConfig config_;
    WithholdRegistry withheld_;
    std::map<std::string, KeyPair> governor_keys_;
    std::set<std::string> enrolled_;
    std::map<std::pair<std::string, std::string>, RegistryEntry> registry_;
    std::vector<std::pair<std::string, std::string>> registry_order_;
    std::map<std::string, Flop> cumulative_;
    std::map<std::string, LicenseGrant> grants_;
    uint64_t grant_counter_ = 0;
};

}  // namespace gateward
