#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gateward/flop.hpp"

namespace gateward::policy {

enum class Strength { weak, strong };

/// Assessed capability flags. Assessment is a human/auditor judgment and
/// arrives as input; the engine only decides consequences.
struct CapabilityProfile {
    Strength autonomy = Strength::weak;
    Strength generality = Strength::weak;
    Strength intelligence = Strength::weak;

    int strong_count() const {
        return (autonomy == Strength::strong) + (generality == Strength::strong) +
               (intelligence == Strength::strong);
    }
    bool all_strong() const { return strong_count() == 3; }
};

enum class SafetyCaseKind {
    compute_below_threshold,
    weak,
    narrow,
    passive,
    guaranteed_safe,
    regulatory_approval,
};

const char* safety_case_kind_name(SafetyCaseKind k);
std::optional<SafetyCaseKind> safety_case_kind_from_name(const std::string& name);

struct SafetyCase {
    SafetyCaseKind kind = SafetyCaseKind::compute_below_threshold;
    std::string approved_by; // empty: not approved by any auditor
    std::optional<double> bounded_risk; // major harms per deployment-year
    nlohmann::json evidence = nlohmann::json::object();

    bool approved() const { return !approved_by.empty(); }
};

struct SystemDossier {
    std::string model_id;
    CapabilityProfile profile;
    Flop training_compute;
    Flop max_inference_rate; // flop per second
    std::optional<SafetyCase> safety_case;
    bool registered = false;

    nlohmann::json to_json() const;
    static SystemDossier from_json(const nlohmann::json& j); // throws SchemaViolation
};

enum class Tier { rt0, rt1, rt2, rt3, rt4 };

const char* tier_name(Tier t);

/// All numeric policy knobs. Caps and thresholds compare as exact integers:
/// a value equal to a cap is allowed, strictly greater violates; safe-harbor
/// thresholds demand strictly-less.
struct PolicyConfig {
    Flop training_cap = Flop::pow10(27);
    Flop inference_cap = Flop::pow10(20); // flop per second
    Flop registration_flop_threshold = Flop::pow10(25);
    Flop registration_rate_threshold = Flop::pow10(18);
    Flop harbor_flop_threshold = Flop::pow10(26);
    Flop harbor_rate_threshold = Flop::pow10(19);
    Flop cluster_cap = Flop::pow10(18); // flop/s aggregate per connected cluster
    Flop quota_quantum = Flop::pow10(16);
    double negligible_risk = 1e-6; // bounded_risk acceptance level
    double joules_per_flop = 1e-12;
    double currency_per_flop = 1e-15;
    bool rt1_deployment_risk_flag = false; // scenario-level "based on risk and use"

    nlohmann::json to_json() const;
    static PolicyConfig from_json(const nlohmann::json& j); // partial objects allowed
    void validate() const; // throws InvalidPolicy (harbor thresholds vs caps)
};

struct TierRuling {
    Tier tier = Tier::rt0;
    std::vector<std::string> training_requirements;
    std::vector<std::string> deployment_requirements;
    std::vector<std::string> trail; // human-readable rule citations
};

/// Risk-tier table: RT-k for k strong flags, forced RT-4 on any cap breach.
TierRuling classify_tier(const SystemDossier& dossier, const PolicyConfig& config);

struct CapDecision {
    bool allowed = true;
    std::string reason; // "training_cap" or "inference_cap" when denied
};

CapDecision check_caps(Flop projected_training, const Rate& projected_rate,
                       const PolicyConfig& config);

enum class HarborKind {
    compute_below_threshold,
    weak,
    narrow,
    passive,
    guaranteed_safe,
    regulatory_approval,
};

const char* harbor_name(HarborKind h);

std::set<HarborKind> check_safe_harbor(const SystemDossier& dossier,
                                       const PolicyConfig& config);

enum class Regime { strict_joint_and_several, fault_based };

struct Incident {
    std::vector<std::string> parties; // responsible value-chain parties
    bool gross_negligence = false;
    std::string description;
};

struct LiabilityRuling {
    Regime regime = Regime::fault_based;
    std::vector<std::string> parties;
    bool personal_liability = false;
    std::vector<std::string> trail;

    nlohmann::json to_json() const;
};

/// Strict joint-and-several exactly at the all-strong, zero-harbor point;
/// fault-based everywhere else. Gross negligence adds the personal marker.
LiabilityRuling evaluate_liability(const SystemDossier& dossier,
                                   const std::set<HarborKind>& harbors,
                                   const Incident& incident);

enum class InjunctionVerdict { none, injunction_recommended };

/// Injunction when the tier is RT-4, when RT-3 lacks an approved safety
/// plan, or when a mandatory registration is missing.
InjunctionVerdict injunction_check(const SystemDossier& dossier, const PolicyConfig& config);

} // namespace gateward::policy
