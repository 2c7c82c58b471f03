#include "gateward/policy.hpp"

#include "gateward/canonical.hpp"
#include "gateward/errors.hpp"

namespace gateward::policy {

const char* safety_case_kind_name(SafetyCaseKind k) {
    switch (k) {
        case SafetyCaseKind::compute_below_threshold: return "compute_below_threshold";
        case SafetyCaseKind::weak: return "weak";
        case SafetyCaseKind::narrow: return "narrow";
        case SafetyCaseKind::passive: return "passive";
        case SafetyCaseKind::guaranteed_safe: return "guaranteed_safe";
        case SafetyCaseKind::regulatory_approval: return "regulatory_approval";
    }
    return "?";
}

std::optional<SafetyCaseKind> safety_case_kind_from_name(const std::string& name) {
    for (auto k : {SafetyCaseKind::compute_below_threshold, SafetyCaseKind::weak,
                   SafetyCaseKind::narrow, SafetyCaseKind::passive,
                   SafetyCaseKind::guaranteed_safe, SafetyCaseKind::regulatory_approval}) {
        if (name == safety_case_kind_name(k)) return k;
    }
    return std::nullopt;
}

const char* tier_name(Tier t) {
    switch (t) {
        case Tier::rt0: return "RT-0";
        case Tier::rt1: return "RT-1";
        case Tier::rt2: return "RT-2";
        case Tier::rt3: return "RT-3";
        case Tier::rt4: return "RT-4";
    }
    return "?";
}

const char* harbor_name(HarborKind h) {
    switch (h) {
        case HarborKind::compute_below_threshold: return "compute_below_threshold";
        case HarborKind::weak: return "weak";
        case HarborKind::narrow: return "narrow";
        case HarborKind::passive: return "passive";
        case HarborKind::guaranteed_safe: return "guaranteed_safe";
        case HarborKind::regulatory_approval: return "regulatory_approval";
    }
    return "?";
}

namespace {

Strength strength_from_json(const nlohmann::json& j, const char* field) {
    const std::string v = j.at(field).get<std::string>();
    if (v == "weak") return Strength::weak;
    if (v == "strong") return Strength::strong;
    fail(Errc::schema_violation, std::string("profile.") + field + " must be weak|strong");
}

const char* strength_name(Strength s) { return s == Strength::strong ? "strong" : "weak"; }

} // namespace

nlohmann::json SystemDossier::to_json() const {
    nlohmann::json j{
        {"model_id", model_id},
        {"profile",
         {{"autonomy", strength_name(profile.autonomy)},
          {"generality", strength_name(profile.generality)},
          {"intelligence", strength_name(profile.intelligence)}}},
        {"training_compute", flop_to_json(training_compute)},
        {"max_inference_rate", flop_to_json(max_inference_rate)},
        {"registered", registered},
    };
    if (safety_case) {
        nlohmann::json sc{
            {"kind", safety_case_kind_name(safety_case->kind)},
            {"approved_by", safety_case->approved_by},
            {"evidence", safety_case->evidence},
        };
        if (safety_case->bounded_risk) sc["bounded_risk"] = *safety_case->bounded_risk;
        j["safety_case"] = std::move(sc);
    }
    return j;
}

SystemDossier SystemDossier::from_json(const nlohmann::json& j) {
    SystemDossier d;
    try {
        d.model_id = j.at("model_id").get<std::string>();
        const auto& profile = j.at("profile");
        d.profile.autonomy = strength_from_json(profile, "autonomy");
        d.profile.generality = strength_from_json(profile, "generality");
        d.profile.intelligence = strength_from_json(profile, "intelligence");
        d.training_compute = flop_from_json(j.at("training_compute"));
        d.max_inference_rate = flop_from_json(j.at("max_inference_rate"));
        d.registered = j.value("registered", false);
        if (j.contains("safety_case") && !j["safety_case"].is_null()) {
            const auto& sc = j["safety_case"];
            SafetyCase parsed;
            const auto kind = safety_case_kind_from_name(sc.at("kind").get<std::string>());
            if (!kind) fail(Errc::schema_violation, "safety_case.kind unrecognized");
            parsed.kind = *kind;
            parsed.approved_by = sc.value("approved_by", std::string());
            if (sc.contains("bounded_risk")) parsed.bounded_risk = sc["bounded_risk"].get<double>();
            parsed.evidence = sc.value("evidence", nlohmann::json::object());
            d.safety_case = std::move(parsed);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::schema_violation, std::string("dossier: ") + e.what());
    }
    return d;
}

nlohmann::json PolicyConfig::to_json() const {
    return nlohmann::json{
        {"training_cap", flop_to_json(training_cap)},
        {"inference_cap", flop_to_json(inference_cap)},
        {"registration_flop_threshold", flop_to_json(registration_flop_threshold)},
        {"registration_rate_threshold", flop_to_json(registration_rate_threshold)},
        {"harbor_flop_threshold", flop_to_json(harbor_flop_threshold)},
        {"harbor_rate_threshold", flop_to_json(harbor_rate_threshold)},
        {"cluster_cap", flop_to_json(cluster_cap)},
        {"quota_quantum", flop_to_json(quota_quantum)},
        {"negligible_risk", negligible_risk},
        {"joules_per_flop", joules_per_flop},
        {"currency_per_flop", currency_per_flop},
        {"rt1_deployment_risk_flag", rt1_deployment_risk_flag},
    };
}

PolicyConfig PolicyConfig::from_json(const nlohmann::json& j) {
    PolicyConfig c;
    try {
        if (j.contains("training_cap")) c.training_cap = flop_from_json(j["training_cap"]);
        if (j.contains("inference_cap")) c.inference_cap = flop_from_json(j["inference_cap"]);
        if (j.contains("registration_flop_threshold"))
            c.registration_flop_threshold = flop_from_json(j["registration_flop_threshold"]);
        if (j.contains("registration_rate_threshold"))
            c.registration_rate_threshold = flop_from_json(j["registration_rate_threshold"]);
        if (j.contains("harbor_flop_threshold"))
            c.harbor_flop_threshold = flop_from_json(j["harbor_flop_threshold"]);
        if (j.contains("harbor_rate_threshold"))
            c.harbor_rate_threshold = flop_from_json(j["harbor_rate_threshold"]);
        if (j.contains("cluster_cap")) c.cluster_cap = flop_from_json(j["cluster_cap"]);
        if (j.contains("quota_quantum")) c.quota_quantum = flop_from_json(j["quota_quantum"]);
        if (j.contains("negligible_risk")) c.negligible_risk = j["negligible_risk"].get<double>();
        if (j.contains("joules_per_flop")) c.joules_per_flop = j["joules_per_flop"].get<double>();
        if (j.contains("currency_per_flop"))
            c.currency_per_flop = j["currency_per_flop"].get<double>();
        if (j.contains("rt1_deployment_risk_flag"))
            c.rt1_deployment_risk_flag = j["rt1_deployment_risk_flag"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::schema_violation, std::string("policy config: ") + e.what());
    }
    c.validate();
    return c;
}

void PolicyConfig::validate() const {
    // Safe-harbor thresholds sit at least 10x below the caps.
    if (harbor_flop_threshold * 10 > training_cap)
        fail(Errc::invalid_policy, "harbor_flop_threshold must be <= training_cap / 10");
    if (harbor_rate_threshold * 10 > inference_cap)
        fail(Errc::invalid_policy, "harbor_rate_threshold must be <= inference_cap / 10");
}

namespace {

void require_complete(const SystemDossier& d) {
    if (d.model_id.empty()) fail(Errc::incomplete_dossier, "dossier lacks model_id");
}

} // namespace

TierRuling classify_tier(const SystemDossier& dossier, const PolicyConfig& config) {
    require_complete(dossier);
    TierRuling ruling;
    const bool training_breach = dossier.training_compute > config.training_cap;
    const bool rate_breach = dossier.max_inference_rate > config.inference_cap;
    if (training_breach || rate_breach) {
        ruling.tier = Tier::rt4;
        ruling.training_requirements = {"prohibited pending internationally agreed lift of compute cap"};
        ruling.deployment_requirements = {"prohibited pending internationally agreed lift of compute cap"};
        if (training_breach)
            ruling.trail.push_back("tier table row RT-4: training compute " +
                                   dossier.training_compute.str() + " exceeds cap " +
                                   config.training_cap.str());
        if (rate_breach)
            ruling.trail.push_back("tier table row RT-4: inference rate " +
                                   dossier.max_inference_rate.str() + " flop/s exceeds cap " +
                                   config.inference_cap.str());
        return ruling;
    }
    const int strong = dossier.profile.strong_count();
    switch (strong) {
        case 0:
            ruling.tier = Tier::rt0;
            ruling.trail.push_back("tier table row RT-0: weak in autonomy, generality, and intelligence");
            break;
        case 1:
            ruling.tier = Tier::rt1;
            if (config.rt1_deployment_risk_flag)
                ruling.deployment_requirements = {
                    "safety case approved by national authorities wherever the model can be used"};
            ruling.trail.push_back("tier table row RT-1: strong in one of autonomy, generality, intelligence");
            break;
        case 2:
            ruling.tier = Tier::rt2;
            ruling.training_requirements = {"registration with national authority"};
            ruling.deployment_requirements = {
                "safety case bounding risk of major harm below authorized levels",
                "independent safety audits with black-box and white-box redteaming"};
            ruling.trail.push_back("tier table row RT-2: strong in two of autonomy, generality, intelligence");
            break;
        default:
            ruling.tier = Tier::rt3;
            ruling.training_requirements = {"pre-approval of safety and security plan by national authority"};
            ruling.deployment_requirements = {
                "safety case guaranteeing bounded risk of major harm below authorized levels",
                "required specifications: cybersecurity, controllability, non-removable killswitch, "
                "alignment with human values, robustness to malicious use"};
            ruling.trail.push_back("tier table row RT-3: strong in autonomy, generality, and intelligence");
            break;
    }
    return ruling;
}

CapDecision check_caps(Flop projected_training, const Rate& projected_rate,
                       const PolicyConfig& config) {
    CapDecision decision;
    if (projected_training > config.training_cap) {
        decision.allowed = false;
        decision.reason = "training_cap";
    } else if (rate_exceeds(projected_rate, config.inference_cap)) {
        decision.allowed = false;
        decision.reason = "inference_cap";
    }
    return decision;
}

std::set<HarborKind> check_safe_harbor(const SystemDossier& dossier,
                                       const PolicyConfig& config) {
    require_complete(dossier);
    std::set<HarborKind> harbors;
    // Compute harbor is mechanical: both quantities strictly below threshold.
    if (dossier.training_compute < config.harbor_flop_threshold &&
        dossier.max_inference_rate < config.harbor_rate_threshold)
        harbors.insert(HarborKind::compute_below_threshold);
    if (dossier.safety_case && dossier.safety_case->approved()) {
        const SafetyCase& sc = *dossier.safety_case;
        switch (sc.kind) {
            case SafetyCaseKind::weak:
                if (dossier.profile.intelligence == Strength::weak)
                    harbors.insert(HarborKind::weak);
                break;
            case SafetyCaseKind::narrow:
                if (dossier.profile.generality == Strength::weak)
                    harbors.insert(HarborKind::narrow);
                break;
            case SafetyCaseKind::passive:
                if (dossier.profile.autonomy == Strength::weak)
                    harbors.insert(HarborKind::passive);
                break;
            case SafetyCaseKind::guaranteed_safe:
                if (sc.bounded_risk && *sc.bounded_risk <= config.negligible_risk)
                    harbors.insert(HarborKind::guaranteed_safe);
                break;
            case SafetyCaseKind::regulatory_approval:
                harbors.insert(HarborKind::regulatory_approval);
                break;
            case SafetyCaseKind::compute_below_threshold:
                break; // mechanical check above is authoritative
        }
    }
    return harbors;
}

nlohmann::json LiabilityRuling::to_json() const {
    return nlohmann::json{
        {"regime", regime == Regime::strict_joint_and_several ? "strict_joint_and_several"
                                                              : "fault_based"},
        {"parties", parties},
        {"personal_liability", personal_liability},
        {"trail", trail},
    };
}

LiabilityRuling evaluate_liability(const SystemDossier& dossier,
                                   const std::set<HarborKind>& harbors,
                                   const Incident& incident) {
    require_complete(dossier);
    if (incident.parties.empty())
        fail(Errc::no_parties_named, "incident must name at least one responsible party");
    LiabilityRuling ruling;
    ruling.parties = incident.parties;
    if (dossier.profile.all_strong() && harbors.empty()) {
        ruling.regime = Regime::strict_joint_and_several;
        ruling.trail.push_back(
            "liability rule: strong in all of autonomy, generality, intelligence with no safe "
            "harbor; strict joint-and-several liability across the value chain");
    } else {
        ruling.regime = Regime::fault_based;
        if (!dossier.profile.all_strong())
            ruling.trail.push_back("liability rule: outside the strong-autonomy/generality/"
                                   "intelligence triple intersection; fault-based liability");
        for (HarborKind h : harbors)
            ruling.trail.push_back(std::string("safe harbor applied: ") + harbor_name(h));
    }
    if (incident.gross_negligence) {
        ruling.personal_liability = true;
        ruling.trail.push_back(
            "gross negligence: personal liability marker for executives and board members");
    }
    return ruling;
}

InjunctionVerdict injunction_check(const SystemDossier& dossier, const PolicyConfig& config) {
    require_complete(dossier);
    const TierRuling tier = classify_tier(dossier, config);
    if (tier.tier == Tier::rt4) return InjunctionVerdict::injunction_recommended;
    const bool has_approved_plan =
        dossier.safety_case && dossier.safety_case->approved();
    if (tier.tier == Tier::rt3 && !has_approved_plan)
        return InjunctionVerdict::injunction_recommended;
    const bool registration_mandatory =
        dossier.training_compute > config.registration_flop_threshold ||
        dossier.max_inference_rate > config.registration_rate_threshold;
    if (registration_mandatory && !dossier.registered)
        return InjunctionVerdict::injunction_recommended;
    return InjunctionVerdict::none;
}

} // namespace gateward::policy
