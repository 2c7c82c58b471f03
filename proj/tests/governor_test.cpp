#include <doctest.h>

#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gateward/errors.hpp"
#include "gateward/governor.hpp"

using namespace gateward;

namespace {

struct Rig {
    KeyDirectory keys;
    std::unique_ptr<GovernorService> gov;
    std::unique_ptr<Fabric> fabric;

    explicit Rig(policy::PolicyConfig config = {}) {
        MultiSigPolicy policy;
        policy.policy_id = "policy-1";
        policy.governors = {"gov-1", "gov-2", "gov-3"};
        policy.threshold = 2;
        gov = std::make_unique<GovernorService>(7, keys, policy, config);
        fabric = std::make_unique<Fabric>(7, keys, FabricConfig{}, &gov->policy(),
                                          &gov->withheld());
    }

    void chip(const std::string& id, const char* capacity) {
        fabric->provision_chip(id, Flop::parse(capacity), {0, 0});
        gov->enroll_chip(id);
    }

    RegistryEntry entry(const std::string& model, const char* training,
                        const char* rate, const std::string& quarter = "2026Q1") const {
        RegistryEntry e;
        e.model_id = model;
        e.developer_id = "lab-1";
        e.training_compute = Flop::parse(training);
        e.max_inference_rate_per_s = Flop::parse(rate);
        e.quarter = quarter;
        return e;
    }
};

}  // namespace

TEST_CASE("registration is mandatory above either threshold") {
    const Rig rig;
    // Thresholds: 1e25 flop, 1e18 flop/s; strictly above requires filing.
    CHECK(rig.gov->registration_required(rig.entry("m", "3e25", "1e15")));
    CHECK(rig.gov->registration_required(rig.entry("m", "1e20", "2e18")));
    CHECK_FALSE(rig.gov->registration_required(rig.entry("m", "1e25", "1e18")));
    CHECK_FALSE(rig.gov->registration_required(rig.entry("m", "9e24", "9e17")));
}

TEST_CASE("the registry accepts filings and refuses duplicates") {
    Rig rig;
    const std::string receipt = rig.gov->register_training_run(rig.entry("model-a", "3e25", "1e15"));
    CHECK(receipt == "receipt-model-a-2026Q1");
    CHECK(rig.gov->registered("model-a"));
    CHECK_FALSE(rig.gov->registered("model-b"));

    const auto found = rig.gov->query("model-a", "2026Q1");
    REQUIRE(found.has_value());
    CHECK(found->training_compute == Flop::parse("3e25"));
    CHECK_FALSE(rig.gov->query("model-a", "2026Q2").has_value());

    // Same model, same quarter: duplicate. A later quarter is a new filing.
    try {
        rig.gov->register_training_run(rig.entry("model-a", "3e25", "1e15"));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_registration);
    }
    CHECK_NOTHROW(rig.gov->register_training_run(
        rig.entry("model-a", "4e25", "1e15", "2026Q2")));
    CHECK(rig.gov->entries().size() == 2);

    // Voluntary filings below the thresholds are accepted too.
    CHECK_NOTHROW(rig.gov->register_training_run(rig.entry("small", "9e24", "1e10")));

    RegistryEntry incomplete = rig.entry("x", "1", "1");
    incomplete.developer_id.clear();
    CHECK_THROWS_AS(rig.gov->register_training_run(incomplete), Error);
}

TEST_CASE("licenses are granted while the projection stays within the cap") {
    Rig rig;
    rig.chip("chip-a", "1e24");

    // 9e26 across earlier quarters, then 5e25 more: projection 9.5e26 <= 1e27.
    const LicenseDecision first = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop::parse("9e26"), 0, seconds(1'000), 0);
    REQUIRE(first.granted);
    CHECK(first.grant.quota == Flop::parse("9e26"));
    CHECK(first.grant.grant_id == "grant-1");
    CHECK(static_cast<int>(first.grant.signatures.size()) == 2);  // threshold, not all
    CHECK(rig.gov->cumulative_granted("model-a") == Flop::parse("9e26"));
    CHECK(rig.gov->has_grant("grant-1"));

    const LicenseDecision second = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop::parse("5e25"), 0, seconds(1'000), 0);
    CHECK(second.granted);
    CHECK(rig.gov->cumulative_granted("model-a") == Flop::parse("9.5e26"));

    // 9.5e26 + 6e25 = 1.01e27 > cap: denied, cumulative unchanged.
    const LicenseDecision third = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop::parse("6e25"), 0, seconds(1'000), 0);
    CHECK_FALSE(third.granted);
    CHECK(third.error == "CapWouldBeExceeded");
    CHECK(third.reason == "training_cap");
    CHECK(third.projected == Flop::parse("1.01e27"));
    CHECK(rig.gov->cumulative_granted("model-a") == Flop::parse("9.5e26"));

    // Topping up to exactly the cap is allowed.
    const LicenseDecision fourth = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop::parse("5e25"), 0, seconds(1'000), 0);
    CHECK(fourth.granted);
    CHECK(rig.gov->cumulative_granted("model-a") == Flop::parse("1e27"));
}

TEST_CASE("grants need the signature threshold among willing governors") {
    Rig rig;
    rig.chip("chip-a", "1e24");

    // One refusal out of three still meets a 2-of-3 threshold.
    const LicenseDecision ok = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop(100), 0, seconds(10), 0, false, {"gov-2"});
    REQUIRE(ok.granted);
    CHECK(ok.grant.signatures.size() == 2);
    for (const auto& [signer, sig] : ok.grant.signatures) CHECK(signer != "gov-2");

    // Two refusals leave only one signer: denied.
    const LicenseDecision denied = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop(100), 0, seconds(10), 0, false, {"gov-1", "gov-3"});
    CHECK_FALSE(denied.granted);
    CHECK(denied.error == "InsufficientSignatures");
}

TEST_CASE("unenrolled and withheld chips cannot be licensed") {
    Rig rig;
    rig.chip("chip-a", "1e24");

    const LicenseDecision unknown = rig.gov->request_license(
        "model-a", {"chip-a", "chip-ghost"}, Flop(100), 0, seconds(10), 0);
    CHECK_FALSE(unknown.granted);
    CHECK(unknown.error == "UnknownChip");

    rig.gov->withheld().withhold_chip("chip-a");
    const LicenseDecision withheld = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop(100), 0, seconds(10), 0);
    CHECK_FALSE(withheld.granted);
    CHECK(withheld.error == "Withheld");
}

TEST_CASE("during the pause the whole declared plan is projected") {
    Rig rig;
    rig.chip("chip-a", "1e24");

    // Chunk of 1e26 from a declared 1.1e27 plan: the plan might exceed the
    // cap, so the pause refuses it outright.
    const LicenseDecision denied = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop::parse("1e26"), 0, seconds(10), 0,
        /*pause_phase=*/true, {}, /*plan_hint=*/Flop::parse("1.1e27"));
    CHECK_FALSE(denied.granted);
    CHECK(denied.error == "Pause");
    CHECK(denied.reason == "pause");
    CHECK(denied.projected == Flop::parse("1.1e27"));

    // A plan inside the cap clears the same gate.
    const LicenseDecision ok = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop::parse("1e26"), 0, seconds(10), 0,
        /*pause_phase=*/true, {}, Flop::parse("9e26"));
    CHECK(ok.granted);
}

TEST_CASE("inference quotas do not consume the training budget") {
    Rig rig;
    rig.chip("chip-a", "1e24");
    const LicenseDecision inference = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop::parse("1e26"), 0, seconds(10), 0, false, {},
        Flop(0), /*counts_toward_training=*/false);
    CHECK(inference.granted);
    CHECK(rig.gov->cumulative_granted("model-a").is_zero());
    CHECK(inference.projected.is_zero());
}

TEST_CASE("withhold targets grants or chips and is idempotent") {
    Rig rig;
    rig.chip("chip-a", "1e24");
    const LicenseDecision d = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop(100), 0, seconds(10), 0);
    REQUIRE(d.granted);

    CHECK(rig.gov->withhold("gov-1", d.grant.grant_id));
    CHECK_FALSE(rig.gov->withhold("gov-2", d.grant.grant_id));  // already held
    CHECK(rig.gov->withheld().grant_withheld(d.grant.grant_id));

    CHECK(rig.gov->withhold("gov-1", "chip-a"));
    CHECK_FALSE(rig.gov->withhold("gov-1", "chip-a"));
    CHECK(rig.gov->withheld().chip_withheld("chip-a"));

    try {
        rig.gov->withhold("gov-1", "no-such-thing");
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_target);
    }
    try {
        rig.gov->withhold("lab-1", "chip-a");
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::invalid_policy);
    }
}

TEST_CASE("a withheld grant reads as exhaustion once balance drains") {
    Rig rig;
    rig.chip("chip-a", "1e15");
    const LicenseDecision d = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop::parse("1e15"), 0, seconds(1'000), 0);
    REQUIRE(d.granted);

    // Spend the whole quota, then withhold the grant.
    CHECK(rig.fabric->execute("chip-a", Flop::parse("1e15"), seconds(1), d.grant,
                              seconds(1)).status == ExecStatus::ok);
    rig.gov->withhold("gov-1", d.grant.grant_id);

    const ExecutionRecord r =
        rig.fabric->execute("chip-a", Flop(1), seconds(1), d.grant, seconds(2));
    CHECK(r.status == ExecStatus::license_exhausted);
    CHECK(rig.fabric->chip("chip-a").halted);
}

TEST_CASE("a frozen run stops within its prepaid window") {
    // Balance 1e15 at 1e15 flop/s: whatever remains after the freeze drains
    // in at most one second.
    Rig rig;
    rig.chip("chip-a", "1e15");
    const LicenseDecision d = rig.gov->request_license(
        "model-a", {"chip-a"}, Flop::parse("1e15"), 0, seconds(1'000), 0);
    REQUIRE(d.granted);
    CHECK(rig.fabric->install_grant("chip-a", d.grant, 0).ok);
    rig.fabric->start_run("run-1", "chip-a", "model-a", Flop::parse("1e16"), 0);

    rig.gov->withhold("gov-2", "chip-a");
    const auto halts = rig.fabric->freeze_chip("chip-a", 300'000);
    REQUIRE(halts.size() == 1);
    CHECK(halts[0].second <= seconds(1));

    rig.fabric->settle_run("run-1", halts[0].second);
    CHECK(rig.fabric->run("run-1").finished);
    CHECK(rig.fabric->chip("chip-a").halted);
    CHECK(rig.fabric->run("run-1").settled <= Flop::parse("1e15"));
}

namespace {

AttestationProof sample_proof(const Rig& rig, std::vector<AttestStepInput>& steps_out) {
    std::vector<AttestStepInput> steps;
    for (int i = 0; i < 5; ++i) {
        AttestStepInput s;
        s.code_hash = sha256("train-loop-v2");
        s.data_hash = sha256("shard-" + std::to_string(i));
        s.step_flop = Flop::parse("2e24");
        steps.push_back(s);
    }
    steps_out = steps;
    return build_attestation(steps, "chip-a", rig.fabric->chip("chip-a").key, Nonce{});
}

}  // namespace

TEST_CASE("attestation proofs verify end to end") {
    Rig rig;
    rig.chip("chip-a", "1e24");
    std::vector<AttestStepInput> steps;
    const AttestationProof proof = sample_proof(rig, steps);
    CHECK(proof.total_flop == Flop::parse("1e25"));
    CHECK(proof.steps.size() == 5);

    std::set<Hash32> codes{sha256("train-loop-v2")};
    std::set<Hash32> data;
    for (const auto& s : steps) data.insert(s.data_hash);

    CHECK(verify_attestation(proof, codes, data, Flop::parse("1e25"), rig.keys) ==
          AttestOutcome::ok);
}

TEST_CASE("attestation verification pinpoints each failure mode") {
    Rig rig;
    rig.chip("chip-a", "1e24");
    std::vector<AttestStepInput> steps;
    const AttestationProof good = sample_proof(rig, steps);
    std::set<Hash32> codes{sha256("train-loop-v2")};
    std::set<Hash32> data;
    for (const auto& s : steps) data.insert(s.data_hash);
    const Flop claimed = Flop::parse("1e25");

    SUBCASE("empty proof") {
        AttestationProof empty;
        CHECK(verify_attestation(empty, codes, data, Flop(0), rig.keys) ==
              AttestOutcome::empty_proof);
    }
    SUBCASE("understated step flop breaks the hash chain") {
        AttestationProof p = good;
        p.steps[2].step_flop = Flop::parse("1e24");
        CHECK(verify_attestation(p, codes, data, claimed, rig.keys) ==
              AttestOutcome::chain_mismatch);
    }
    SUBCASE("reordered steps break the chain") {
        AttestationProof p = good;
        std::swap(p.steps[1], p.steps[3]);
        CHECK(verify_attestation(p, codes, data, claimed, rig.keys) ==
              AttestOutcome::chain_mismatch);
    }
    SUBCASE("dropped step breaks the chain") {
        AttestationProof p = good;
        p.steps.pop_back();
        CHECK(verify_attestation(p, codes, data, claimed, rig.keys) ==
              AttestOutcome::chain_mismatch);
    }
    SUBCASE("claim disagreeing with the chain total") {
        CHECK(verify_attestation(good, codes, data, Flop::parse("9e24"), rig.keys) ==
              AttestOutcome::total_mismatch);
    }
    SUBCASE("tampered signature") {
        AttestationProof p = good;
        p.final_signature.signature[0] ^= 0x01;
        CHECK(verify_attestation(p, codes, data, claimed, rig.keys) ==
              AttestOutcome::bad_signature);
    }
    SUBCASE("unexpected code hash") {
        CHECK(verify_attestation(good, {sha256("train-loop-v1")}, data, claimed,
                                 rig.keys) == AttestOutcome::unexpected_code);
    }
    SUBCASE("unexpected data hash") {
        std::set<Hash32> wrong_data = data;
        wrong_data.erase(sha256("shard-3"));
        CHECK(verify_attestation(good, codes, wrong_data, claimed, rig.keys) ==
              AttestOutcome::unexpected_data);
    }
}

TEST_CASE("attestation proofs round-trip through json") {
    Rig rig;
    rig.chip("chip-a", "1e24");
    std::vector<AttestStepInput> steps;
    const AttestationProof proof = sample_proof(rig, steps);
    const AttestationProof back = AttestationProof::from_json(proof.to_json());
    CHECK(back.total_flop == proof.total_flop);
    REQUIRE(back.steps.size() == proof.steps.size());
    CHECK(back.steps[3].chain_hash == proof.steps[3].chain_hash);

    std::set<Hash32> codes{sha256("train-loop-v2")};
    std::set<Hash32> data;
    for (const auto& s : steps) data.insert(s.data_hash);
    CHECK(verify_attestation(back, codes, data, Flop::parse("1e25"), rig.keys) ==
          AttestOutcome::ok);
}

TEST_CASE("telemetry collection flags unreachable chips") {
    Rig rig;
    rig.chip("chip-a", "1e16");
    Rng rng(9);

    const TelemetryOutcome ok = rig.gov->collect_telemetry(
        *rig.fabric, "chip-a", "2026Q1", {"agency-national"}, seconds(10), rng);
    CHECK(ok.ok);
    CHECK(ok.flag.empty());
    CHECK(ok.report.signer == "chip-a");

    // Provisioned but never enrolled: the governor cannot reach it.
    rig.fabric->provision_chip("chip-dark", Flop::parse("1e16"), {0, 0});
    const TelemetryOutcome dark = rig.gov->collect_telemetry(
        *rig.fabric, "chip-dark", "2026Q1", {"agency-national"}, seconds(10), rng);
    CHECK_FALSE(dark.ok);
    CHECK(dark.flag == "NoResponse");

    // Enrolled on paper but absent from the fabric entirely.
    rig.gov->enroll_chip("chip-ghost");
    const TelemetryOutcome ghost = rig.gov->collect_telemetry(
        *rig.fabric, "chip-ghost", "2026Q1", {}, seconds(10), rng);
    CHECK_FALSE(ghost.ok);
    CHECK(ghost.flag == "NoResponse");
}

TEST_CASE("audits compare the ledger against the registry") {
    Rig rig;
    ledger::CausalGraph graph;
    ledger::ComputeNode big;
    big.node_id = "t1";
    big.kind = ledger::NodeKind::training;
    big.flop = Flop::parse("3e25");
    big.wall_time = seconds(1);
    big.model_id = "model-big";
    graph.add_node(big);

    ledger::ComputeNode small;
    small.node_id = "t2";
    small.kind = ledger::NodeKind::training;
    small.flop = Flop::parse("5e24");
    small.wall_time = seconds(2);
    small.model_id = "model-small";
    graph.add_node(small);

    // model-big exceeds 1e25 and is unregistered: flagged. model-small is
    // below the threshold: nobody asks after it.
    CHECK(rig.gov->audit_missing(graph) == std::vector<std::string>{"model-big"});

    rig.gov->register_training_run(rig.entry("model-big", "3e25", "1e15"));
    CHECK(rig.gov->audit_missing(graph).empty());

    // Declared within 1%: fine. Understated by more: flagged.
    CHECK(rig.gov->audit_declared_mismatch(graph).empty());
    Rig rig2;
    rig2.gov->register_training_run(rig2.entry("model-big", "2e25", "1e15"));
    CHECK(rig2.gov->audit_declared_mismatch(graph) ==
          std::vector<std::string>{"model-big"});
}

TEST_CASE("the registry persists as canonical json lines") {
    Rig rig;
    rig.gov->register_training_run(rig.entry("model-a", "3e25", "1e15"));
    RegistryEntry with_proof = rig.entry("model-b", "2.0105e25", "5e17", "2026Q2");
    with_proof.attestation_proof_id = "proof-9";
    rig.gov->register_training_run(with_proof);

    std::stringstream ss;
    rig.gov->save_registry(ss);

    const auto loaded = GovernorService::load_registry(ss);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].model_id == "model-a");
    CHECK(loaded[0].training_compute == Flop::parse("3e25"));
    CHECK(loaded[1].model_id == "model-b");
    CHECK(loaded[1].quarter == "2026Q2");
    CHECK(loaded[1].attestation_proof_id == "proof-9");
    CHECK(loaded[1].training_compute == Flop::parse("2.0105e25"));

    std::stringstream bad("not json at all\n");
    CHECK_THROWS_AS(GovernorService::load_registry(bad), Error);
}
