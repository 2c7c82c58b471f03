#include <doctest.h>

#include <algorithm>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "gateward/errors.hpp"
#include "gateward/fabric.hpp"
#include "gateward/rng.hpp"

using namespace gateward;

namespace {

struct Rig {
    KeyDirectory keys;
    MultiSigPolicy policy;
    std::vector<KeyPair> gov_keys;
    WithholdRegistry withheld;
    std::unique_ptr<Fabric> fabric;
    int grant_no = 0;

    explicit Rig(FabricConfig cfg = {}) {
        policy.policy_id = "policy-1";
        policy.governors = {"gov-1", "gov-2", "gov-3"};
        policy.threshold = 2;
        for (const auto& gov : policy.governors) {
            gov_keys.push_back(ed25519().keygen(sha256("governor-key/test/" + gov)));
            keys.put(gov, gov_keys.back().public_key);
        }
        fabric = std::make_unique<Fabric>(7, keys, cfg, &policy, &withheld);
    }

    LicenseGrant grant(const std::vector<std::string>& chips, Flop quota,
                       int signers = 2, Micros from = 0, Micros to = seconds(100'000)) {
        LicenseGrant g;
        g.grant_id = "grant-" + std::to_string(++grant_no);
        g.chip_ids = chips;
        std::sort(g.chip_ids.begin(), g.chip_ids.end());
        g.quota = quota;
        g.valid_from = from;
        g.valid_to = to;
        g.policy_id = policy.policy_id;
        for (int i = 0; i < signers; ++i)
            g.add_signature(policy.governors[size_t(i)], gov_keys[size_t(i)]);
        return g;
    }

    SignedEnvelope permit(const std::string& a, const std::string& b,
                          int governor = 0) const {
        return make_envelope(ed25519(), Fabric::link_permit_payload(a, b),
                             policy.governors[size_t(governor)],
                             gov_keys[size_t(governor)].private_key, Nonce{});
    }
};

}  // namespace

TEST_CASE("provisioning registers the chip and its key") {
    Rig rig;
    const Chip& c = rig.fabric->provision_chip("chip-a", Flop::parse("1e16"), {10, 20});
    CHECK(c.chip_id == "chip-a");
    CHECK(c.capacity_per_s == Flop::parse("1e16"));
    CHECK(c.balance.is_zero());
    CHECK_FALSE(c.halted);
    CHECK(rig.keys.contains("chip-a"));
    CHECK(rig.fabric->has_chip("chip-a"));

    // A fresh chip is its own cluster.
    CHECK(rig.fabric->cluster_of("chip-a") == std::vector<std::string>{"chip-a"});
    CHECK(rig.fabric->cluster_rate("chip-a") == Flop::parse("1e16"));
}

TEST_CASE("provisioning rejects zero capacity and duplicate ids") {
    Rig rig;
    try {
        rig.fabric->provision_chip("chip-a", Flop(0), {0, 0});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::invalid_capacity);
    }
    rig.fabric->provision_chip("chip-a", Flop(1), {0, 0});
    try {
        rig.fabric->provision_chip("chip-a", Flop(1), {0, 0});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_id);
    }
}

TEST_CASE("links need mutual allow-listing") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop(100), {0, 0}, {"chip-b"});
    rig.fabric->provision_chip("chip-b", Flop(100), {0, 0});  // does not allow a
    rig.fabric->provision_chip("chip-c", Flop(100), {0, 0}, {"chip-a"});

    CHECK(rig.fabric->connect("chip-a", "chip-b") == LinkStatus::not_allow_listed);
    CHECK_FALSE(rig.fabric->linked("chip-a", "chip-b"));

    // One-sided in the other direction fails too.
    CHECK(rig.fabric->connect("chip-a", "chip-c") == LinkStatus::not_allow_listed);

    rig.fabric->allow("chip-b", "chip-a");
    CHECK(rig.fabric->connect("chip-a", "chip-b") == LinkStatus::linked);
    CHECK(rig.fabric->linked("chip-a", "chip-b"));
    CHECK(rig.fabric->linked("chip-b", "chip-a"));
    CHECK(rig.fabric->connect("chip-a", "chip-b") == LinkStatus::linked);  // idempotent
}

TEST_CASE("a chain of small chips aggregates its cluster rate") {
    Rig rig;
    rig.fabric->provision_chip("c1", Flop::parse("1e15"), {0, 0}, {"c2"});
    rig.fabric->provision_chip("c2", Flop::parse("2e15"), {0, 0}, {"c1", "c3"});
    rig.fabric->provision_chip("c3", Flop::parse("3e15"), {0, 0}, {"c2"});
    CHECK(rig.fabric->connect("c1", "c2") == LinkStatus::linked);
    CHECK(rig.fabric->connect("c2", "c3") == LinkStatus::linked);

    const std::vector<std::string> expect{"c1", "c2", "c3"};
    CHECK(rig.fabric->cluster_of("c2") == expect);
    CHECK(rig.fabric->cluster_of("c1") == expect);
    CHECK(rig.fabric->cluster_rate("c1") == Flop::parse("6e15"));
    CHECK(rig.fabric->cluster_rate("c3") == Flop::parse("6e15"));
}

TEST_CASE("one hundred 1e16 chips exactly fill the 1e18 cluster cap") {
    Rig rig;
    std::vector<std::string> ids;
    for (int i = 0; i < 100; ++i) ids.push_back("n" + std::to_string(i));
    for (const auto& id : ids) {
        std::set<std::string> allow(ids.begin(), ids.end());
        allow.insert("tip");
        rig.fabric->provision_chip(id, Flop::parse("1e16"), {0, 0}, allow);
    }
    for (int i = 1; i < 100; ++i)
        CHECK(rig.fabric->connect(ids[size_t(i - 1)], ids[size_t(i)]) ==
              LinkStatus::linked);
    CHECK(rig.fabric->cluster_rate("n0") == Flop::parse("1e18"));  // equal: allowed

    // One more chip of any size pushes the aggregate past the cap.
    rig.fabric->provision_chip("tip", Flop(1), {0, 0},
                               std::set<std::string>(ids.begin(), ids.end()));
    CHECK(rig.fabric->connect("n99", "tip") == LinkStatus::cluster_cap_exceeded);
    CHECK_FALSE(rig.fabric->linked("n99", "tip"));
    CHECK(rig.fabric->cluster_rate("n0") == Flop::parse("1e18"));  // unchanged
    CHECK(rig.fabric->cluster_of("tip") == std::vector<std::string>{"tip"});
}

TEST_CASE("a refused merge leaves both clusters untouched") {
    Rig rig;
    rig.fabric->provision_chip("big-a", Flop::parse("6e17"), {0, 0}, {"big-b"});
    rig.fabric->provision_chip("big-b", Flop::parse("6e17"), {0, 0}, {"big-a"});
    CHECK(rig.fabric->connect("big-a", "big-b") == LinkStatus::cluster_cap_exceeded);
    CHECK(rig.fabric->cluster_rate("big-a") == Flop::parse("6e17"));
    CHECK(rig.fabric->cluster_rate("big-b") == Flop::parse("6e17"));
    CHECK_FALSE(rig.fabric->linked("big-a", "big-b"));
}

TEST_CASE("governor permits authorize over-cap clusters and revocation tears them down") {
    Rig rig;
    rig.fabric->provision_chip("big-a", Flop::parse("6e17"), {0, 0}, {"big-b"});
    rig.fabric->provision_chip("big-b", Flop::parse("6e17"), {0, 0}, {"big-a"});

    const SignedEnvelope permit = rig.permit("big-a", "big-b");
    CHECK(rig.fabric->connect("big-a", "big-b", &permit) == LinkStatus::linked);
    CHECK(rig.fabric->cluster_rate("big-a") == Flop::parse("1.2e18"));

    rig.fabric->revoke_permit("big-a", "big-b");
    CHECK_FALSE(rig.fabric->linked("big-a", "big-b"));
    CHECK(rig.fabric->cluster_rate("big-a") == Flop::parse("6e17"));
}

TEST_CASE("permits are rejected unless signed by a listed governor") {
    Rig rig;
    rig.fabric->provision_chip("big-a", Flop::parse("6e17"), {0, 0}, {"big-b"});
    rig.fabric->provision_chip("big-b", Flop::parse("6e17"), {0, 0}, {"big-a"});

    SUBCASE("stranger's signature") {
        const KeyPair outsider = ed25519().keygen(sha256("outsider"));
        rig.keys.put("outsider", outsider.public_key);
        const SignedEnvelope bad =
            make_envelope(ed25519(), Fabric::link_permit_payload("big-a", "big-b"),
                          "outsider", outsider.private_key, Nonce{});
        CHECK_FALSE(rig.fabric->register_permit(bad));
        CHECK(rig.fabric->connect("big-a", "big-b", &bad) ==
              LinkStatus::cluster_cap_exceeded);
    }
    SUBCASE("tampered payload") {
        SignedEnvelope permit = rig.permit("big-a", "big-b");
        permit.payload_bytes[10] ^= 0x01;
        CHECK_FALSE(rig.fabric->register_permit(permit));
    }
    SUBCASE("a permit for the wrong link does not help") {
        const SignedEnvelope other = rig.permit("big-a", "big-z");
        CHECK(rig.fabric->register_permit(other));
        CHECK(rig.fabric->connect("big-a", "big-b", &other) ==
              LinkStatus::cluster_cap_exceeded);
    }
}

TEST_CASE("every link of an over-cap cluster needs its own permit") {
    Rig rig;
    const std::set<std::string> all{"w1", "w2", "w3"};
    for (const char* id : {"w1", "w2", "w3"})
        rig.fabric->provision_chip(id, Flop::parse("5e17"), {0, 0}, all);

    // w1-w2 at 1e18 is allowed plain (equal to cap, no permit involved).
    CHECK(rig.fabric->connect("w1", "w2") == LinkStatus::linked);

    // Attaching w3 makes 1.5e18. The new link has a permit, but the existing
    // w1-w2 link inside the would-be over-cap cluster does not: refused.
    const SignedEnvelope p23 = rig.permit("w2", "w3");
    CHECK(rig.fabric->connect("w2", "w3", &p23) == LinkStatus::cluster_cap_exceeded);

    const SignedEnvelope p12 = rig.permit("w1", "w2");
    CHECK(rig.fabric->register_permit(p12));
    CHECK(rig.fabric->connect("w2", "w3", &p23) == LinkStatus::linked);
    CHECK(rig.fabric->cluster_rate("w3") == Flop::parse("1.5e18"));
}

TEST_CASE("executing against a valid grant debits the balance") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop::parse("1e16"), {0, 0});
    const LicenseGrant g = rig.grant({"chip-a"}, Flop::parse("1e16"));

    const ExecutionRecord r1 =
        rig.fabric->execute("chip-a", Flop::parse("1e15"), seconds(1), g, seconds(1));
    CHECK(r1.status == ExecStatus::ok);
    CHECK(rig.fabric->chip("chip-a").balance == Flop::parse("9e15"));
    CHECK(rig.fabric->chip("chip-a").lifetime_executed == Flop::parse("1e15"));

    // Reinstalling the same grant does not double-credit.
    const ExecutionRecord r2 =
        rig.fabric->execute("chip-a", Flop::parse("9e15"), seconds(1), g, seconds(2));
    CHECK(r2.status == ExecStatus::ok);
    CHECK(rig.fabric->chip("chip-a").balance.is_zero());

    // Nothing left: the next attempt reads as exhaustion and halts the chip.
    const ExecutionRecord r3 =
        rig.fabric->execute("chip-a", Flop(1), seconds(1), g, seconds(3));
    CHECK(r3.status == ExecStatus::license_exhausted);
    CHECK(rig.fabric->chip("chip-a").halted);

    // A halted chip refuses everything.
    const ExecutionRecord r4 =
        rig.fabric->execute("chip-a", Flop(1), seconds(1), g, seconds(4));
    CHECK(r4.status == ExecStatus::chip_halted);
}

TEST_CASE("defective paperwork without balance is invalid, not exhaustion") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop::parse("1e16"), {0, 0});
    const LicenseGrant unsigned_grant =
        rig.grant({"chip-a"}, Flop::parse("1e16"), /*signers=*/1);

    const ExecutionRecord r = rig.fabric->execute("chip-a", Flop::parse("1e15"),
                                                  seconds(1), unsigned_grant, seconds(1));
    CHECK(r.status == ExecStatus::license_invalid);
    CHECK_FALSE(rig.fabric->chip("chip-a").halted);  // refusal, not off-switch
}

TEST_CASE("in-flight balance stays spendable under a defective grant") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop::parse("1e16"), {0, 0});
    const LicenseGrant good = rig.grant({"chip-a"}, Flop::parse("1e16"));
    CHECK(rig.fabric->install_grant("chip-a", good, seconds(0)).ok);

    const LicenseGrant bad = rig.grant({"chip-a"}, Flop::parse("1e16"), /*signers=*/0);
    const ExecutionRecord r =
        rig.fabric->execute("chip-a", Flop::parse("2e15"), seconds(1), bad, seconds(1));
    CHECK(r.status == ExecStatus::ok);  // prepaid quota carries the work
    CHECK(rig.fabric->chip("chip-a").balance == Flop::parse("8e15"));
}

TEST_CASE("withheld chips exhaust instead of accepting new quota") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop::parse("1e16"), {0, 0});
    const LicenseGrant g = rig.grant({"chip-a"}, Flop::parse("1e16"));
    rig.withheld.withhold_chip("chip-a");

    CHECK(rig.fabric->install_grant("chip-a", g, seconds(0)).defect ==
          GrantDefect::withheld);
    // The grant is never credited, so execution reads empty balance and the
    // chip turns itself off.
    const ExecutionRecord r =
        rig.fabric->execute("chip-a", Flop(1), seconds(1), g, seconds(1));
    CHECK(r.status == ExecStatus::license_exhausted);
    CHECK(rig.fabric->chip("chip-a").halted);
}

TEST_CASE("per-chip speed limit compares the implied rate exactly") {
    FabricConfig cfg;
    cfg.speed_limit = Rate::per_second(Flop::parse("1e20"));
    cfg.scope = SpeedLimitScope::per_chip;
    Rig rig(cfg);
    rig.fabric->provision_chip("fast", Flop::parse("1e21"), {0, 0});
    const LicenseGrant g = rig.grant({"fast"}, Flop::parse("1e21"));

    // 2e19 flop in 0.1 s = 2e20 flop/s: over.
    const ExecutionRecord over =
        rig.fabric->execute("fast", Flop::parse("2e19"), 100'000, g, seconds(1));
    CHECK(over.status == ExecStatus::speed_limit_exceeded);
    CHECK(rig.fabric->chip("fast").balance == Flop::parse("1e21"));  // not debited

    // 1e19 flop in 0.1 s = 1e20 flop/s: exactly at the cap, allowed.
    const ExecutionRecord at_cap =
        rig.fabric->execute("fast", Flop::parse("1e19"), 100'000, g, seconds(2));
    CHECK(at_cap.status == ExecStatus::ok);
}

TEST_CASE("cluster-scoped speed limit counts active runs on peers") {
    FabricConfig cfg;
    cfg.cluster_cap_per_s = Flop::parse("2e18");  // room for the two-chip cluster
    cfg.speed_limit = Rate::per_second(Flop::parse("1e18"));
    cfg.scope = SpeedLimitScope::per_cluster;
    Rig rig(cfg);
    rig.fabric->provision_chip("a", Flop::parse("9e17"), {0, 0}, {"b"});
    rig.fabric->provision_chip("b", Flop::parse("9e17"), {0, 0}, {"a"});
    CHECK(rig.fabric->connect("a", "b") == LinkStatus::linked);
    const LicenseGrant g = rig.grant({"a", "b"}, Flop::parse("1e20"));
    CHECK(rig.fabric->install_grant("a", g, 0).ok);
    CHECK(rig.fabric->install_grant("b", g, 0).ok);

    // A metered run on `b` at 9e17 flop/s fills most of the shared budget.
    rig.fabric->start_run("run-1", "b", "model-1", Flop::parse("9e18"), 0);

    // 2e17 in 1 s on `a` would put the cluster at 1.1e18 > 1e18.
    CHECK(rig.fabric->execute("a", Flop::parse("2e17"), seconds(1), g, seconds(1)).status ==
          ExecStatus::speed_limit_exceeded);
    // 1e17 in 1 s lands exactly at the limit: allowed.
    CHECK(rig.fabric->execute("a", Flop::parse("1e17"), seconds(1), g, seconds(1)).status ==
          ExecStatus::ok);
}

TEST_CASE("metered runs settle lazily at their fixed rate") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop::parse("1e15"), {0, 0});
    const LicenseGrant g = rig.grant({"chip-a"}, Flop::parse("1e16"));
    CHECK(rig.fabric->install_grant("chip-a", g, 0).ok);

    const MeteredRun& run =
        rig.fabric->start_run("run-1", "chip-a", "model-1", Flop::parse("5e15"), 0);
    CHECK(run.rate_per_s == Flop::parse("1e15"));  // defaults to chip capacity

    // At 2.5 s: floor(1e15 * 2.5) = 2.5e15 consumed.
    const SettleResult mid = rig.fabric->settle_run("run-1", 2'500'000);
    CHECK(mid.delta == Flop::parse("2.5e15"));
    CHECK(mid.total == Flop::parse("2.5e15"));
    CHECK_FALSE(mid.finished);
    CHECK(rig.fabric->chip("chip-a").balance == Flop::parse("7.5e15"));

    // Completion instant per the run's own schedule.
    const auto done_at = rig.fabric->next_run_event("run-1");
    REQUIRE(done_at.has_value());
    CHECK(*done_at == seconds(5));

    const SettleResult end = rig.fabric->settle_run("run-1", seconds(5));
    CHECK(end.finished);
    CHECK(end.total == Flop::parse("5e15"));
    CHECK(end.delta == Flop::parse("2.5e15"));
    CHECK_FALSE(rig.fabric->chip("chip-a").halted);  // planned work just ended

    // Settling a finished run is a no-op.
    const SettleResult again = rig.fabric->settle_run("run-1", seconds(9));
    CHECK(again.delta.is_zero());
    CHECK(again.total == Flop::parse("5e15"));
}

TEST_CASE("a run that outlives its balance halts the chip") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop::parse("1e15"), {0, 0});
    const LicenseGrant g = rig.grant({"chip-a"}, Flop::parse("3e15"));
    CHECK(rig.fabric->install_grant("chip-a", g, 0).ok);
    rig.fabric->start_run("run-1", "chip-a", "model-1", Flop::parse("5e15"), 0);

    // The balance covers 3 s of consumption; the event horizon says so.
    const auto stop_at = rig.fabric->next_run_event("run-1");
    REQUIRE(stop_at.has_value());
    CHECK(*stop_at == seconds(3));

    const SettleResult res = rig.fabric->settle_run("run-1", seconds(5));
    CHECK(res.exhausted);
    CHECK(res.finished);
    CHECK(res.total == Flop::parse("3e15"));
    CHECK(rig.fabric->chip("chip-a").balance.is_zero());
    CHECK(rig.fabric->chip("chip-a").halted);
}

TEST_CASE("freezing lets at most one prepaid quantum drain") {
    FabricConfig cfg;
    cfg.quota_quantum = Flop::parse("1e16");
    Rig rig(cfg);
    rig.fabric->provision_chip("chip-a", Flop::parse("1e15"), {0, 0});
    const LicenseGrant g = rig.grant({"chip-a"}, Flop::parse("1e17"));
    CHECK(rig.fabric->install_grant("chip-a", g, 0).ok);
    rig.fabric->start_run("run-1", "chip-a", "model-1", Flop::parse("1e17"), 0);

    // Freeze at 2.5 s: 2.5e15 settled; the window extends to the 1e16
    // quantum boundary, reached at t = 10 s.
    const auto halts = rig.fabric->freeze_chip("chip-a", 2'500'000);
    REQUIRE(halts.size() == 1);
    CHECK(halts[0].first == "run-1");
    CHECK(halts[0].second == seconds(10));
    CHECK(rig.fabric->run("run-1").allowed_total == Flop::parse("1e16"));

    const SettleResult res = rig.fabric->settle_run("run-1", seconds(12));
    CHECK(res.finished);
    CHECK(res.total == Flop::parse("1e16"));  // nothing past the window
    CHECK(rig.fabric->chip("chip-a").halted);

    // Extra consumption after the freeze stayed within one quantum.
    CHECK(Flop::parse("1e16") - Flop::parse("2.5e15") <= cfg.quota_quantum);
}

TEST_CASE("freezing an exhausted-balance run halts on the remaining balance") {
    FabricConfig cfg;
    cfg.quota_quantum = Flop::parse("1e16");
    Rig rig(cfg);
    rig.fabric->provision_chip("chip-a", Flop::parse("1e15"), {0, 0});
    const LicenseGrant g = rig.grant({"chip-a"}, Flop::parse("3e15"));
    CHECK(rig.fabric->install_grant("chip-a", g, 0).ok);
    rig.fabric->start_run("run-1", "chip-a", "model-1", Flop::parse("1e17"), 0);

    const auto halts = rig.fabric->freeze_chip("chip-a", 2'500'000);
    REQUIRE(halts.size() == 1);
    // 2.5e15 settled, 0.5e15 left in balance: window ends at 3 s.
    CHECK(halts[0].second == seconds(3));
    CHECK(rig.fabric->run("run-1").allowed_total == Flop::parse("3e15"));

    rig.fabric->settle_run("run-1", seconds(3));
    CHECK(rig.fabric->run("run-1").finished);
    CHECK(rig.fabric->chip("chip-a").halted);
}

TEST_CASE("run bookkeeping rejects misuse") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop::parse("1e15"), {0, 0});
    rig.fabric->start_run("run-1", "chip-a", "m", Flop(10), 0);
    CHECK(rig.fabric->has_run("run-1"));
    try {
        rig.fabric->start_run("run-1", "chip-a", "m", Flop(10), 1);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_id);
    }
    CHECK_THROWS_AS(rig.fabric->start_run("r2", "chip-a", "m", Flop(10), 1, Flop(0)),
                    Error);
    rig.fabric->halt("chip-a");
    CHECK_THROWS_AS(rig.fabric->start_run("r3", "chip-a", "m", Flop(10), 2), Error);
    CHECK_THROWS_AS(rig.fabric->settle_run("missing", 0), Error);
}

TEST_CASE("flop is conserved between grants, balance and execution") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop::parse("1e16"), {0, 0});
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const Micros now = seconds(i + 1);
        if (rng.chance(0.3)) {
            const LicenseGrant g =
                rig.grant({"chip-a"}, Flop(1 + rng.uniform(1'000'000)),
                          rng.chance(0.8) ? 2 : 1);
            rig.fabric->install_grant("chip-a", g, now);
        }
        rig.fabric->execute("chip-a", Flop(1 + rng.uniform(2'000'000)), seconds(1),
                            rig.grant({"chip-a"}, Flop(1 + rng.uniform(1'000'000))), now);
        const Chip& c = rig.fabric->chip("chip-a");
        CHECK(c.lifetime_granted == c.lifetime_executed + c.balance);
        if (c.halted) break;
    }
}

TEST_CASE("random link attempts never violate the allow-list") {
    Rig rig;
    Rng rng(13);
    const int n = 20;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        ids.push_back("r" + std::to_string(i));
        std::set<std::string> allow;
        for (int j = 0; j < n; ++j)
            if (j != i && rng.chance(0.4)) allow.insert("r" + std::to_string(j));
        rig.fabric->provision_chip(ids.back(), Flop(1 + rng.uniform(1'000)), {0, 0},
                                   allow);
    }
    for (int k = 0; k < 300; ++k) {
        const std::string& a = ids[size_t(rng.uniform(n))];
        const std::string& b = ids[size_t(rng.uniform(n))];
        if (a == b) continue;
        rig.fabric->connect(a, b);
    }
    for (const auto& a : ids)
        for (const auto& b : ids) {
            if (a == b || !rig.fabric->linked(a, b)) continue;
            CHECK(rig.fabric->chip(a).allow_list.count(b) == 1);
            CHECK(rig.fabric->chip(b).allow_list.count(a) == 1);
            CHECK(rig.fabric->linked(b, a));
        }
}

TEST_CASE("telemetry reports the period's executed flop under the chip's key") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop::parse("1e16"), {0, 0});
    const LicenseGrant g = rig.grant({"chip-a"}, Flop::parse("1e16"));
    for (int i = 1; i <= 3; ++i)
        CHECK(rig.fabric->execute("chip-a", Flop::parse("1e15"), seconds(1), g,
                                  seconds(i)).status == ExecStatus::ok);

    Rng rng(5);
    const SignedEnvelope env = rig.fabric->make_telemetry(
        "chip-a", "2026Q1", {"agency-national"}, seconds(100), rng);
    CHECK(verify_envelope(ed25519(), env, rig.keys));
    CHECK(env.signer == "chip-a");
    const nlohmann::json payload = env.payload();
    CHECK(payload.at("type") == "TelemetryPush");
    CHECK(payload.at("executed") == "3000000000000000");
    CHECK(payload.at("period") == "2026Q1");
    CHECK(payload.at("agencies") == nlohmann::json::array({"agency-national"}));
    CHECK(payload.at("halted") == false);
    // Peak over the period: 1e15 flop in one second.
    CHECK(payload.at("peak_rate").at("flop") == "1000000000000000");
    CHECK(payload.at("peak_rate").at("micros") == 1'000'000);

    // Resetting the period zeroes the accumulators but not lifetime totals.
    rig.fabric->reset_period("chip-a");
    Rng rng2(6);
    const SignedEnvelope idle = rig.fabric->make_telemetry(
        "chip-a", "2026Q2", {"agency-national"}, seconds(200), rng2);
    const nlohmann::json idle_payload = idle.payload();
    CHECK(idle_payload.at("executed") == "0");
    CHECK(idle_payload.at("peak_rate").is_null());
    CHECK(verify_envelope(ed25519(), idle, rig.keys));
    CHECK(rig.fabric->chip("chip-a").lifetime_executed == Flop::parse("3e15"));
}

TEST_CASE("halted chips do not answer challenges") {
    Rig rig;
    rig.fabric->provision_chip("chip-a", Flop::parse("1e15"), {3, 4}, {}, 0.25);
    Rng rng(3);
    const EchoResponder live = rig.fabric->responder("chip-a", rng);
    CHECK(live.id == "chip-a");
    CHECK(live.location.x == 3);
    CHECK(live.processing_s == 0.25);
    REQUIRE(live.sign_echo);
    const SignedEnvelope echo = live.sign_echo(nlohmann::json{{"n", 1}});
    CHECK(verify_envelope(ed25519(), echo, rig.keys));

    rig.fabric->halt("chip-a");
    const EchoResponder dead = rig.fabric->responder("chip-a", rng);
    CHECK_FALSE(dead.sign_echo);
}
