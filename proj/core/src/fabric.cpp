#include "gateward/fabric.hpp"

#include <algorithm>
#include <deque>

#include "gateward/canonical.hpp"
#include "gateward/errors.hpp"

namespace gateward {

using nlohmann::json;

namespace {

using u128 = unsigned __int128;

// flop consumed after `dt` micros at `rate` flop/s (floor).
Flop consumed_after(Flop rate_per_s, Micros dt) {
    return Flop(rate_per_s.raw() * static_cast<u128>(dt) / 1'000'000u);
}

// first instant (micros offset) at which consumption reaches `amount`.
Micros micros_to_consume(Flop amount, Flop rate_per_s) {
    const u128 num = amount.raw() * static_cast<u128>(1'000'000u);
    const u128 q = (num + rate_per_s.raw() - 1) / rate_per_s.raw();
    return static_cast<Micros>(q);
}

Flop quantum_ceil(Flop x, Flop q) {
    const u128 m = (x.raw() + q.raw() - 1) / q.raw();
    return Flop(m * q.raw());
}

Nonce nonce_from_rng(Rng& rng) {
    Nonce n{};
    for (int i = 0; i < 2; ++i) {
        uint64_t w = rng.next_u64();
        for (int b = 0; b < 8; ++b) {
            n[i * 8 + b] = static_cast<uint8_t>(w & 0xff);
            w >>= 8;
        }
    }
    return n;
}

}  // namespace

const char* exec_status_name(ExecStatus s) {
    switch (s) {
        case ExecStatus::ok: return "Ok";
        case ExecStatus::license_invalid: return "LicenseInvalid";
        case ExecStatus::license_exhausted: return "LicenseExhausted";
        case ExecStatus::speed_limit_exceeded: return "SpeedLimitExceeded";
        case ExecStatus::chip_halted: return "ChipHalted";
    }
    return "?";
}

const char* link_status_name(LinkStatus s) {
    switch (s) {
        case LinkStatus::linked: return "Linked";
        case LinkStatus::not_allow_listed: return "NotAllowListed";
        case LinkStatus::cluster_cap_exceeded: return "ClusterCapExceeded";
    }
    return "?";
}

Fabric::Fabric(uint64_t seed, KeyDirectory& keys, FabricConfig cfg,
               const MultiSigPolicy* policy, const WithholdRegistry* withheld)
    : seed_(seed), keys_(keys), cfg_(cfg), policy_(policy), withheld_(withheld) {}

const Chip& Fabric::provision_chip(const std::string& chip_id, Flop capacity_per_s,
                                   Vec2 location, std::set<std::string> allow_list,
                                   double processing_allowance_s) {
    if (capacity_per_s.is_zero()) fail(Errc::invalid_capacity, "capacity must be > 0");
    if (chips_.count(chip_id)) fail(Errc::duplicate_id, "chip exists: " + chip_id);

    Chip c;
    c.chip_id = chip_id;
    const std::string seed_label =
        "chip-key/" + std::to_string(seed_) + "/" + chip_id;
    c.key = ed25519().keygen(sha256(seed_label));
    c.capacity_per_s = capacity_per_s;
    c.true_location = location;
    c.allow_list = std::move(allow_list);
    c.processing_allowance_s = processing_allowance_s;
    keys_.put(chip_id, c.key.public_key);
    auto [it, ok] = chips_.emplace(chip_id, std::move(c));
    (void)ok;
    return it->second;
}

bool Fabric::has_chip(const std::string& chip_id) const {
    return chips_.count(chip_id) != 0;
}

const Chip& Fabric::chip(const std::string& chip_id) const {
    auto it = chips_.find(chip_id);
    if (it == chips_.end()) fail(Errc::unknown_chip, chip_id);
    return it->second;
}

Chip& Fabric::chip_mut(const std::string& chip_id) {
    auto it = chips_.find(chip_id);
    if (it == chips_.end()) fail(Errc::unknown_chip, chip_id);
    return it->second;
}

std::vector<std::string> Fabric::chip_ids() const {
    std::vector<std::string> out;
    out.reserve(chips_.size());
    for (const auto& [id, c] : chips_) out.push_back(id);
    return out;
}

void Fabric::allow(const std::string& a, const std::string& b) {
    chip_mut(a).allow_list.insert(b);
}

std::string Fabric::pair_key(const std::string& a, const std::string& b) {
    return a < b ? a + "|" + b : b + "|" + a;
}

json Fabric::link_permit_payload(const std::string& a, const std::string& b) {
    const std::string lo = std::min(a, b), hi = std::max(a, b);
    return json{{"type", "LinkPermit"}, {"a", lo}, {"b", hi}};
}

bool Fabric::register_permit(const SignedEnvelope& permit) {
    if (!policy_ || !policy_->has_governor(permit.signer)) return false;
    if (!verify_envelope(ed25519(), permit, keys_)) return false;
    const json p = permit.payload();
    if (p.value("type", "") != "LinkPermit") return false;
    if (!p.contains("a") || !p.contains("b")) return false;
    permits_.insert(pair_key(p.at("a").get<std::string>(), p.at("b").get<std::string>()));
    return true;
}

void Fabric::revoke_permit(const std::string& a, const std::string& b) {
    permits_.erase(pair_key(a, b));
    // A revoked permit takes the link down with it when the link needed one.
    auto la = links_.find(a);
    if (la != links_.end() && la->second.count(b)) {
        const Flop agg = cluster_rate(a);
        if (agg > cfg_.cluster_cap_per_s) {
            la->second.erase(b);
            links_[b].erase(a);
        }
    }
}

bool Fabric::link_permitted(const std::string& a, const std::string& b) const {
    return permits_.count(pair_key(a, b)) != 0;
}

bool Fabric::component_fully_permitted(const std::vector<std::string>& members) const {
    for (const auto& m : members) {
        auto it = links_.find(m);
        if (it == links_.end()) continue;
        for (const auto& peer : it->second)
            if (m < peer && !link_permitted(m, peer)) return false;
    }
    return true;
}

LinkStatus Fabric::connect(const std::string& a, const std::string& b,
                           const SignedEnvelope* permit) {
    Chip& ca = chip_mut(a);
    Chip& cb = chip_mut(b);
    if (a == b) return LinkStatus::linked;  // self-link: ignored for clustering
    if (links_[a].count(b)) return LinkStatus::linked;

    if (!ca.allow_list.count(b) || !cb.allow_list.count(a))
        return LinkStatus::not_allow_listed;

    if (permit) register_permit(*permit);

    const auto comp_a = cluster_of(a);
    const bool same_component =
        std::binary_search(comp_a.begin(), comp_a.end(), b);
    if (!same_component) {
        const Flop merged = cluster_rate(a) + cluster_rate(b);
        if (merged > cfg_.cluster_cap_per_s) {
            // Oversize clusters exist only by explicit governor permission,
            // on every link they contain.
            const auto comp_b = cluster_of(b);
            if (!link_permitted(a, b) || !component_fully_permitted(comp_a) ||
                !component_fully_permitted(comp_b))
                return LinkStatus::cluster_cap_exceeded;
        }
    }
    links_[a].insert(b);
    links_[b].insert(a);
    return LinkStatus::linked;
}

bool Fabric::linked(const std::string& a, const std::string& b) const {
    auto it = links_.find(a);
    return it != links_.end() && it->second.count(b) != 0;
}

std::vector<std::string> Fabric::cluster_of(const std::string& chip_id) const {
    chip(chip_id);  // existence check
    std::vector<std::string> out;
    std::set<std::string> seen{chip_id};
    std::deque<std::string> frontier{chip_id};
    while (!frontier.empty()) {
        const std::string cur = frontier.front();
        frontier.pop_front();
        out.push_back(cur);
        auto it = links_.find(cur);
        if (it == links_.end()) continue;
        for (const auto& peer : it->second)
            if (seen.insert(peer).second) frontier.push_back(peer);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Flop Fabric::cluster_rate(const std::string& chip_id) const {
    Flop sum;
    for (const auto& m : cluster_of(chip_id)) sum += chip(m).capacity_per_s;
    return sum;
}

GrantCheck Fabric::install_grant(const std::string& chip_id, const LicenseGrant& grant,
                                 Micros now) {
    Chip& c = chip_mut(chip_id);
    GrantCheck check;
    if (withheld_ && (withheld_->grant_withheld(grant.grant_id) ||
                      withheld_->chip_withheld(chip_id))) {
        check.defect = GrantDefect::withheld;
        return check;
    }
    if (!policy_) fail(Errc::invalid_policy, "fabric has no signing policy");
    check = validate_grant(grant, *policy_, keys_, now, chip_id);
    if (!check.ok) return check;
    if (c.credited_grants.insert(grant.grant_id).second) {
        c.balance += grant.quota;
        c.lifetime_granted += grant.quota;
    }
    return check;
}

bool Fabric::speed_ok(const Chip& c, Flop workload, Micros window) const {
    if (!cfg_.speed_limit) return true;
    if (window <= 0) return false;
    Rate implied{workload, window};
    if (cfg_.scope == SpeedLimitScope::per_cluster) {
        // Aggregate with rates of metered runs active in the same cluster:
        // common denominator is the window in micros.
        const auto members = cluster_of(c.chip_id);
        Flop extra;
        for (const auto& [id, r] : runs_) {
            if (r.finished) continue;
            if (!std::binary_search(members.begin(), members.end(), r.chip_id))
                continue;
            extra += Flop(r.rate_per_s.raw() * static_cast<u128>(window) / 1'000'000u);
        }
        implied.flop += extra;
    }
    return rate_cmp(implied, *cfg_.speed_limit) <= 0;
}

void Fabric::note_rate(Chip& c, Flop flop, Micros window) {
    if (window <= 0) return;
    const Rate r{flop, window};
    if (!c.period.peak || rate_cmp(r, *c.period.peak) > 0) c.period.peak = r;
}

ExecutionRecord Fabric::execute(const std::string& chip_id, Flop workload,
                                Micros window, const LicenseGrant& grant, Micros now) {
    Chip& c = chip_mut(chip_id);
    ExecutionRecord rec;
    rec.chip_id = chip_id;
    rec.grant_id = grant.grant_id;
    rec.workload = workload;
    rec.window = window;
    rec.at = now;

    if (c.halted) {
        rec.status = ExecStatus::chip_halted;
        return rec;
    }
    const GrantCheck check = install_grant(chip_id, grant, now);
    if (!speed_ok(c, workload, window)) {
        rec.status = ExecStatus::speed_limit_exceeded;
        return rec;
    }
    if (c.balance < workload) {
        // A defective grant still leaves in-flight balance spendable, so the
        // balance decides between "out of quota" and "bad paperwork". A
        // withheld signal reads as exhaustion: that is the auto-offswitch.
        if (check.ok || check.defect == GrantDefect::withheld) {
            rec.status = ExecStatus::license_exhausted;
            c.halted = true;  // no license signal, no computation
        } else {
            rec.status = ExecStatus::license_invalid;
        }
        return rec;
    }
    c.balance -= workload;
    c.lifetime_executed += workload;
    c.period.executed += workload;
    note_rate(c, workload, window);
    rec.status = ExecStatus::ok;
    return rec;
}

const MeteredRun& Fabric::start_run(const std::string& run_id, const std::string& chip_id,
                                    const std::string& model_id, Flop planned, Micros now,
                                    std::optional<Flop> rate_per_s) {
    if (runs_.count(run_id)) fail(Errc::duplicate_id, "run exists: " + run_id);
    Chip& c = chip_mut(chip_id);
    if (c.halted) fail(Errc::unknown_target, "chip is halted: " + chip_id);

    MeteredRun r;
    r.run_id = run_id;
    r.chip_id = chip_id;
    r.model_id = model_id;
    r.planned = planned;
    r.rate_per_s = rate_per_s.value_or(c.capacity_per_s);
    if (r.rate_per_s.is_zero()) fail(Errc::invalid_capacity, "zero-rate run");
    r.t0 = now;
    r.settled_at = now;
    r.allowed_total = planned;
    note_rate(c, r.rate_per_s, 1'000'000);
    auto [it, ok] = runs_.emplace(run_id, std::move(r));
    (void)ok;
    return it->second;
}

bool Fabric::has_run(const std::string& run_id) const { return runs_.count(run_id) != 0; }

const MeteredRun& Fabric::run(const std::string& run_id) const {
    auto it = runs_.find(run_id);
    if (it == runs_.end()) fail(Errc::unknown_target, "no such run: " + run_id);
    return it->second;
}

MeteredRun& Fabric::run_mut(const std::string& run_id) {
    auto it = runs_.find(run_id);
    if (it == runs_.end()) fail(Errc::unknown_target, "no such run: " + run_id);
    return it->second;
}

SettleResult Fabric::settle_run(const std::string& run_id, Micros now) {
    MeteredRun& r = run_mut(run_id);
    SettleResult out;
    out.total = r.settled;
    if (r.finished) return out;
    Chip& c = chip_mut(r.chip_id);

    Flop target = consumed_after(r.rate_per_s, now - r.t0);
    if (target > r.allowed_total) target = r.allowed_total;
    if (target > r.settled + c.balance) {
        target = r.settled + c.balance;
        out.exhausted = true;
    }
    if (target > r.settled) {
        const Flop delta = target - r.settled;
        c.balance -= delta;
        c.lifetime_executed += delta;
        c.period.executed += delta;
        r.settled = target;
        out.delta = delta;
    }
    r.settled_at = now;
    out.total = r.settled;

    if (r.settled == r.planned) {
        r.finished = true;
        out.finished = true;
    } else if (r.frozen && r.settled == r.allowed_total) {
        r.finished = true;
        out.finished = true;
        c.halted = true;  // license signal gone and window consumed
    } else if (out.exhausted && c.balance.is_zero()) {
        r.finished = true;
        out.finished = true;
        c.halted = true;
    }
    return out;
}

std::vector<std::pair<std::string, Micros>> Fabric::freeze_chip(const std::string& chip_id,
                                                                Micros now) {
    Chip& c = chip_mut(chip_id);
    std::vector<std::pair<std::string, Micros>> halts;
    for (auto& [id, r] : runs_) {
        if (r.chip_id != chip_id || r.finished || r.frozen) continue;
        settle_run(id, now);
        if (r.finished) continue;
        // One prepaid quantum may still drain; nothing beyond it.
        Flop extra = quantum_ceil(r.settled + Flop(1), cfg_.quota_quantum) - r.settled;
        if (extra > c.balance) extra = c.balance;
        if (r.settled + extra > r.planned) extra = r.planned - r.settled;
        r.frozen = true;
        r.allowed_total = r.settled + extra;
        halts.emplace_back(id, r.t0 + micros_to_consume(r.allowed_total, r.rate_per_s));
    }
    return halts;
}

std::optional<Micros> Fabric::next_run_event(const std::string& run_id) const {
    const MeteredRun& r = run(run_id);
    if (r.finished) return std::nullopt;
    const Chip& c = chip(r.chip_id);
    Flop stop = r.allowed_total;
    const Flop funded = r.settled + c.balance;
    if (funded < stop) stop = funded;
    return r.t0 + micros_to_consume(stop, r.rate_per_s);
}

std::vector<std::string> Fabric::active_run_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, r] : runs_)
        if (!r.finished) out.push_back(id);
    return out;
}

std::vector<std::string> Fabric::active_run_ids(const std::string& chip_id) const {
    std::vector<std::string> out;
    for (const auto& [id, r] : runs_)
        if (!r.finished && r.chip_id == chip_id) out.push_back(id);
    return out;
}

void Fabric::halt(const std::string& chip_id) { chip_mut(chip_id).halted = true; }

EchoResponder Fabric::responder(const std::string& chip_id, Rng& rng) const {
    const Chip& c = chip(chip_id);
    EchoResponder r;
    r.id = chip_id;
    r.location = c.true_location;
    r.processing_s = c.processing_allowance_s;
    if (!c.halted) {
        const KeyPair key = c.key;
        Rng* rp = &rng;
        r.sign_echo = [chip_id, key, rp](const json& challenge) {
            const json payload{{"type", "ChallengeResponse"},
                               {"chip", chip_id},
                               {"challenge", challenge}};
            return make_envelope(ed25519(), payload, chip_id, key.private_key,
                                 nonce_from_rng(*rp));
        };
    }
    return r;
}

void Fabric::record_geo_verdict(const std::string& chip_id, const std::string& verdict) {
    chip_mut(chip_id).period.geo_verdicts.push_back(verdict);
}

SignedEnvelope Fabric::make_telemetry(const std::string& chip_id, const std::string& period,
                                      const std::vector<std::string>& agencies, Micros now,
                                      Rng& rng) const {
    const Chip& c = chip(chip_id);
    json peak = nullptr;
    if (c.period.peak)
        peak = json{{"flop", flop_to_json(c.period.peak->flop)},
                    {"micros", c.period.peak->micros}};
    const json payload{{"type", "TelemetryPush"},
                       {"chip", chip_id},
                       {"period", period},
                       {"executed", flop_to_json(c.period.executed)},
                       {"peak_rate", peak},
                       {"cluster", cluster_of(chip_id)},
                       {"geo_verdicts", c.period.geo_verdicts},
                       {"halted", c.halted},
                       {"agencies", agencies},
                       {"at", now}};
    return make_envelope(ed25519(), payload, chip_id, c.key.private_key,
                         nonce_from_rng(rng));
}

void Fabric::reset_period(const std::string& chip_id) {
    Chip& c = chip_mut(chip_id);
    c.period = PeriodStats{};
}

void Fabric::set_speed_limit(std::optional<Rate> limit, SpeedLimitScope scope) {
    cfg_.speed_limit = limit;
    cfg_.scope = scope;
}

}  // namespace gateward
