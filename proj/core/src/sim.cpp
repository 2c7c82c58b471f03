#include "gateward/sim.hpp"

#include <algorithm>

#include "gateward/canonical.hpp"
#include "gateward/errors.hpp"

namespace gateward {

using nlohmann::json;

namespace {

json rate_json(const Rate& r) {
    return json{{"flop", flop_to_json(r.flop)}, {"micros", r.micros}};
}

const LabSpec* find_lab(const Scenario& sc, const std::string& id) {
    for (const auto& l : sc.labs)
        if (l.id == id) return &l;
    return nullptr;
}

}  // namespace

Simulation::Simulation(Scenario sc)
    : sc_(std::move(sc)),
      latency_rng_(Rng(sc_.seed).substream("latency")),
      nonce_rng_(Rng(sc_.seed).substream("nonce")) {
    MultiSigPolicy pol;
    pol.policy_id = "policy-1";
    pol.governors = sc_.governors;
    pol.threshold = sc_.threshold;
    governor_ = std::make_unique<GovernorService>(sc_.seed, keys_, pol, sc_.policy);

    FabricConfig fcfg;
    fcfg.cluster_cap_per_s = sc_.policy.cluster_cap;
    fcfg.speed_limit = sc_.speed_limit;
    fcfg.scope = sc_.limit_scope;
    fcfg.quota_quantum = sc_.policy.quota_quantum;
    fabric_ = std::make_unique<Fabric>(sc_.seed, keys_, fcfg, &governor_->policy(),
                                       &governor_->withheld());

    for (const auto& st : sc_.stations) {
        Station s;
        s.station_id = st.id;
        s.location = st.location;
        s.key = ed25519().keygen(
            sha256("station-key/" + std::to_string(sc_.seed) + "/" + st.id));
        keys_.put(st.id, s.key.public_key);
        stations_.emplace(st.id, std::move(s));
    }
}

const Event& Simulation::log_event(const std::string& actor, const std::string& kind,
                                   json payload) {
    return log_.append(now_, actor, kind, std::move(payload));
}

void Simulation::log_violation(const std::string& actor, json payload) {
    violations_ = true;
    log_.append(now_, actor, "violation", std::move(payload));
}

std::string Simulation::quarter_label(Micros at) const {
    return "Q" + std::to_string(at / sc_.quarter + 1);
}

void Simulation::schedule(Micros at, Task::Kind kind, int widx, int sub, std::string id) {
    Task t;
    t.at = at;
    t.order = order_++;
    t.kind = kind;
    t.widx = widx;
    t.sub = sub;
    t.id = std::move(id);
    queue_.push(std::move(t));
}

void Simulation::add_ledger_node(ledger::ComputeNode node) {
    // Keep causality strict even when settlement and emission coincide.
    for (const auto& p : node.parents) {
        const Micros pt = graph_.node(p).wall_time;
        if (node.wall_time <= pt) node.wall_time = pt + 1;
    }
    const Flop flop = node.flop;
    const std::string model = node.model_id;
    const std::string& id = graph_.add_node(std::move(node));
    log_event("ledger", "ledger_node",
              json{{"node", id}, {"model", model}, {"flop", flop_to_json(flop)}});
}

void Simulation::setup() {
    log_event("sim", "sim_start",
              json{{"name", sc_.name},
                   {"seed", sc_.seed},
                   {"version", sc_.version},
                   {"quarter_micros", sc_.quarter},
                   {"until_micros", sc_.until},
                   {"policy", sc_.policy.to_json()},
                   {"governors", sc_.governors},
                   {"threshold", sc_.threshold},
                   {"signature_scheme", ed25519().name()}});

    for (int i = 0; i < static_cast<int>(sc_.phases.size()); ++i)
        schedule(sc_.phases[i].at, Task::Kind::phase, -1, i);

    for (const auto& cs : sc_.chips) {
        fabric_->provision_chip(cs.id, cs.capacity_per_s, cs.location,
                                std::set<std::string>(cs.allow.begin(), cs.allow.end()),
                                cs.processing_allowance_s);
        if (cs.enrolled) governor_->enroll_chip(cs.id);
        log_event("fabric", "chip_provisioned",
                  json{{"chip", cs.id},
                       {"owner", cs.owner},
                       {"capacity", flop_to_json(cs.capacity_per_s)},
                       {"enrolled", cs.enrolled}});
    }
    for (const auto& [a, b] : sc_.links) {
        const LinkStatus st = fabric_->connect(a, b);
        log_event("fabric", "link",
                  json{{"a", a}, {"b", b}, {"status", link_status_name(st)}});
    }

    for (int i = 0; i < static_cast<int>(sc_.workloads.size()); ++i) {
        const auto& w = sc_.workloads[i];
        Task::Kind kind;
        if (w.kind == "training") kind = Task::Kind::training_chunk;
        else if (w.kind == "inference_stream") kind = Task::Kind::output;
        else if (w.kind == "geo_challenge") kind = Task::Kind::geo;
        else if (w.kind == "withhold") kind = Task::Kind::withhold;
        else if (w.kind == "cap_adjustment") kind = Task::Kind::cap_adjust;
        else kind = Task::Kind::register_wl;
        schedule(w.at, kind, i, 0);
    }

    for (Micros t = sc_.quarter, k = 1; t <= sc_.until; t += sc_.quarter, ++k)
        schedule(t, Task::Kind::quarter, -1, static_cast<int>(k));
}

SimResult Simulation::run() {
    setup();
    while (!queue_.empty()) {
        Task t = queue_.top();
        queue_.pop();
        if (t.at > sc_.until) continue;
        now_ = std::max(now_, t.at);
        dispatch(t);
    }
    SimResult res;
    res.log = log_;
    res.reports = reports_;
    res.violations = violations_;
    return res;
}

void Simulation::dispatch(const Task& t) {
    switch (t.kind) {
        case Task::Kind::phase: on_phase(t.sub); break;
        case Task::Kind::training_chunk: on_training_chunk(t.widx, t.sub); break;
        case Task::Kind::run_event: on_run_event(t.id); break;
        case Task::Kind::output: on_output(t.widx, t.sub); break;
        case Task::Kind::geo: on_geo(t.widx); break;
        case Task::Kind::withhold: on_withhold(t.widx); break;
        case Task::Kind::cap_adjust: on_cap_adjust(t.widx); break;
        case Task::Kind::register_wl: on_register(t.widx); break;
        case Task::Kind::quarter: on_quarter(t.sub); break;
    }
}

void Simulation::advance_phase(SimPhase next) {
    if (phase_set_ && static_cast<int>(next) != static_cast<int>(phase_) + 1)
        fail(Errc::phase_order_violation,
             std::string("cannot move from ") + phase_name(phase_) + " to " +
                 phase_name(next));
    if (!phase_set_ && next != SimPhase::pause)
        fail(Errc::phase_order_violation, "rollout starts at pause");
    phase_ = next;
    phase_set_ = true;
}

void Simulation::on_phase(int idx) {
    const PhasePoint& pp = sc_.phases[idx];
    advance_phase(pp.phase);
    json payload{{"phase", phase_name(phase_)}, {"checks", active_checks(phase_)}};
    if (phase_ == SimPhase::international_oversight) {
        // National registry mirrored to the new agency's database.
        payload["registry_mirrored"] = governor_->entries().size();
    }
    log_event("sim", "phase_change", std::move(payload));
}

void Simulation::on_training_chunk(int widx, int chunk_no) {
    const Workload& w = sc_.workloads[widx];
    TrainState& ts = train_[widx];
    if (ts.stopped) return;
    if (fabric_->chip(w.chip).halted) {
        log_event(w.lab, "training_abandoned",
                  json{{"model", w.model}, {"reason", "chip_halted"}});
        ts.stopped = true;
        return;
    }

    // Compliant labs file their registry entry before the first request once
    // oversight is active.
    const LabSpec* lab = find_lab(sc_, w.lab);
    if (chunk_no == 0 && lab && lab->registers &&
        phase_ >= SimPhase::national_oversight && !governor_->registered(w.model)) {
        RegistryEntry e;
        e.model_id = w.model;
        e.developer_id = w.lab;
        e.training_compute = w.declared_plan;
        e.max_inference_rate_per_s = w.declared_rate;
        e.quarter = quarter_label(now_);
        if (governor_->registration_required(e)) {
            const std::string receipt = governor_->register_training_run(e);
            log_event(w.lab, "registration",
                      json{{"model", w.model},
                           {"developer", w.lab},
                           {"quarter", e.quarter},
                           {"declared_training", flop_to_json(e.training_compute)},
                           {"declared_rate", flop_to_json(e.max_inference_rate_per_s)},
                           {"receipt", receipt}});
        }
    }

    const Flop remaining = w.total - ts.requested;
    const Flop quota = remaining < w.chunk ? remaining : w.chunk;
    Flop plan_left = w.declared_plan > ts.requested ? w.declared_plan - ts.requested : quota;

    log_event(w.lab, "license_requested",
              json{{"model", w.model},
                   {"chip", w.chip},
                   {"quota", flop_to_json(quota)},
                   {"chunk", chunk_no}});
    LicenseDecision d = governor_->request_license(
        w.model, {w.chip}, quota, now_, sc_.until + sc_.quarter, now_,
        phase_ == SimPhase::pause, {}, plan_left, true);
    if (!d.granted) {
        log_event("governor", "license_denied",
                  json{{"model", w.model},
                       {"quota", flop_to_json(quota)},
                       {"reason", d.reason},
                       {"error", d.error},
                       {"projected", flop_to_json(d.projected)}});
        ts.stopped = true;
        return;
    }
    log_event("governor", "license_granted",
              json{{"grant", d.grant.grant_id},
                   {"model", w.model},
                   {"chip", w.chip},
                   {"quota", flop_to_json(quota)},
                   {"signatures", d.grant.signatures.size()},
                   {"cumulative", flop_to_json(d.projected)}});

    const GrantCheck check = fabric_->install_grant(w.chip, d.grant, now_);
    if (!check.ok) {
        log_event(w.chip, "grant_rejected",
                  json{{"grant", d.grant.grant_id},
                       {"defect", grant_defect_name(check.defect)}});
        ts.stopped = true;
        return;
    }
    ts.requested += quota;
    ts.chunk_no = chunk_no + 1;

    const std::string run_id = w.model + "/run-" + std::to_string(chunk_no + 1);
    fabric_->start_run(run_id, w.chip, w.model, quota, now_, w.rate_per_s);
    RunInfo ri;
    ri.widx = widx;
    ri.model = w.model;
    ri.chip = w.chip;
    auto term = model_terminal_.find(w.model);
    if (term != model_terminal_.end()) ri.prev_node = term->second;
    runs_.emplace(run_id, std::move(ri));
    log_event(w.chip, "run_started",
              json{{"run", run_id},
                   {"model", w.model},
                   {"chip", w.chip},
                   {"planned", flop_to_json(quota)},
                   {"rate", flop_to_json(fabric_->run(run_id).rate_per_s)}});
    if (auto next = fabric_->next_run_event(run_id))
        schedule(std::max(now_, *next), Task::Kind::run_event, widx, 0, run_id);
}

void Simulation::settle_and_ledger(const std::string& run_id) {
    if (!fabric_->has_run(run_id)) return;
    const MeteredRun& before = fabric_->run(run_id);
    if (before.finished) return;
    const SettleResult res = fabric_->settle_run(run_id, now_);
    RunInfo& ri = runs_.at(run_id);
    if (res.delta.is_zero() && !res.finished) return;

    log_event(ri.chip, "run_settled",
              json{{"run", run_id},
                   {"model", ri.model},
                   {"chip", ri.chip},
                   {"delta", flop_to_json(res.delta)},
                   {"total", flop_to_json(res.total)},
                   {"finished", res.finished},
                   {"exhausted", res.exhausted}});

    if (res.total > ri.ledgered) {
        ledger::ComputeNode node;
        node.node_id = run_id + "#" + std::to_string(++ri.segments);
        node.kind = ledger::NodeKind::training;
        node.flop = res.total - ri.ledgered;
        node.wall_time = now_;
        if (!ri.prev_node.empty()) node.parents.push_back(ri.prev_node);
        node.model_id = ri.model;
        add_ledger_node(node);
        ri.prev_node = run_id + "#" + std::to_string(ri.segments);
        ri.ledgered = res.total;
        model_terminal_[ri.model] = ri.prev_node;
    }

    if (res.finished) {
        log_event(ri.chip, "run_completed",
                  json{{"run", run_id}, {"total", flop_to_json(res.total)}});
        const Chip& c = fabric_->chip(ri.chip);
        if (c.halted) {
            log_event(ri.chip, "chip_halted",
                      json{{"chip", ri.chip},
                           {"reason", res.exhausted ? "license_exhausted" : "withheld"}});
        } else if (ri.widx >= 0) {
            const Workload& w = sc_.workloads[ri.widx];
            TrainState& ts = train_[ri.widx];
            if (!ts.stopped && ts.requested < w.total)
                schedule(now_, Task::Kind::training_chunk, ri.widx, ts.chunk_no);
        }
    }
}

void Simulation::on_run_event(const std::string& run_id) {
    settle_and_ledger(run_id);
    if (fabric_->has_run(run_id) && !fabric_->run(run_id).finished) {
        if (auto next = fabric_->next_run_event(run_id)) {
            const RunInfo& ri = runs_.at(run_id);
            schedule(std::max(now_, *next), Task::Kind::run_event, ri.widx, 0, run_id);
        }
    }
}

void Simulation::on_output(int widx, int n) {
    const Workload& w = sc_.workloads[widx];
    StreamState& st = streams_[widx];
    if (st.halted) return;
    if (fabric_->chip(w.chip).halted) {
        log_event(w.lab, "output_refused",
                  json{{"model", w.model}, {"chip", w.chip}, {"reason", "chip_halted"}});
        st.halted = true;
        return;
    }

    if (!st.licensed) {
        const Flop quota = w.marginal * static_cast<std::uint64_t>(w.count);
        LicenseDecision d = governor_->request_license(
            w.model, {w.chip}, quota, now_, sc_.until + sc_.quarter, now_,
            phase_ == SimPhase::pause, {}, Flop(0), false);
        if (!d.granted) {
            log_event("governor", "license_denied",
                      json{{"model", w.model},
                           {"quota", flop_to_json(quota)},
                           {"reason", d.reason},
                           {"error", d.error}});
            st.halted = true;
            return;
        }
        log_event("governor", "license_granted",
                  json{{"grant", d.grant.grant_id},
                       {"model", w.model},
                       {"chip", w.chip},
                       {"quota", flop_to_json(quota)},
                       {"signatures", d.grant.signatures.size()},
                       {"purpose", "inference"}});
        st.grant = d.grant;
        st.licensed = true;
        if (!model_terminal_.count(w.model)) {
            // Model trained off the books: give the stream a root to hang on.
            ledger::ComputeNode root;
            root.node_id = w.model + "/root";
            root.kind = ledger::NodeKind::training;
            root.flop = Flop(0);
            root.wall_time = now_ - 1;
            root.model_id = w.model;
            add_ledger_node(root);
            model_terminal_[w.model] = root.node_id;
        }
    }

    const ExecutionRecord rec = fabric_->execute(w.chip, w.marginal, w.interval,
                                                 st.grant, now_);
    if (rec.status != ExecStatus::ok) {
        log_event(w.chip, "output_refused",
                  json{{"model", w.model},
                       {"chip", w.chip},
                       {"reason", exec_status_name(rec.status)}});
        if (rec.status == ExecStatus::speed_limit_exceeded) {
            log_violation(w.chip, json{{"rule", "chip_speed_limit"},
                                       {"model", w.model},
                                       {"chip", w.chip},
                                       {"rate", rate_json({w.marginal, w.interval})}});
        } else if (rec.status == ExecStatus::license_exhausted) {
            log_event(w.chip, "chip_halted",
                      json{{"chip", w.chip}, {"reason", "license_exhausted"}});
        }
        st.halted = true;
        return;
    }

    const std::string output_id = w.model + "/out-" + std::to_string(n + 1);
    ledger::ComputeNode node;
    node.node_id = output_id;
    node.kind = ledger::NodeKind::inference;
    node.flop = w.marginal;
    node.wall_time = now_;
    node.parents.push_back(model_terminal_.at(w.model));
    node.output_id = output_id;
    add_ledger_node(node);
    st.outputs.push_back(output_id);

    const Micros gap = st.prev_at >= 0 ? now_ - st.prev_at : -1;
    log_event(w.chip, "output",
              json{{"output", output_id},
                   {"model", w.model},
                   {"chip", w.chip},
                   {"marginal", flop_to_json(w.marginal)},
                   {"gap_micros", gap}});

    if (gap > 0) {
        const Rate r{w.marginal, gap};
        if (rate_exceeds(r, governor_->config().inference_cap)) {
            log_violation(w.chip,
                          json{{"rule", "inference_speed_limit"},
                               {"model", w.model},
                               {"chip", w.chip},
                               {"rate", rate_json(r)},
                               {"cap", flop_to_json(governor_->config().inference_cap)}});
            fabric_->halt(w.chip);
            log_event(w.chip, "chip_halted",
                      json{{"chip", w.chip}, {"reason", "inference_speed_limit"}});
            st.halted = true;
            return;
        }
    }
    st.prev_at = now_;
    st.emitted = n + 1;

    if (n + 1 < w.count) {
        schedule(now_ + w.interval, Task::Kind::output, widx, n + 1);
    } else if (st.outputs.size() >= 2) {
        const auto stream = graph_.build_stream(st.outputs);
        const auto summary = ledger::inference_rate(stream);
        log_event(w.lab, "stream_summary",
                  json{{"model", w.model},
                       {"outputs", st.outputs.size()},
                       {"peak_rate", rate_json(summary.peak)},
                       {"mean_flop_per_sec", summary.mean_flop_per_sec}});
    }
}

void Simulation::on_geo(int widx) {
    const Workload& w = sc_.workloads[widx];
    std::vector<std::string> station_ids = w.stations;
    if (station_ids.empty())
        for (const auto& [id, st] : stations_) station_ids.push_back(id);

    std::vector<std::pair<Station, double>> bounds;
    const double allowance = fabric_->chip(w.chip).processing_allowance_s;
    for (const auto& sid : station_ids) {
        auto it = stations_.find(sid);
        if (it == stations_.end()) continue;
        EchoResponder resp = fabric_->responder(w.chip, nonce_rng_);
        const ChallengeResult res =
            run_challenge(it->second, resp, sc_.latency, keys_, latency_rng_);
        if (res.status != ChallengeStatus::ok) {
            log_event(sid, "geo_challenge_failed",
                      json{{"station", sid},
                           {"chip", w.chip},
                           {"status", res.status == ChallengeStatus::no_response
                                          ? "NoResponse"
                                          : "BadSignature"}});
            continue;
        }
        const double bound = distance_bound(res.rtt_s, allowance, sc_.one_way_bound);
        log_event(sid, "geo_challenge",
                  json{{"station", sid},
                       {"chip", w.chip},
                       {"rtt_s", res.rtt_s},
                       {"bound_km", bound}});
        bounds.emplace_back(it->second, bound);
    }

    if (bounds.empty()) {
        log_violation("geoverify", json{{"rule", "geo_no_response"}, {"chip", w.chip}});
        return;
    }
    const FeasibleRegion region = locate(bounds);
    log_event("geoverify", "geo_region",
              json{{"chip", w.chip}, {"region", region.to_json()}});

    if (!w.zone.empty()) {
        ConvexPolygon zone;
        zone.pts = w.zone;
        const GeoVerdict verdict = verify_within(region, zone);
        const std::string vname = geo_verdict_name(verdict);
        fabric_->record_geo_verdict(w.chip, vname);
        log_event("geoverify", "geo_verdict", json{{"chip", w.chip}, {"verdict", vname}});
        if (verdict == GeoVerdict::confirmed_outside || verdict == GeoVerdict::empty_region) {
            log_violation("geoverify",
                          json{{"rule", "geo_zone"}, {"chip", w.chip}, {"verdict", vname}});
            fabric_->halt(w.chip);
            log_event(w.chip, "chip_halted",
                      json{{"chip", w.chip}, {"reason", "geo_zone"}});
        }
    } else if (region.empty()) {
        log_violation("geoverify", json{{"rule", "geo_spoof"}, {"chip", w.chip}});
    }
}

void Simulation::on_withhold(int widx) {
    const Workload& w = sc_.workloads[widx];
    bool changed = false;
    try {
        changed = governor_->withhold(w.governor, w.target);
    } catch (const Error& e) {
        log_event(w.governor, "withhold_failed",
                  json{{"target", w.target}, {"error", errc_name(e.code())}});
        return;
    }
    log_event(w.governor, "withhold",
              json{{"governor", w.governor}, {"target", w.target}, {"effective", changed}});
    if (!changed) return;  // already withheld: idempotent no-op

    std::vector<std::string> chips;
    if (fabric_->has_chip(w.target)) {
        chips.push_back(w.target);
    } else if (governor_->has_grant(w.target)) {
        chips = governor_->grant(w.target).chip_ids;
    }
    for (const auto& chip : chips) {
        // Settle up to the withhold instant first so every flop consumed so
        // far is evented and ledgered before the freeze narrows the window.
        for (const auto& run_id : fabric_->active_run_ids(chip)) settle_and_ledger(run_id);
        const auto halts = fabric_->freeze_chip(chip, now_);
        for (const auto& [run_id, halt_at] : halts) {
            log_event(chip, "offswitch_pending",
                      json{{"chip", chip}, {"run", run_id}, {"halt_at", halt_at}});
            const RunInfo& ri = runs_.at(run_id);
            schedule(std::max(now_, halt_at), Task::Kind::run_event, ri.widx, 0, run_id);
        }
        if (halts.empty())
            log_event(chip, "offswitch",
                      json{{"chip", chip}, {"note", "no draining runs"}});
    }
}

void Simulation::on_cap_adjust(int widx) {
    const Workload& w = sc_.workloads[widx];
    policy::PolicyConfig cfg = governor_->config();
    if (w.new_training_cap) {
        cfg.training_cap = *w.new_training_cap;
        if (cfg.harbor_flop_threshold * 10 > cfg.training_cap)
            cfg.harbor_flop_threshold = cfg.training_cap / 10;
    }
    if (w.new_inference_cap) {
        cfg.inference_cap = *w.new_inference_cap;
        if (cfg.harbor_rate_threshold * 10 > cfg.inference_cap)
            cfg.harbor_rate_threshold = cfg.inference_cap / 10;
    }
    governor_->set_config(cfg);
    log_event("agency", "cap_adjustment",
              json{{"training_cap", flop_to_json(cfg.training_cap)},
                   {"inference_cap", flop_to_json(cfg.inference_cap)}});
}

void Simulation::on_register(int widx) {
    const Workload& w = sc_.workloads[widx];
    RegistryEntry e;
    e.model_id = w.model;
    e.developer_id = w.developer;
    e.training_compute = w.declared_training;
    e.max_inference_rate_per_s = w.declared_rate;
    e.quarter = w.quarter.empty() ? quarter_label(now_) : w.quarter;
    try {
        const std::string receipt = governor_->register_training_run(e);
        log_event(w.lab.empty() ? w.developer : w.lab, "registration",
                  json{{"model", w.model},
                       {"developer", e.developer_id},
                       {"quarter", e.quarter},
                       {"declared_training", flop_to_json(e.training_compute)},
                       {"declared_rate", flop_to_json(e.max_inference_rate_per_s)},
                       {"receipt", receipt}});
    } catch (const Error& err) {
        log_event("governor", "registration_rejected",
                  json{{"model", w.model},
                       {"quarter", e.quarter},
                       {"error", errc_name(err.code())}});
    }
}

void Simulation::on_quarter(int k) {
    const std::string label = "Q" + std::to_string(k);

    // Settle active runs so period numbers are current.
    for (const auto& run_id : fabric_->active_run_ids()) settle_and_ledger(run_id);

    std::vector<std::string> agencies{"national-agency"};
    if (phase_ >= SimPhase::international_oversight)
        agencies.push_back("international-agency");
    const bool direct = phase_ >= SimPhase::verification_enforcement;

    for (const auto& chip_id : fabric_->chip_ids()) {
        TelemetryOutcome out =
            governor_->collect_telemetry(*fabric_, chip_id, label, agencies, now_, nonce_rng_);
        if (!out.ok) {
            log_violation("governor", json{{"rule", "telemetry_no_response"},
                                           {"chip", chip_id},
                                           {"period", label}});
        } else {
            json payload = out.report.payload();
            payload["direct_to_agency"] = direct;
            log_event(chip_id, "telemetry", std::move(payload));
        }
        fabric_->reset_period(chip_id);
    }

    if (phase_ >= SimPhase::national_oversight) {
        const auto missing = governor_->audit_missing(graph_);
        for (const auto& m : missing)
            log_violation("governor", json{{"rule", "mandatory_registration"},
                                           {"model", m},
                                           {"period", label}});
        const auto mismatched = governor_->audit_declared_mismatch(graph_);
        for (const auto& m : mismatched)
            log_event("governor", "audit_flag",
                      json{{"rule", "declared_mismatch"}, {"model", m}});
        log_event("governor", "audit",
                  json{{"period", label}, {"missing", missing}, {"mismatched", mismatched}});
    }

    const json report = build_report(log_.events(), k);
    log_event("sim", "quarterly_report", report);
    reports_.push_back(report);
    quarters_closed_ = k;
}

json Simulation::emit_report(int quarter_index) const {
    if (quarter_index < 1 || quarter_index > quarters_closed_)
        fail(Errc::period_open, "quarter " + std::to_string(quarter_index) +
                                    " has not closed");
    return reports_.at(quarter_index - 1);
}

json Simulation::build_report(const std::vector<Event>& events, int k) {
    Micros quarter = 0;
    double jpf = 0.0, cpf = 0.0;
    Flop training_cap, inference_cap;
    bool saw_start = false;
    for (const auto& e : events) {
        if (e.kind == "sim_start") {
            quarter = e.payload.at("quarter_micros").get<Micros>();
            const auto cfg = policy::PolicyConfig::from_json(e.payload.at("policy"));
            jpf = cfg.joules_per_flop;
            cpf = cfg.currency_per_flop;
            training_cap = cfg.training_cap;
            inference_cap = cfg.inference_cap;
            saw_start = true;
            break;
        }
    }
    if (!saw_start) fail(Errc::schema_violation, "log has no sim_start event");
    const Micros start = static_cast<Micros>(k - 1) * quarter;
    const Micros end = static_cast<Micros>(k) * quarter;

    std::map<std::string, Flop> cumulative;   // lifetime per model
    std::map<std::string, std::optional<Rate>> peak;  // in-period per model
    Flop period_flop;
    json violations = json::array();
    std::vector<std::string> missing;
    bool registration_complete = true;

    for (const auto& e : events) {
        if (e.time > end) break;
        if (e.kind == "cap_adjustment") {
            training_cap = flop_from_json(e.payload.at("training_cap"));
            inference_cap = flop_from_json(e.payload.at("inference_cap"));
            continue;
        }
        if (e.kind == "run_settled") {
            const Flop delta = flop_from_json(e.payload.at("delta"));
            cumulative[e.payload.at("model").get<std::string>()] += delta;
            if (e.time > start) period_flop += delta;
            continue;
        }
        if (e.time <= start) continue;
        if (e.kind == "output") {
            const Flop marginal = flop_from_json(e.payload.at("marginal"));
            period_flop += marginal;
            const Micros gap = e.payload.at("gap_micros").get<Micros>();
            if (gap > 0) {
                const Rate r{marginal, gap};
                auto& p = peak[e.payload.at("model").get<std::string>()];
                if (!p || rate_cmp(r, *p) > 0) p = r;
            }
        } else if (e.kind == "violation") {
            json v = e.payload;
            v["time"] = e.time;
            v["actor"] = e.actor;
            violations.push_back(std::move(v));
            if (e.payload.value("rule", "") == "mandatory_registration") {
                registration_complete = false;
                missing.push_back(e.payload.value("model", ""));
            }
        }
    }

    json models = json::object();
    for (const auto& [model, flop] : cumulative) {
        json entry{{"training_compute", flop_to_json(flop)}};
        auto it = peak.find(model);
        entry["peak_inference_rate"] =
            (it != peak.end() && it->second) ? rate_json(*it->second) : json(nullptr);
        models[model] = std::move(entry);
    }
    for (const auto& [model, p] : peak) {
        if (models.contains(model) || !p) continue;
        models[model] = json{{"training_compute", flop_to_json(Flop(0))},
                             {"peak_inference_rate", rate_json(*p)}};
    }

    return json{{"period", "Q" + std::to_string(k)},
                {"start_micros", start},
                {"end_micros", end},
                {"models", models},
                {"executed_flop", flop_to_json(period_flop)},
                {"energy_joules", period_flop.to_double() * jpf},
                {"financial_cost", period_flop.to_double() * cpf},
                {"active_caps",
                 json{{"training", flop_to_json(training_cap)},
                      {"inference", flop_to_json(inference_cap)}}},
                {"registration_complete", registration_complete},
                {"missing_registrations", missing},
                {"violations", violations}};
}

}  // namespace gateward
