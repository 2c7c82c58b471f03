#include "gateward/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gateward/canonical.hpp"
#include "gateward/errors.hpp"

namespace gateward {

using nlohmann::json;

const char* phase_name(SimPhase p) {
    switch (p) {
        case SimPhase::pause: return "pause";
        case SimPhase::national_oversight: return "national_oversight";
        case SimPhase::international_oversight: return "international_oversight";
        case SimPhase::verification_enforcement: return "verification_enforcement";
    }
    return "?";
}

std::optional<SimPhase> phase_from_name(const std::string& name) {
    for (SimPhase p : {SimPhase::pause, SimPhase::national_oversight,
                       SimPhase::international_oversight, SimPhase::verification_enforcement})
        if (name == phase_name(p)) return p;
    return std::nullopt;
}

std::vector<std::string> active_checks(SimPhase p) {
    std::vector<std::string> checks{"plan_cap"};
    if (p >= SimPhase::national_oversight) {
        checks.push_back("registration");
        checks.push_back("cluster_verification");
    }
    if (p >= SimPhase::international_oversight) checks.push_back("dual_reporting");
    if (p >= SimPhase::verification_enforcement) checks.push_back("direct_telemetry");
    return checks;
}

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& why) {
    fail(Errc::schema_violation, path + ": " + why);
}

Flop flop_field(const json& j, const std::string& key, const std::string& path,
                Flop fallback = Flop(0)) {
    if (!j.contains(key)) return fallback;
    try {
        return flop_from_json(j.at(key));
    } catch (const Error&) {
        bad(path + "." + key, "not a flop quantity");
    }
}

Micros seconds_field(const json& j, const std::string& key, const std::string& path,
                     Micros fallback = 0) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (v.is_number()) return static_cast<Micros>(v.get<double>() * 1e6 + 0.5);
    if (v.is_string()) {
        Micros out = 0;
        if (parse_seconds(v.get<std::string>(), out)) return out;
    }
    bad(path + "." + key, "not a time in seconds");
}

Vec2 point_field(const json& j, const std::string& path) {
    if (j.is_array() && j.size() == 2)
        return {j.at(0).get<double>(), j.at(1).get<double>()};
    if (j.is_object() && j.contains("x") && j.contains("y"))
        return {j.at("x").get<double>(), j.at("y").get<double>()};
    bad(path, "expected [x, y] or {x, y}");
}

}  // namespace

Scenario Scenario::from_json(const json& j) {
    Scenario sc;
    if (!j.is_object()) bad("$", "scenario must be an object");
    if (!j.contains("version")) bad("version", "required");
    sc.version = j.at("version").get<int>();
    if (sc.version != 1) bad("version", "unsupported version");
    sc.name = j.value("name", "scenario");
    sc.seed = j.value("seed", std::uint64_t{0});
    sc.quarter = seconds_field(j, "quarter_seconds", "$", 100 * kMicrosPerSecond);
    if (sc.quarter <= 0) bad("quarter_seconds", "must be positive");

    if (j.contains("policy")) {
        try {
            sc.policy = policy::PolicyConfig::from_json(j.at("policy"));
        } catch (const Error& e) {
            if (e.code() == Errc::schema_violation || e.code() == Errc::parse_error)
                bad("policy", e.what());
            throw;
        }
    }
    sc.policy.validate();

    sc.governors = j.value("governors", std::vector<std::string>{"gov-1", "gov-2", "gov-3"});
    sc.threshold = j.value("threshold", 2);
    if (sc.governors.empty()) bad("governors", "at least one governor");
    if (sc.threshold < 1 || sc.threshold > static_cast<int>(sc.governors.size()))
        bad("threshold", "outside [1, M]");

    if (j.contains("phases")) {
        if (!j.at("phases").is_array() || j.at("phases").empty())
            bad("phases", "must be a non-empty array");
        int idx = 0;
        int last_phase = -1;
        Micros last_at = -1;
        for (const auto& pj : j.at("phases")) {
            const std::string path = "phases[" + std::to_string(idx) + "]";
            PhasePoint pp;
            const auto name = pj.value("phase", "");
            const auto parsed = phase_from_name(name);
            if (!parsed) bad(path + ".phase", "unknown phase: " + name);
            pp.phase = *parsed;
            pp.at = seconds_field(pj, "at", path, -1);
            if (pp.at < 0) bad(path + ".at", "required");
            if (idx == 0 && pp.phase != SimPhase::pause)
                bad(path + ".phase", "rollout starts at pause");
            if (idx > 0 && static_cast<int>(pp.phase) != last_phase + 1)
                bad(path + ".phase", "phases must activate in rollout order, none skipped");
            if (pp.at <= last_at) bad(path + ".at", "activation times must increase");
            if (idx == 0 && pp.at != 0) bad(path + ".at", "first phase must start at 0");
            last_phase = static_cast<int>(pp.phase);
            last_at = pp.at;
            sc.phases.push_back(pp);
            ++idx;
        }
    } else {
        sc.phases.push_back({SimPhase::pause, 0});
    }

    if (j.contains("latency")) {
        const json& lj = j.at("latency");
        sc.latency.extra_delay_s = lj.value("extra_delay", 0.0);
        sc.latency.jitter_s = lj.value("jitter", 0.0);
        sc.one_way_bound = lj.value("one_way_bound", false);
        if (sc.latency.extra_delay_s < 0) bad("latency.extra_delay", "must be >= 0");
        if (sc.latency.jitter_s < 0) bad("latency.jitter", "must be >= 0");
    }

    int idx = 0;
    for (const auto& sj : j.value("stations", json::array())) {
        const std::string path = "stations[" + std::to_string(idx++) + "]";
        StationSpec st;
        st.id = sj.value("id", "");
        if (st.id.empty()) bad(path + ".id", "required");
        st.location = point_field(sj.contains("location") ? sj.at("location") : sj, path);
        sc.stations.push_back(st);
    }

    idx = 0;
    for (const auto& lj : j.value("labs", json::array())) {
        const std::string path = "labs[" + std::to_string(idx++) + "]";
        LabSpec lab;
        lab.id = lj.value("id", "");
        if (lab.id.empty()) bad(path + ".id", "required");
        lab.jurisdiction = lj.value("jurisdiction", "us");
        lab.registers = lj.value("registers", true);
        sc.labs.push_back(lab);
    }
    if (sc.labs.empty()) bad("labs", "at least one lab");

    idx = 0;
    for (const auto& cj : j.value("chips", json::array())) {
        const std::string path = "chips[" + std::to_string(idx++) + "]";
        ChipSpec c;
        c.id = cj.value("id", "");
        if (c.id.empty()) bad(path + ".id", "required");
        c.owner = cj.value("owner", sc.labs.front().id);
        c.capacity_per_s = flop_field(cj, "capacity", path);
        if (c.capacity_per_s.is_zero()) bad(path + ".capacity", "must be > 0");
        // Position matters only to geolocation; chips that never face a
        // ranging challenge may omit it and sit at the origin.
        if (cj.contains("location"))
            c.location = point_field(cj.at("location"), path);
        else if (cj.contains("x") && cj.contains("y"))
            c.location = point_field(cj, path);
        c.allow = cj.value("allow", std::vector<std::string>{});
        c.processing_allowance_s = cj.value("processing_allowance", 0.0);
        c.enrolled = cj.value("enrolled", true);
        sc.chips.push_back(c);
    }
    if (sc.chips.empty()) bad("chips", "at least one chip");

    idx = 0;
    for (const auto& lj : j.value("links", json::array())) {
        const std::string path = "links[" + std::to_string(idx++) + "]";
        if (!lj.is_array() || lj.size() != 2) bad(path, "expected [a, b]");
        sc.links.emplace_back(lj.at(0).get<std::string>(), lj.at(1).get<std::string>());
    }

    if (j.contains("speed_limit")) {
        const json& slj = j.at("speed_limit");
        Rate r = Rate::per_second(flop_field(slj, "rate", "speed_limit"));
        if (r.flop.is_zero()) bad("speed_limit.rate", "must be > 0");
        sc.speed_limit = r;
        const std::string scope = slj.value("scope", "per_cluster");
        if (scope == "per_chip")
            sc.limit_scope = SpeedLimitScope::per_chip;
        else if (scope == "per_cluster")
            sc.limit_scope = SpeedLimitScope::per_cluster;
        else
            bad("speed_limit.scope", "per_chip or per_cluster");
    }

    idx = 0;
    Micros latest = 0;
    for (const auto& wj : j.value("workloads", json::array())) {
        const std::string path = "workloads[" + std::to_string(idx++) + "]";
        Workload w;
        w.kind = wj.value("kind", "");
        w.at = seconds_field(wj, "at", path, 0);
        latest = std::max(latest, w.at);
        if (w.kind == "training") {
            w.lab = wj.value("lab", "");
            w.model = wj.value("model", "");
            w.chip = wj.value("chip", "");
            if (w.model.empty()) bad(path + ".model", "required");
            if (w.chip.empty()) bad(path + ".chip", "required");
            w.total = flop_field(wj, "total", path);
            if (w.total.is_zero()) bad(path + ".total", "must be > 0");
            w.chunk = flop_field(wj, "chunk", path, w.total);
            if (w.chunk.is_zero()) bad(path + ".chunk", "must be > 0");
            w.declared_plan = flop_field(wj, "declared_plan", path, w.total);
            w.declared_rate = flop_field(wj, "declared_rate", path);
            if (wj.contains("rate")) w.rate_per_s = flop_field(wj, "rate", path);
        } else if (w.kind == "inference_stream") {
            w.lab = wj.value("lab", "");
            w.model = wj.value("model", "");
            w.chip = wj.value("chip", "");
            if (w.model.empty()) bad(path + ".model", "required");
            if (w.chip.empty()) bad(path + ".chip", "required");
            w.marginal = flop_field(wj, "marginal", path);
            if (w.marginal.is_zero()) bad(path + ".marginal", "must be > 0");
            w.interval = seconds_field(wj, "interval", path, 0);
            if (w.interval <= 0) bad(path + ".interval", "must be positive");
            w.count = wj.value("count", 0);
            if (w.count < 1) bad(path + ".count", "must be >= 1");
        } else if (w.kind == "geo_challenge") {
            w.chip = wj.value("chip", "");
            if (w.chip.empty()) bad(path + ".chip", "required");
            w.stations = wj.value("stations", std::vector<std::string>{});
            if (wj.contains("zone")) {
                int vi = 0;
                for (const auto& vj : wj.at("zone"))
                    w.zone.push_back(point_field(vj, path + ".zone[" + std::to_string(vi++) + "]"));
                if (w.zone.size() < 3) bad(path + ".zone", "needs >= 3 vertices");
            }
        } else if (w.kind == "withhold") {
            w.governor = wj.value("governor", "");
            w.target = wj.value("target", "");
            if (w.governor.empty()) bad(path + ".governor", "required");
            if (w.target.empty()) bad(path + ".target", "required");
        } else if (w.kind == "cap_adjustment") {
            if (wj.contains("training_cap"))
                w.new_training_cap = flop_field(wj, "training_cap", path);
            if (wj.contains("inference_cap"))
                w.new_inference_cap = flop_field(wj, "inference_cap", path);
            if (!w.new_training_cap && !w.new_inference_cap)
                bad(path, "needs training_cap or inference_cap");
        } else if (w.kind == "register") {
            w.lab = wj.value("lab", "");
            w.model = wj.value("model", "");
            w.developer = wj.value("developer", w.lab);
            w.quarter = wj.value("quarter", "");
            if (w.model.empty()) bad(path + ".model", "required");
            w.declared_training = flop_field(wj, "training_compute", path);
            w.declared_rate = flop_field(wj, "max_inference_rate", path);
        } else {
            bad(path + ".kind", "unknown workload kind: " + w.kind);
        }
        sc.workloads.push_back(w);
    }

    sc.until = seconds_field(j, "until", "$", 0);
    if (sc.until == 0) sc.until = latest + 2 * sc.quarter;
    return sc;
}

Scenario Scenario::parse_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(Errc::parse_error, std::string("scenario: ") + e.what());
    }
    return from_json(j);
}

Scenario Scenario::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot read scenario: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

}  // namespace gateward
