#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gateward/fabric.hpp"
#include "gateward/flop.hpp"
#include "gateward/geoverify.hpp"
#include "gateward/policy.hpp"
#include "gateward/sim_time.hpp"

namespace gateward {

enum class SimPhase : int {
    pause = 0,
    national_oversight = 1,
    international_oversight = 2,
    verification_enforcement = 3,
};

const char* phase_name(SimPhase p);
std::optional<SimPhase> phase_from_name(const std::string& name);

// Enforcement checks active at a phase; cumulative, so strictness is
// monotone across the rollout.
std::vector<std::string> active_checks(SimPhase p);

struct PhasePoint {
    SimPhase phase = SimPhase::pause;
    Micros at = 0;
};

struct LabSpec {
    std::string id;
    std::string jurisdiction = "us";
    bool registers = true;  // files registry entries when oversight is active
};

struct ChipSpec {
    std::string id;
    std::string owner;
    Flop capacity_per_s;
    Vec2 location;
    std::vector<std::string> allow;
    double processing_allowance_s = 0.0;
    bool enrolled = true;
};

struct StationSpec {
    std::string id;
    Vec2 location;
};

// One scheduled behavior. `kind` selects which fields matter.
struct Workload {
    std::string kind;  // training | inference_stream | geo_challenge | withhold |
                       // cap_adjustment | register
    Micros at = 0;
    std::string lab;
    std::string model;
    std::string chip;
    std::string governor;
    std::string target;
    std::string developer;
    std::string quarter;
    std::vector<std::string> stations;  // empty: all stations
    Flop total;
    Flop chunk;
    Flop declared_plan;
    Flop marginal;
    Flop declared_training;
    Flop declared_rate;
    std::optional<Flop> rate_per_s;  // training consumption rate override
    Micros interval = 0;
    int count = 0;
    std::vector<Vec2> zone;  // convex polygon, CCW
    std::optional<Flop> new_training_cap;
    std::optional<Flop> new_inference_cap;
};

struct Scenario {
    int version = 1;
    std::string name;
    std::uint64_t seed = 0;
    Micros until = 0;
    Micros quarter = 0;
    policy::PolicyConfig policy;
    std::vector<std::string> governors;
    int threshold = 0;
    std::vector<PhasePoint> phases;
    LatencyModel latency;
    bool one_way_bound = false;
    std::vector<StationSpec> stations;
    std::vector<LabSpec> labs;
    std::vector<ChipSpec> chips;
    std::vector<std::pair<std::string, std::string>> links;
    std::optional<Rate> speed_limit;
    SpeedLimitScope limit_scope = SpeedLimitScope::per_cluster;
    std::vector<Workload> workloads;

    // Throws SchemaViolation naming the offending field path.
    static Scenario from_json(const nlohmann::json& j);
    static Scenario parse_text(const std::string& text);  // ParseError on bad JSON
    static Scenario load(const std::string& path);        // IoError if unreadable
};

}  // namespace gateward
