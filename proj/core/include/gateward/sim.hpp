#pragma once

#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gateward/event_log.hpp"
#include "gateward/fabric.hpp"
#include "gateward/governor.hpp"
#include "gateward/ledger.hpp"
#include "gateward/scenario.hpp"

namespace gateward {

struct SimResult {
    EventLog log;
    std::vector<nlohmann::json> reports;
    bool violations = false;
    int exit_code() const { return violations ? 2 : 0; }
};

// Deterministic discrete-event run of one scenario: single logical clock at
// 1 µs resolution, one seeded generator with labeled substreams, ties broken
// by scheduling order. (scenario bytes, seed) fully determine the log.
class Simulation {
  public:
    explicit Simulation(Scenario sc);

    SimResult run();

    // Strict successor or throws PhaseOrderViolation.
    void advance_phase(SimPhase next);
    SimPhase phase() const { return phase_; }

    // Report for a closed quarter; PeriodOpen if it has not closed yet.
    nlohmann::json emit_report(int quarter_index) const;

    // Pure function of the log: recomputes the report for quarter `k` from
    // events alone (config comes from the sim_start event plus any
    // cap_adjustment events). Both the simulation and the report CLI use it.
    static nlohmann::json build_report(const std::vector<Event>& events, int k);

    const EventLog& log() const { return log_; }
    const ledger::CausalGraph& graph() const { return graph_; }
    Fabric& fabric() { return *fabric_; }
    GovernorService& governor() { return *governor_; }

  private:
    struct Task {
        Micros at = 0;
        std::uint64_t order = 0;
        enum class Kind {
            phase,
            training_chunk,
            run_event,
            output,
            geo,
            withhold,
            cap_adjust,
            register_wl,
            quarter,
        } kind = Kind::phase;
        int widx = -1;
        int sub = 0;
        std::string id;
    };
    struct TaskAfter {
        bool operator()(const Task& a, const Task& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.order > b.order;
        }
    };

    struct TrainState {
        Flop requested;       // quota asked for so far
        int chunk_no = 0;
        bool stopped = false;
    };
    struct RunInfo {
        int widx = -1;
        std::string model;
        std::string chip;
        Flop ledgered;          // portion already written to the ledger
        int segments = 0;
        std::string prev_node;  // ledger chain within the model
    };
    struct StreamState {
        LicenseGrant grant;
        bool licensed = false;
        Micros prev_at = -1;
        int emitted = 0;
        bool halted = false;
        std::vector<std::string> outputs;
    };

    void schedule(Micros at, Task::Kind kind, int widx, int sub, std::string id = {});
    void setup();
    void dispatch(const Task& t);

    void on_phase(int idx);
    void on_training_chunk(int widx, int chunk_no);
    void on_run_event(const std::string& run_id);
    void settle_and_ledger(const std::string& run_id);
    void on_output(int widx, int n);
    void on_geo(int widx);
    void on_withhold(int widx);
    void on_cap_adjust(int widx);
    void on_register(int widx);
    void on_quarter(int k);

    const Event& log_event(const std::string& actor, const std::string& kind,
                           nlohmann::json payload);
    void log_violation(const std::string& actor, nlohmann::json payload);
    std::string quarter_label(Micros at) const;
    void add_ledger_node(ledger::ComputeNode node);

    Scenario sc_;
    KeyDirectory keys_;
    std::unique_ptr<GovernorService> governor_;
    std::unique_ptr<Fabric> fabric_;
    ledger::CausalGraph graph_;
    Rng latency_rng_;
    Rng nonce_rng_;
    EventLog log_;
    std::vector<nlohmann::json> reports_;
    std::map<std::string, Station> stations_;
    SimPhase phase_ = SimPhase::pause;
    bool phase_set_ = false;
    Micros now_ = 0;
    std::uint64_t order_ = 0;
    bool violations_ = false;
    std::priority_queue<Task, std::vector<Task>, TaskAfter> queue_;
    std::map<int, TrainState> train_;
    std::map<std::string, RunInfo> runs_;
    std::map<int, StreamState> streams_;
    std::map<std::string, std::string> model_terminal_;
    int quarters_closed_ = 0;
};

}  // namespace gateward
