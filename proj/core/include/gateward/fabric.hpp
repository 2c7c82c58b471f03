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
#include "gateward/flop.hpp"
#include "gateward/geoverify.hpp"
#include "gateward/licensing.hpp"
#include "gateward/rng.hpp"
#include "gateward/sim_time.hpp"

namespace gateward {

enum class SpeedLimitScope { per_chip, per_cluster };

struct FabricConfig {
    Flop cluster_cap_per_s = Flop::pow10(18);
    std::optional<Rate> speed_limit;  // governor-set; absent = unlimited
    SpeedLimitScope scope = SpeedLimitScope::per_cluster;
    Flop quota_quantum = Flop::pow10(16);
};

enum class ExecStatus {
    ok,
    license_invalid,
    license_exhausted,
    speed_limit_exceeded,
    chip_halted,
};
const char* exec_status_name(ExecStatus s);

enum class LinkStatus { linked, not_allow_listed, cluster_cap_exceeded };
const char* link_status_name(LinkStatus s);

struct ExecutionRecord {
    std::string chip_id;
    std::string grant_id;
    Flop workload;
    Micros window = 0;
    ExecStatus status = ExecStatus::ok;
    Micros at = 0;
};

// A long workload consuming flop continuously at a fixed rate. Licensing is
// conceptually per quota quantum; settlement is lazy, so no per-quantum
// events exist. The chip may run at most one quantum past the last settled
// point once its license signal is withheld.
struct MeteredRun {
    std::string run_id;
    std::string chip_id;
    std::string model_id;
    Flop planned;
    Flop rate_per_s;
    Micros t0 = 0;
    Flop settled;        // consumed and paid for
    Micros settled_at = 0;
    bool frozen = false;
    Flop allowed_total;  // consumption ceiling once frozen
    bool finished = false;
};

struct SettleResult {
    Flop delta;
    Flop total;
    bool finished = false;
    bool exhausted = false;  // stopped early on an empty balance
};

struct PeriodStats {
    Flop executed;
    std::optional<Rate> peak;
    std::vector<std::string> geo_verdicts;
};

struct Chip {
    std::string chip_id;
    KeyPair key;
    Flop capacity_per_s;
    Vec2 true_location;
    std::set<std::string> allow_list;
    double processing_allowance_s = 0.0;
    Flop balance;
    bool halted = false;
    Flop lifetime_granted;
    Flop lifetime_executed;
    std::set<std::string> credited_grants;
    PeriodStats period;
};

class Fabric {
  public:
    Fabric(uint64_t seed, KeyDirectory& keys, FabricConfig cfg = {},
           const MultiSigPolicy* policy = nullptr,
           const WithholdRegistry* withheld = nullptr);

    const Chip& provision_chip(const std::string& chip_id, Flop capacity_per_s,
                               Vec2 location, std::set<std::string> allow_list = {},
                               double processing_allowance_s = 0.0);

    bool has_chip(const std::string& chip_id) const;
    const Chip& chip(const std::string& chip_id) const;
    std::vector<std::string> chip_ids() const;
    void allow(const std::string& a, const std::string& b);  // one direction

    // Link permits: governor-signed envelopes authorizing one link; required
    // for every link of any cluster whose aggregate rate exceeds the cap.
    static nlohmann::json link_permit_payload(const std::string& a, const std::string& b);
    bool register_permit(const SignedEnvelope& permit);
    void revoke_permit(const std::string& a, const std::string& b);

    LinkStatus connect(const std::string& a, const std::string& b,
                       const SignedEnvelope* permit = nullptr);
    bool linked(const std::string& a, const std::string& b) const;
    std::vector<std::string> cluster_of(const std::string& chip_id) const;
    Flop cluster_rate(const std::string& chip_id) const;

    GrantCheck install_grant(const std::string& chip_id, const LicenseGrant& grant,
                             Micros now);
    ExecutionRecord execute(const std::string& chip_id, Flop workload, Micros window,
                            const LicenseGrant& grant, Micros now);

    // Metered runs.
    const MeteredRun& start_run(const std::string& run_id, const std::string& chip_id,
                                const std::string& model_id, Flop planned, Micros now,
                                std::optional<Flop> rate_per_s = std::nullopt);
    bool has_run(const std::string& run_id) const;
    const MeteredRun& run(const std::string& run_id) const;
    SettleResult settle_run(const std::string& run_id, Micros now);
    // Freezes every active run on the chip; returns (run_id, halt time) per
    // unfinished run.  The halt time is when its prepaid window runs out and
    // may be in the past if nothing remains to drain.
    std::vector<std::pair<std::string, Micros>> freeze_chip(const std::string& chip_id,
                                                            Micros now);
    // Next instant this run needs attention (completion, exhaustion or halt).
    std::optional<Micros> next_run_event(const std::string& run_id) const;
    std::vector<std::string> active_run_ids() const;
    std::vector<std::string> active_run_ids(const std::string& chip_id) const;

    void halt(const std::string& chip_id);

    // Geolocation plumbing.
    EchoResponder responder(const std::string& chip_id, Rng& rng) const;
    void record_geo_verdict(const std::string& chip_id, const std::string& verdict);

    // Telemetry.
    SignedEnvelope make_telemetry(const std::string& chip_id, const std::string& period,
                                  const std::vector<std::string>& agencies, Micros now,
                                  Rng& rng) const;
    void reset_period(const std::string& chip_id);

    const FabricConfig& config() const { return cfg_; }
    void set_speed_limit(std::optional<Rate> limit, SpeedLimitScope scope);

  private:
    Chip& chip_mut(const std::string& chip_id);
    MeteredRun& run_mut(const std::string& run_id);
    static std::string pair_key(const std::string& a, const std::string& b);
    bool link_permitted(const std::string& a, const std::string& b) const;
    bool component_fully_permitted(const std::vector<std::string>& members) const;
    bool speed_ok(const Chip& c, Flop workload, Micros window) const;
    void note_rate(Chip& c, Flop flop, Micros window);

    uint64_t seed_;
    KeyDirectory& keys_;
    FabricConfig cfg_;
    const MultiSigPolicy* policy_;
    const WithholdRegistry* withheld_;
    std::map<std::string, Chip> chips_;
    std::map<std::string, std::set<std::string>> links_;
    std::set<std::string> permits_;
    std::map<std::string, MeteredRun> runs_;
};

}  // namespace gateward
