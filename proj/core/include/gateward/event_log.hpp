#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gateward/crypto.hpp"
#include "gateward/sim_time.hpp"

namespace gateward {

struct Event {
    Micros time = 0;
    std::uint64_t seq = 0;
    std::string actor;
    std::string kind;
    nlohmann::json payload;

    nlohmann::json to_json() const;
    static Event from_json(const nlohmann::json& j);
};

// Append-only log with a running SHA-256 chain over canonical entry bytes.
// Serialized form: one canonical JSON object per line, final line the chain
// hash in hex.
class EventLog {
  public:
    const Event& append(Micros time, const std::string& actor, const std::string& kind,
                        nlohmann::json payload);

    const std::vector<Event>& events() const { return events_; }
    std::size_t size() const { return events_.size(); }
    const Hash32& chain() const { return chain_; }
    std::string chain_hex() const;
    bool has_kind(const std::string& kind) const;
    std::vector<const Event*> of_kind(const std::string& kind) const;

    void write(std::ostream& out) const;
    std::string to_string() const;

    struct ReadResult {
        std::vector<Event> events;
        std::string declared_chain;  // final line of the file
        std::string computed_chain;
        bool chain_ok = false;
    };
    static ReadResult read(std::istream& in);  // throws ParseError

  private:
    std::vector<Event> events_;
    Hash32 chain_ = zero_hash();
};

}  // namespace gateward
