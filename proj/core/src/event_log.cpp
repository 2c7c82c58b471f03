#include "gateward/event_log.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "gateward/canonical.hpp"
#include "gateward/errors.hpp"

namespace gateward {

using nlohmann::json;

json Event::to_json() const {
    return json{{"time", time},
                {"seq", seq},
                {"actor", actor},
                {"kind", kind},
                {"payload", payload}};
}

Event Event::from_json(const json& j) {
    Event e;
    e.time = j.at("time").get<Micros>();
    e.seq = j.at("seq").get<std::uint64_t>();
    e.actor = j.at("actor").get<std::string>();
    e.kind = j.at("kind").get<std::string>();
    e.payload = j.at("payload");
    return e;
}

const Event& EventLog::append(Micros time, const std::string& actor,
                              const std::string& kind, json payload) {
    Event e;
    e.time = time;
    e.seq = events_.size();
    e.actor = actor;
    e.kind = kind;
    e.payload = std::move(payload);

    const std::string line = canonical_dump(e.to_json());
    Bytes buf(chain_.begin(), chain_.end());
    buf.insert(buf.end(), line.begin(), line.end());
    chain_ = sha256(buf);

    events_.push_back(std::move(e));
    return events_.back();
}

std::string EventLog::chain_hex() const { return hash_hex(chain_); }

bool EventLog::has_kind(const std::string& kind) const {
    for (const auto& e : events_)
        if (e.kind == kind) return true;
    return false;
}

std::vector<const Event*> EventLog::of_kind(const std::string& kind) const {
    std::vector<const Event*> out;
    for (const auto& e : events_)
        if (e.kind == kind) out.push_back(&e);
    return out;
}

void EventLog::write(std::ostream& out) const {
    for (const auto& e : events_) out << canonical_dump(e.to_json()) << "\n";
    out << chain_hex() << "\n";
}

std::string EventLog::to_string() const {
    std::ostringstream os;
    write(os);
    return os.str();
}

EventLog::ReadResult EventLog::read(std::istream& in) {
    ReadResult out;
    Hash32 chain = zero_hash();
    std::string line, last;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (!last.empty()) {
            json j;
            try {
                j = json::parse(last);
            } catch (const json::exception& e) {
                fail(Errc::parse_error, std::string("log line: ") + e.what());
            }
            Bytes buf(chain.begin(), chain.end());
            // Hash the bytes as stored, so tampering with whitespace shows too.
            buf.insert(buf.end(), last.begin(), last.end());
            chain = sha256(buf);
            out.events.push_back(Event::from_json(j));
        }
        last = line;
    }
    out.declared_chain = last;
    out.computed_chain = hash_hex(chain);
    out.chain_ok = !last.empty() && out.declared_chain == out.computed_chain;
    return out;
}

}  // namespace gateward
