#pragma once

#include <stdexcept>
#include <string>

namespace gateward {

/// Contract-violation codes. Refusals that are part of the modeled protocol
/// (license denials, link refusals, verdicts) are ordinary return values,
/// not errors; this enum covers misuse of an interface or malformed input.
enum class Errc {
    unknown_parent,
    cycle_detected,
    causality_violation,
    negative_flop,
    invalid_human_input,
    duplicate_node,
    unknown_model,
    unknown_output,
    unknown_node,
    stream_too_short,
    non_monotonic_timestamps,
    invalid_capacity,
    unknown_chip,
    unknown_station,
    duplicate_registration,
    unknown_target,
    incomplete_dossier,
    no_parties_named,
    parse_error,
    schema_violation,
    phase_order_violation,
    period_open,
    no_response,
    bad_signature,
    invalid_policy,
    unknown_grant,
    duplicate_id,
    io_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) {
    throw Error(code, msg);
}

} // namespace gateward
