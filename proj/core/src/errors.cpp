#include "gateward/errors.hpp"

namespace gateward {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::unknown_parent: return "UnknownParent";
        case Errc::cycle_detected: return "CycleDetected";
        case Errc::causality_violation: return "CausalityViolation";
        case Errc::negative_flop: return "NegativeFlop";
        case Errc::invalid_human_input: return "InvalidHumanInput";
        case Errc::duplicate_node: return "DuplicateNode";
        case Errc::unknown_model: return "UnknownModel";
        case Errc::unknown_output: return "UnknownOutput";
        case Errc::unknown_node: return "UnknownNode";
        case Errc::stream_too_short: return "StreamTooShort";
        case Errc::non_monotonic_timestamps: return "NonMonotonicTimestamps";
        case Errc::invalid_capacity: return "InvalidCapacity";
        case Errc::unknown_chip: return "UnknownChip";
        case Errc::unknown_station: return "UnknownStation";
        case Errc::duplicate_registration: return "DuplicateRegistration";
        case Errc::unknown_target: return "UnknownTarget";
        case Errc::incomplete_dossier: return "IncompleteDossier";
        case Errc::no_parties_named: return "NoPartiesNamed";
        case Errc::parse_error: return "ParseError";
        case Errc::schema_violation: return "SchemaViolation";
        case Errc::phase_order_violation: return "PhaseOrderViolation";
        case Errc::period_open: return "PeriodOpen";
        case Errc::no_response: return "NoResponse";
        case Errc::bad_signature: return "BadSignature";
        case Errc::invalid_policy: return "InvalidPolicy";
        case Errc::unknown_grant: return "UnknownGrant";
        case Errc::duplicate_id: return "DuplicateId";
        case Errc::io_error: return "IoError";
    }
    return "UnknownError";
}

} // namespace gateward
