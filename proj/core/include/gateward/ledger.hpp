#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gateward/flop.hpp"
#include "gateward/sim_time.hpp"

namespace gateward::ledger {

enum class NodeKind { data_prep, training, fine_tune, inference, human_input };

const char* kind_name(NodeKind k);
std::optional<NodeKind> kind_from_name(const std::string& name);

/// One computation (or human contribution) in the compute causal graph.
///
/// Tally semantics carried by the flags:
///  - human_cutoff: the node's own flop counts, but ancestry above it does
///    not (a human supplied a significant change at this point).
///  - discarded: the node stays in the graph for audit but contributes zero
///    to every tally (a trial rejected by human judgment).
struct ComputeNode {
    std::string node_id;
    NodeKind kind = NodeKind::inference;
    Flop flop;
    Micros wall_time = 0;
    std::vector<std::string> parents;
    bool human_cutoff = false;
    bool discarded = false;
    std::string model_id;  // empty: not associated with a model
    std::string output_id; // empty: not a terminal output node
};

/// A single emitted output of some stream, with the compute that is new
/// relative to the previous output of the same stream.
struct OutputRecord {
    std::string output_id;
    std::string terminal_node;
    Micros emitted_at = 0;
    Flop marginal_flop;
};

/// Peak rate is the binding quantity against a cap; the mean is reported too.
struct RateSummary {
    Rate peak = Rate::zero();
    double mean_flop_per_sec = 0.0;
};

/// DAG of compute events with the tallies built on it.
///
/// Mutations are expected to be serialized through a single owner; tally
/// queries are const and safe to run concurrently on a snapshot (the class
/// has value semantics, so a snapshot is a copy).
class CausalGraph {
public:
    /// Validates and inserts. Parents must exist with strictly earlier
    /// wall_time. Throws UnknownParent, CycleDetected, CausalityViolation,
    /// InvalidHumanInput, DuplicateNode.
    const std::string& add_node(ComputeNode node);

    /// Stops tally recursion above this node from now on. Idempotent.
    void mark_human_cutoff(const std::string& node_id);
    void mark_discarded(const std::string& node_id);

    bool contains(const std::string& node_id) const { return nodes_.count(node_id) != 0; }
    const ComputeNode& node(const std::string& node_id) const;
    std::size_t size() const { return nodes_.size(); }

    const std::map<std::string, std::vector<std::string>>& models() const { return model_index_; }
    const std::map<std::string, std::string>& outputs() const { return output_index_; }

    /// Total flop in the model's causal graph: data prep, training,
    /// fine-tuning and every non-discarded ancestor, each counted once,
    /// recursion cut at human_cutoff nodes.
    Flop training_compute(const std::string& model_id) const;

    /// Total flop in the output's causal graph, including the training
    /// compute of every model that contributed to it.
    Flop output_compute(const std::string& output_id) const;

    /// Flop in `terminal`'s ancestry that is not in `prev_terminal`'s
    /// (empty prev: the full output compute). This is "the compute used to
    /// produce the next output" for rate purposes.
    Flop marginal_compute(const std::string& prev_terminal,
                          const std::string& terminal) const;

    /// Builds the OutputRecord stream for consecutive outputs, computing
    /// marginal compute against each previous output.
    std::vector<OutputRecord> build_stream(const std::vector<std::string>& output_ids) const;

    /// Line-record export, canonical field order:
    /// node_id kind flop wall_time parents human_cutoff discarded model_id output_id
    void write_records(std::ostream& out) const;
    static CausalGraph read_records(std::istream& in); // throws ParseError

private:
    Flop ancestry_sum(const std::vector<std::string>& roots) const;

    std::unordered_map<std::string, ComputeNode> nodes_;
    std::vector<std::string> insertion_order_;
    std::map<std::string, std::vector<std::string>> model_index_;
    std::map<std::string, std::string> output_index_;
};

/// Max (and mean) of marginal_flop / interval over consecutive pairs.
/// Throws StreamTooShort (< 2 records) and NonMonotonicTimestamps.
RateSummary inference_rate(const std::vector<OutputRecord>& stream);

} // namespace gateward::ledger
