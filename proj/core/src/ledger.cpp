#include "gateward/ledger.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "gateward/errors.hpp"

namespace gateward::ledger {

const char* kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::data_prep: return "data_prep";
        case NodeKind::training: return "training";
        case NodeKind::fine_tune: return "fine_tune";
        case NodeKind::inference: return "inference";
        case NodeKind::human_input: return "human_input";
    }
    return "?";
}

std::optional<NodeKind> kind_from_name(const std::string& name) {
    if (name == "data_prep") return NodeKind::data_prep;
    if (name == "training") return NodeKind::training;
    if (name == "fine_tune") return NodeKind::fine_tune;
    if (name == "inference") return NodeKind::inference;
    if (name == "human_input") return NodeKind::human_input;
    return std::nullopt;
}

namespace {

bool valid_id(const std::string& id) {
    if (id.empty()) return false;
    for (char c : id)
        if (c <= ' ' || c == ',' || c == 0x7f) return false;
    return true;
}

} // namespace

const std::string& CausalGraph::add_node(ComputeNode node) {
    if (!valid_id(node.node_id))
        fail(Errc::parse_error, "node id must be non-empty without whitespace or commas");
    if (nodes_.count(node.node_id))
        fail(Errc::duplicate_node, "node '" + node.node_id + "' already exists");
    if (node.kind == NodeKind::human_input && !node.flop.is_zero())
        fail(Errc::invalid_human_input, "human_input nodes carry zero flop");
    for (const auto& parent : node.parents) {
        if (parent == node.node_id)
            fail(Errc::cycle_detected, "node '" + node.node_id + "' lists itself as parent");
        auto it = nodes_.find(parent);
        if (it == nodes_.end())
            fail(Errc::unknown_parent, "parent '" + parent + "' of '" + node.node_id + "'");
        // Edges must run strictly forward in time; this is what keeps the
        // graph acyclic under insertion-only mutation.
        if (it->second.wall_time >= node.wall_time)
            fail(Errc::causality_violation,
                 "parent '" + parent + "' is not strictly earlier than '" + node.node_id + "'");
    }
    auto [it, ok] = nodes_.emplace(node.node_id, std::move(node));
    const ComputeNode& stored = it->second;
    insertion_order_.push_back(stored.node_id);
    if (!stored.model_id.empty()) model_index_[stored.model_id].push_back(stored.node_id);
    if (!stored.output_id.empty()) output_index_[stored.output_id] = stored.node_id;
    return stored.node_id;
}

void CausalGraph::mark_human_cutoff(const std::string& node_id) {
    auto it = nodes_.find(node_id);
    if (it == nodes_.end()) fail(Errc::unknown_node, "'" + node_id + "'");
    it->second.human_cutoff = true;
}

void CausalGraph::mark_discarded(const std::string& node_id) {
    auto it = nodes_.find(node_id);
    if (it == nodes_.end()) fail(Errc::unknown_node, "'" + node_id + "'");
    it->second.discarded = true;
}

const ComputeNode& CausalGraph::node(const std::string& node_id) const {
    auto it = nodes_.find(node_id);
    if (it == nodes_.end()) fail(Errc::unknown_node, "'" + node_id + "'");
    return it->second;
}

Flop CausalGraph::ancestry_sum(const std::vector<std::string>& roots) const {
    // Iterative DFS. Each reachable node counts once; discarded nodes are
    // traversed but contribute nothing; human_cutoff nodes contribute their
    // own flop and hide their ancestry.
    std::unordered_set<std::string> visited;
    std::vector<const ComputeNode*> stack;
    stack.reserve(roots.size());
    for (const auto& id : roots) {
        if (visited.insert(id).second) stack.push_back(&node(id));
    }
    Flop total;
    while (!stack.empty()) {
        const ComputeNode* n = stack.back();
        stack.pop_back();
        if (!n->discarded) total += n->flop;
        if (n->human_cutoff) continue;
        for (const auto& parent : n->parents) {
            if (visited.insert(parent).second) stack.push_back(&node(parent));
        }
    }
    return total;
}

Flop CausalGraph::training_compute(const std::string& model_id) const {
    auto it = model_index_.find(model_id);
    if (it == model_index_.end() || it->second.empty())
        fail(Errc::unknown_model, "'" + model_id + "'");
    return ancestry_sum(it->second);
}

Flop CausalGraph::output_compute(const std::string& output_id) const {
    auto it = output_index_.find(output_id);
    if (it == output_index_.end()) fail(Errc::unknown_output, "'" + output_id + "'");
    return ancestry_sum({it->second});
}

Flop CausalGraph::marginal_compute(const std::string& prev_terminal,
                                   const std::string& terminal) const {
    // Ancestors of `terminal` minus ancestors of `prev_terminal`, summed
    // under the same discarded/cutoff rules. Collect the previous output's
    // ancestry first, then walk the new output skipping that set.
    std::unordered_set<std::string> shared;
    if (!prev_terminal.empty()) {
        std::vector<const ComputeNode*> stack{&node(prev_terminal)};
        shared.insert(prev_terminal);
        while (!stack.empty()) {
            const ComputeNode* n = stack.back();
            stack.pop_back();
            if (n->human_cutoff) continue;
            for (const auto& parent : n->parents)
                if (shared.insert(parent).second) stack.push_back(&node(parent));
        }
    }
    std::unordered_set<std::string> visited;
    std::vector<const ComputeNode*> stack;
    Flop total;
    if (!shared.count(terminal)) {
        stack.push_back(&node(terminal));
        visited.insert(terminal);
    }
    while (!stack.empty()) {
        const ComputeNode* n = stack.back();
        stack.pop_back();
        if (!n->discarded) total += n->flop;
        if (n->human_cutoff) continue;
        for (const auto& parent : n->parents) {
            if (shared.count(parent)) continue;
            if (visited.insert(parent).second) stack.push_back(&node(parent));
        }
    }
    return total;
}

std::vector<OutputRecord> CausalGraph::build_stream(
    const std::vector<std::string>& output_ids) const {
    std::vector<OutputRecord> stream;
    stream.reserve(output_ids.size());
    std::string prev;
    for (const auto& output_id : output_ids) {
        auto it = output_index_.find(output_id);
        if (it == output_index_.end()) fail(Errc::unknown_output, "'" + output_id + "'");
        OutputRecord rec;
        rec.output_id = output_id;
        rec.terminal_node = it->second;
        rec.emitted_at = node(it->second).wall_time;
        rec.marginal_flop = marginal_compute(prev, it->second);
        stream.push_back(std::move(rec));
        prev = it->second;
    }
    return stream;
}

RateSummary inference_rate(const std::vector<OutputRecord>& stream) {
    if (stream.size() < 2)
        fail(Errc::stream_too_short, "inference rate needs at least two outputs");
    RateSummary summary;
    Flop marginal_total;
    for (std::size_t i = 1; i < stream.size(); ++i) {
        const Micros dt = stream[i].emitted_at - stream[i - 1].emitted_at;
        if (dt <= 0)
            fail(Errc::non_monotonic_timestamps,
                 "output '" + stream[i].output_id + "' does not advance the clock");
        const Rate rate{stream[i].marginal_flop, dt};
        if (rate_cmp(rate, summary.peak) > 0) summary.peak = rate;
        marginal_total += stream[i].marginal_flop;
    }
    const Micros span = stream.back().emitted_at - stream.front().emitted_at;
    summary.mean_flop_per_sec = marginal_total.to_double() * 1e6 / static_cast<double>(span);
    return summary;
}

namespace {

std::string join_parents(const std::vector<std::string>& parents) {
    if (parents.empty()) return "-";
    std::string out;
    for (std::size_t i = 0; i < parents.size(); ++i) {
        if (i) out.push_back(',');
        out += parents[i];
    }
    return out;
}

std::vector<std::string> split_parents(const std::string& field) {
    std::vector<std::string> parents;
    if (field == "-") return parents;
    std::string cur;
    for (char c : field) {
        if (c == ',') {
            parents.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parents.push_back(cur);
    return parents;
}

} // namespace

void CausalGraph::write_records(std::ostream& out) const {
    out << "# gateward-ledger/1\n";
    for (const auto& id : insertion_order_) {
        const ComputeNode& n = nodes_.at(id);
        out << n.node_id << ' ' << kind_name(n.kind) << ' ' << n.flop.str() << ' '
            << fmt_seconds(n.wall_time) << ' ' << join_parents(n.parents) << ' '
            << (n.human_cutoff ? '1' : '0') << ' ' << (n.discarded ? '1' : '0') << ' '
            << (n.model_id.empty() ? "-" : n.model_id) << ' '
            << (n.output_id.empty() ? "-" : n.output_id) << '\n';
    }
}

CausalGraph CausalGraph::read_records(std::istream& in) {
    CausalGraph graph;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string id, kind, flop, wall_time, parents, cutoff, discarded, model, output;
        if (!(fields >> id >> kind >> flop >> wall_time >> parents >> cutoff >> discarded >>
              model >> output))
            fail(Errc::parse_error, "ledger record line " + std::to_string(lineno) +
                                        ": expected 9 fields");
        ComputeNode node;
        node.node_id = id;
        const auto k = kind_from_name(kind);
        if (!k) fail(Errc::parse_error, "line " + std::to_string(lineno) + ": bad kind '" + kind + "'");
        node.kind = *k;
        if (!flop.empty() && flop[0] == '-') fail(Errc::negative_flop, "line " + std::to_string(lineno));
        if (!Flop::try_parse(flop, node.flop))
            fail(Errc::parse_error, "line " + std::to_string(lineno) + ": bad flop '" + flop + "'");
        if (!parse_seconds(wall_time, node.wall_time))
            fail(Errc::parse_error, "line " + std::to_string(lineno) + ": bad wall_time");
        node.parents = split_parents(parents);
        if ((cutoff != "0" && cutoff != "1") || (discarded != "0" && discarded != "1"))
            fail(Errc::parse_error, "line " + std::to_string(lineno) + ": flags must be 0 or 1");
        node.human_cutoff = cutoff == "1";
        node.discarded = discarded == "1";
        if (model != "-") node.model_id = model;
        if (output != "-") node.output_id = output;
        graph.add_node(std::move(node));
    }
    return graph;
}

} // namespace gateward::ledger
