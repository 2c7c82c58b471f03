// gateward: command-line front end for the compute-governance library.
//
// Exit codes everywhere: 0 = clean, 2 = violations found/logged, 1 = error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gateward/canonical.hpp"
#include "gateward/errors.hpp"
#include "gateward/event_log.hpp"
#include "gateward/geoverify.hpp"
#include "gateward/governor.hpp"
#include "gateward/ledger.hpp"
#include "gateward/policy.hpp"
#include "gateward/scenario.hpp"
#include "gateward/sim.hpp"

using nlohmann::json;
using namespace gateward;

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(Errc::parse_error, path + ": " + e.what());
    }
    return j;
}

policy::PolicyConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    auto cfg = policy::PolicyConfig::from_json(load_json_file(path));
    cfg.validate();
    return cfg;
}

Vec2 vec2_from_json(const json& j) {
    if (j.is_array() && j.size() == 2)
        return {j[0].get<double>(), j[1].get<double>()};
    if (j.is_object())
        return {j.at("x").get<double>(), j.at("y").get<double>()};
    fail(Errc::schema_violation, "location must be [x, y]");
}

json rate_to_json(const Rate& r) {
    return json{{"flop", flop_to_json(r.flop)},
                {"micros", r.micros},
                {"flop_per_sec", r.flop_per_sec()}};
}

// ---------------------------------------------------------------- run ------

struct RunOpts {
    std::string scenario;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double until_s = 0.0;
    bool until_set = false;
    std::string log_path;
    std::string reports_path;
    bool quiet = false;
};

int cmd_run(const RunOpts& o) {
    Scenario sc = Scenario::load(o.scenario);
    if (o.seed_set) sc.seed = o.seed;
    if (o.until_set) sc.until = from_seconds(o.until_s);

    Simulation sim(std::move(sc));
    SimResult res = sim.run();

    if (!o.log_path.empty()) {
        std::ofstream out(o.log_path);
        if (!out) fail(Errc::io_error, "cannot write " + o.log_path);
        res.log.write(out);
    }
    if (!o.reports_path.empty()) {
        std::ofstream out(o.reports_path);
        if (!out) fail(Errc::io_error, "cannot write " + o.reports_path);
        for (const auto& r : res.reports) out << canonical_dump(r) << "\n";
    }
    if (!o.quiet) {
        std::cout << res.log.size() << " events, " << res.reports.size()
                  << " quarterly reports, chain " << res.log.chain_hex() << "\n";
        for (const Event* e : res.log.of_kind("violation"))
            std::cout << "violation at " << fmt_seconds(e->time) << "s ["
                      << e->payload.value("rule", "?") << "] "
                      << canonical_dump(e->payload) << "\n";
    }
    return res.exit_code();
}

// ------------------------------------------------------------- ledger ------

ledger::CausalGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot open " + path);
    return ledger::CausalGraph::read_records(in);
}

int cmd_ledger_validate(const std::string& path) {
    const auto graph = load_graph(path);
    json models = json::object();
    for (const auto& [model, nodes] : graph.models())
        models[model] = json{{"nodes", nodes.size()},
                             {"training_compute", flop_to_json(graph.training_compute(model))}};
    std::cout << canonical_dump(json{{"nodes", graph.size()},
                                     {"models", models},
                                     {"outputs", graph.outputs().size()},
                                     {"valid", true}})
              << "\n";
    return 0;
}

int cmd_ledger_training(const std::string& path, const std::string& model) {
    const auto graph = load_graph(path);
    std::cout << graph.training_compute(model).str() << "\n";
    return 0;
}

int cmd_ledger_output(const std::string& path, const std::string& output) {
    const auto graph = load_graph(path);
    std::cout << graph.output_compute(output).str() << "\n";
    return 0;
}

int cmd_ledger_rate(const std::string& path, const std::vector<std::string>& outputs) {
    const auto graph = load_graph(path);
    const auto stream = graph.build_stream(outputs);
    const auto summary = ledger::inference_rate(stream);
    std::cout << canonical_dump(json{{"peak", rate_to_json(summary.peak)},
                                     {"mean_flop_per_sec", summary.mean_flop_per_sec}})
              << "\n";
    return 0;
}

// ------------------------------------------------------------- policy ------

policy::SystemDossier load_dossier(const std::string& path) {
    return policy::SystemDossier::from_json(load_json_file(path));
}

void print_trail(const std::vector<std::string>& trail) {
    for (const auto& line : trail) std::cerr << "  - " << line << "\n";
}

int cmd_policy_classify(const std::string& dossier_path, const std::string& config_path) {
    const auto dossier = load_dossier(dossier_path);
    const auto config = load_config(config_path);
    const auto ruling = policy::classify_tier(dossier, config);
    std::cout << canonical_dump(
                     json{{"model", dossier.model_id},
                          {"tier", policy::tier_name(ruling.tier)},
                          {"training_requirements", ruling.training_requirements},
                          {"deployment_requirements", ruling.deployment_requirements},
                          {"injunction",
                           policy::injunction_check(dossier, config) ==
                               policy::InjunctionVerdict::injunction_recommended},
                          {"trail", ruling.trail}})
              << "\n";
    print_trail(ruling.trail);
    return 0;
}

int cmd_policy_harbor(const std::string& dossier_path, const std::string& config_path) {
    const auto dossier = load_dossier(dossier_path);
    const auto config = load_config(config_path);
    const auto harbors = policy::check_safe_harbor(dossier, config);
    std::vector<std::string> names, trail;
    for (auto h : harbors) names.emplace_back(policy::harbor_name(h));
    if (harbors.empty())
        trail.emplace_back("no safe harbor applies; strict liability posture remains");
    for (const auto& n : names) trail.push_back("safe harbor granted: " + n);
    std::cout << canonical_dump(json{{"model", dossier.model_id},
                                     {"harbors", names},
                                     {"any", !harbors.empty()},
                                     {"trail", trail}})
              << "\n";
    print_trail(trail);
    return 0;
}

int cmd_policy_liability(const std::string& dossier_path, const std::string& incident_path,
                         const std::string& config_path) {
    const auto dossier = load_dossier(dossier_path);
    const auto config = load_config(config_path);
    const json ij = load_json_file(incident_path);
    policy::Incident incident;
    for (const auto& p : ij.value("parties", json::array()))
        incident.parties.push_back(p.get<std::string>());
    incident.gross_negligence = ij.value("gross_negligence", false);
    incident.description = ij.value("description", "");

    const auto harbors = policy::check_safe_harbor(dossier, config);
    const auto ruling = policy::evaluate_liability(dossier, harbors, incident);
    json out = ruling.to_json();
    out["model"] = dossier.model_id;
    std::cout << canonical_dump(out) << "\n";
    print_trail(ruling.trail);
    return 0;
}

// ----------------------------------------------------------- geoverify -----

int cmd_geoverify(const std::string& bounds_path, const std::string& zone_path) {
    const json spec = load_json_file(bounds_path);
    const bool one_way = spec.value("one_way", false);

    std::vector<std::pair<Station, double>> bounds;
    json bound_rows = json::array();
    for (const auto& row : spec.at("stations")) {
        Station st;
        st.station_id = row.value("id", "station-" + std::to_string(bounds.size() + 1));
        st.location = vec2_from_json(row.at("location"));
        const double rtt = row.at("rtt_s").get<double>();
        const double allowance = row.value("processing_allowance_s", 0.0);
        const double bound = distance_bound(rtt, allowance, one_way);
        bounds.emplace_back(st, bound);
        bound_rows.push_back(json{{"station", st.station_id},
                                  {"rtt_s", rtt},
                                  {"bound_km", bound}});
    }
    const FeasibleRegion region = locate(bounds);

    json out{{"bounds", bound_rows},
             {"region", region.to_json()},
             {"empty", region.empty()}};

    std::optional<GeoVerdict> verdict;
    json zone_json;
    if (!zone_path.empty())
        zone_json = load_json_file(zone_path);
    else if (spec.contains("zone"))
        zone_json = spec.at("zone");
    if (!zone_json.is_null()) {
        ConvexPolygon zone;
        for (const auto& p : zone_json) zone.pts.push_back(vec2_from_json(p));
        verdict = verify_within(region, zone);
        out["verdict"] = geo_verdict_name(*verdict);
    }
    std::cout << canonical_dump(out) << "\n";

    if (verdict && (*verdict == GeoVerdict::confirmed_outside ||
                    *verdict == GeoVerdict::empty_region))
        return 2;
    if (!verdict && region.empty()) return 2;
    return 0;
}

// ------------------------------------------------------------ governor -----

struct GovOpts {
    std::uint64_t seed = 42;
    std::vector<std::string> governors{"gov-1", "gov-2", "gov-3"};
    int threshold = 2;
    std::string config_path;
    std::string registry_path;
    std::string records_path;
    std::string model;
    std::string quarter;
};

RegistryEntry entry_from_wire(const json& j) {
    RegistryEntry e;
    e.model_id = j.at("model").get<std::string>();
    e.developer_id = j.at("developer").get<std::string>();
    e.training_compute = flop_from_json(j.at("training_compute"));
    e.max_inference_rate_per_s = flop_from_json(j.at("max_inference_rate"));
    e.quarter = j.at("quarter").get<std::string>();
    e.attestation_proof_id = j.value("attestation_proof_id", "");
    return e;
}

int cmd_governor_serve(const GovOpts& o) {
    KeyDirectory keys;
    MultiSigPolicy pol;
    pol.policy_id = "policy-1";
    pol.governors = o.governors;
    pol.threshold = o.threshold;
    GovernorService service(o.seed, keys, pol, load_config(o.config_path));
    Rng rng = Rng(o.seed).substream("serve");

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        json reply;
        try {
            const json msg = json::parse(line);
            const std::string type = msg.at("type").get<std::string>();
            if (type == "EnrollChip") {
                service.enroll_chip(msg.at("chip").get<std::string>());
                reply = {{"type", "EnrollAck"}, {"chip", msg.at("chip")}};
            } else if (type == "RegisterTrainingRun") {
                const std::string receipt = service.register_training_run(
                    entry_from_wire(msg.at("entry")));
                reply = {{"type", "Receipt"}, {"receipt", receipt}};
            } else if (type == "LicenseRequest") {
                std::vector<std::string> chips;
                for (const auto& c : msg.at("chips")) chips.push_back(c.get<std::string>());
                const Micros now = msg.value("now", Micros{0});
                const auto d = service.request_license(
                    msg.at("model").get<std::string>(), chips,
                    flop_from_json(msg.at("quota")),
                    msg.value("valid_from", now),
                    msg.value("valid_to", std::numeric_limits<Micros>::max()), now,
                    msg.value("pause", false), {},
                    msg.contains("plan_hint") ? flop_from_json(msg.at("plan_hint"))
                                              : Flop(0),
                    msg.value("counts_toward_training", true));
                if (d.granted)
                    reply = {{"type", "LicenseGrant"}, {"grant", d.grant.to_json()}};
                else
                    reply = {{"type", "LicenseDenied"},
                             {"error", d.error},
                             {"reason", d.reason},
                             {"projected", flop_to_json(d.projected)}};
            } else if (type == "Withhold") {
                const bool effective = service.withhold(
                    msg.at("governor").get<std::string>(),
                    msg.at("target").get<std::string>());
                reply = {{"type", "WithholdAck"},
                         {"target", msg.at("target")},
                         {"effective", effective}};
            } else if (type == "RegistryQuery") {
                const auto hit = service.query(msg.at("model").get<std::string>(),
                                               msg.at("quarter").get<std::string>());
                reply = hit ? json{{"type", "RegistryEntry"}, {"entry", hit->to_json()}}
                            : json{{"type", "NotFound"}};
            } else if (type == "AttestationSubmit") {
                const auto proof = AttestationProof::from_json(msg.at("proof"));
                if (msg.contains("public_key"))
                    keys.put(proof.final_signature.signer,
                             hex_decode(msg.at("public_key").get<std::string>()));
                std::set<Hash32> codes, data;
                for (const auto& h : msg.value("expected_codes", json::array()))
                    codes.insert(hash_from_hex(h.get<std::string>()));
                for (const auto& h : msg.value("expected_data", json::array()))
                    data.insert(hash_from_hex(h.get<std::string>()));
                const auto outcome = verify_attestation(
                    proof, codes, data, flop_from_json(msg.at("claimed_flop")), keys);
                reply = {{"type", "AttestationResult"},
                         {"ok", outcome == AttestOutcome::ok},
                         {"outcome", attest_outcome_name(outcome)}};
            } else {
                reply = {{"type", "Error"}, {"error", "unknown message type " + type}};
            }
        } catch (const std::exception& e) {
            reply = {{"type", "Error"}, {"error", e.what()}};
        }
        std::cout << canonical_dump(reply) << "\n" << std::flush;
    }
    (void)rng;
    return 0;
}

int cmd_governor_audit(const GovOpts& o) {
    KeyDirectory keys;
    MultiSigPolicy pol;
    pol.policy_id = "policy-1";
    pol.governors = o.governors;
    pol.threshold = o.threshold;
    GovernorService service(o.seed, keys, pol, load_config(o.config_path));

    std::ifstream reg(o.registry_path);
    if (!reg) fail(Errc::io_error, "cannot open " + o.registry_path);
    for (auto& entry : GovernorService::load_registry(reg))
        service.register_training_run(std::move(entry));

    const auto graph = load_graph(o.records_path);
    const auto missing = service.audit_missing(graph);
    const auto mismatched = service.audit_declared_mismatch(graph);
    std::cout << canonical_dump(json{{"missing_registrations", missing},
                                     {"declared_mismatches", mismatched}})
              << "\n";
    return missing.empty() && mismatched.empty() ? 0 : 2;
}

int cmd_governor_registry_query(const GovOpts& o) {
    std::ifstream reg(o.registry_path);
    if (!reg) fail(Errc::io_error, "cannot open " + o.registry_path);
    json hits = json::array();
    for (const auto& entry : GovernorService::load_registry(reg)) {
        if (entry.model_id != o.model) continue;
        if (!o.quarter.empty() && entry.quarter != o.quarter) continue;
        hits.push_back(entry.to_json());
    }
    std::cout << canonical_dump(hits) << "\n";
    return 0;
}

// ------------------------------------------------------------- report ------

int cmd_report(const std::string& log_path, int quarter) {
    std::ifstream in(log_path);
    if (!in) fail(Errc::io_error, "cannot open " + log_path);
    const auto read = EventLog::read(in);
    if (!read.chain_ok) {
        std::cerr << "chain mismatch: log declares " << read.declared_chain
                  << " but entries hash to " << read.computed_chain << "\n";
        return 1;
    }

    bool any_violation = false;
    int quarters = 0;
    std::vector<json> logged;
    for (const auto& e : read.events) {
        if (e.kind == "violation") any_violation = true;
        if (e.kind == "quarterly_report") {
            ++quarters;
            logged.push_back(e.payload);
        }
    }

    for (int k = 1; k <= quarters; ++k) {
        const json recomputed = Simulation::build_report(read.events, k);
        if (recomputed != logged[k - 1]) {
            std::cerr << "report Q" << k << " does not match the event log\n";
            return 1;
        }
        if (quarter == 0 || quarter == k)
            std::cout << canonical_dump(recomputed) << "\n";
    }
    if (quarter > quarters) {
        std::cerr << "quarter " << quarter << " not closed in this log ("
                  << quarters << " available)\n";
        return 1;
    }
    return any_violation ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compute-governance fabric: ledger, licensing, geoverify and rollout simulator"};
    app.require_subcommand(1);

    // run
    RunOpts run_opts;
    auto* run = app.add_subcommand("run", "Execute a scenario file");
    run->add_option("scenario", run_opts.scenario, "scenario JSON path")->required();
    auto* seed_opt = run->add_option("--seed", run_opts.seed, "seed override");
    auto* until_opt = run->add_option("--until", run_opts.until_s, "horizon override, seconds");
    run->add_option("--log", run_opts.log_path, "write the event log here");
    run->add_option("--reports", run_opts.reports_path, "write quarterly reports here");
    run->add_flag("--quiet", run_opts.quiet, "suppress the summary");

    // ledger
    std::string records_path, model_id, output_id;
    std::vector<std::string> output_ids;
    auto* ledger_cmd = app.add_subcommand("ledger", "Causal-graph record file queries");
    ledger_cmd->require_subcommand(1);
    auto* lv = ledger_cmd->add_subcommand("validate", "Parse and summarize a record file");
    lv->add_option("records", records_path, "record file")->required();
    auto* lt = ledger_cmd->add_subcommand("training", "Training compute of a model");
    lt->add_option("records", records_path, "record file")->required();
    lt->add_option("--model", model_id, "model id")->required();
    auto* lo = ledger_cmd->add_subcommand("output", "Output compute of an output");
    lo->add_option("records", records_path, "record file")->required();
    lo->add_option("--output", output_id, "output id")->required();
    auto* lr = ledger_cmd->add_subcommand("rate", "Inference rate over an output stream");
    lr->add_option("records", records_path, "record file")->required();
    lr->add_option("--outputs", output_ids, "output ids, in emission order")
        ->required()
        ->delimiter(',');

    // policy
    std::string dossier_path, config_path, incident_path;
    auto* policy_cmd = app.add_subcommand("policy", "Tier, safe-harbor and liability rulings");
    policy_cmd->require_subcommand(1);
    auto* pc = policy_cmd->add_subcommand("classify", "Risk-tier classification");
    pc->add_option("--dossier", dossier_path, "system dossier JSON")->required();
    pc->add_option("--config", config_path, "policy config JSON");
    auto* ph = policy_cmd->add_subcommand("harbor", "Safe-harbor check");
    ph->add_option("--dossier", dossier_path, "system dossier JSON")->required();
    ph->add_option("--config", config_path, "policy config JSON");
    auto* pl = policy_cmd->add_subcommand("liability", "Liability regime for an incident");
    pl->add_option("--dossier", dossier_path, "system dossier JSON")->required();
    pl->add_option("--incident", incident_path, "incident JSON")->required();
    pl->add_option("--config", config_path, "policy config JSON");

    // geoverify
    std::string bounds_path, zone_path;
    auto* geo = app.add_subcommand("geoverify", "Distance bounds to a feasible region");
    geo->add_option("bounds", bounds_path, "bounds JSON (stations + rtt)")->required();
    geo->add_option("--zone", zone_path, "claimed zone polygon JSON");

    // governor
    GovOpts gov_opts;
    auto* gov = app.add_subcommand("governor", "Licensing-authority commands");
    gov->require_subcommand(1);
    auto* gs = gov->add_subcommand("serve", "JSON-lines request loop on stdin/stdout");
    gs->add_option("--seed", gov_opts.seed, "key seed");
    gs->add_option("--governors", gov_opts.governors, "governor ids")->delimiter(',');
    gs->add_option("--threshold", gov_opts.threshold, "signatures required");
    gs->add_option("--config", gov_opts.config_path, "policy config JSON");
    auto* ga = gov->add_subcommand("audit", "Registry vs ledger audit");
    ga->add_option("--registry", gov_opts.registry_path, "registry file")->required();
    ga->add_option("--records", gov_opts.records_path, "ledger record file")->required();
    ga->add_option("--config", gov_opts.config_path, "policy config JSON");
    auto* gq = gov->add_subcommand("registry", "Registry queries");
    gq->require_subcommand(1);
    auto* gqq = gq->add_subcommand("query", "Look up entries for a model");
    gqq->add_option("--registry", gov_opts.registry_path, "registry file")->required();
    gqq->add_option("--model", gov_opts.model, "model id")->required();
    gqq->add_option("--quarter", gov_opts.quarter, "reporting period");

    // report
    std::string log_path;
    int quarter = 0;
    auto* report = app.add_subcommand("report", "Verify a log and recompute its reports");
    report->add_option("logfile", log_path, "event log path")->required();
    report->add_option("--quarter", quarter, "print a single quarter");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            run_opts.seed_set = seed_opt->count() > 0;
            run_opts.until_set = until_opt->count() > 0;
            return cmd_run(run_opts);
        }
        if (lv->parsed()) return cmd_ledger_validate(records_path);
        if (lt->parsed()) return cmd_ledger_training(records_path, model_id);
        if (lo->parsed()) return cmd_ledger_output(records_path, output_id);
        if (lr->parsed()) return cmd_ledger_rate(records_path, output_ids);
        if (pc->parsed()) return cmd_policy_classify(dossier_path, config_path);
        if (ph->parsed()) return cmd_policy_harbor(dossier_path, config_path);
        if (pl->parsed()) return cmd_policy_liability(dossier_path, incident_path, config_path);
        if (geo->parsed()) return cmd_geoverify(bounds_path, zone_path);
        if (gs->parsed()) return cmd_governor_serve(gov_opts);
        if (ga->parsed()) return cmd_governor_audit(gov_opts);
        if (gqq->parsed()) return cmd_governor_registry_query(gov_opts);
        if (report->parsed()) return cmd_report(log_path, quarter);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
