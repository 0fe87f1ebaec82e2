#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "delaudit/audit.hpp"
#include "delaudit/collectors.hpp"
#include "delaudit/errors.hpp"
#include "delaudit/execution.hpp"
#include "delaudit/hi.hpp"
#include "delaudit/simulators.hpp"

namespace delaudit {

using ordered_json = nlohmann::ordered_json;

// A scenario file: which collector and simulator to audit, the Y and Z
// scripts, and the trial parameters. Scripts are explicit data so an audit is
// reproducible and reviewable end to end.
struct Scenario {
    std::string name;
    std::string theorem;  // which result this scenario witnesses (report metadata)
    std::string collector;
    std::string simulator;  // empty for strong/privacy-only scenarios
    std::uint32_t lambda = 16;
    std::uint64_t trials = 1000;
    std::uint64_t master_seed = 1;
    std::optional<double> threshold;
    std::uint64_t max_sessions = 4096;
    std::optional<double> interleave_p;
    PartyScript y_script;
    PartyScript z_script;
    std::vector<std::uint32_t> k_list;  // thm5 families
    Bytes y_key_prefix = "yk";

    RunSpec run_spec() const {
        return RunSpec{lambda, y_script, z_script, interleave_p, max_sessions};
    }
};

namespace detail {

inline Bytes json_bytes(const ordered_json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_string())
        throw ConfigError(std::string("action is missing string field '") + field + "'");
    return j[field].get<std::string>();
}

inline Action parse_action(const ordered_json& j) {
    if (!j.is_object() || !j.contains("op"))
        throw ConfigError("each action must be an object with an 'op' field");
    const std::string op = j["op"].get<std::string>();
    const int index = j.value("index", 0);
    if (index < 0 || index > 2) throw ConfigError("action index must be 0, 1 or 2");
    if (op == "post") return Action::post(json_bytes(j, "k"), json_bytes(j, "m"), index);
    if (op == "fetch") return Action::fetch(index);
    if (op == "query") return Action::query(index);
    if (op == "delete") {
        if (j.contains("token")) return Action::del(j["token"].get<std::string>(), index);
        if (j.contains("literal")) return Action::del_literal(json_bytes(j, "literal"), index);
        throw ConfigError("delete action needs 'token' (captured name) or 'literal'");
    }
    if (op == "capture") return Action::capture(json_bytes(j, "name"));
    if (op == "activate_y") {
        Action a = Action::activate_y(j.value("n", 1u));
        if (a.count == 0) throw ConfigError("activate_y needs n >= 1");
        return a;
    }
    if (op == "send_to_z") return Action::send_to_z(json_bytes(j, "payload"));
    throw ConfigError("unknown action op: " + op);
}

inline PartyScript parse_script(const ordered_json& j, const char* field) {
    PartyScript script;
    if (!j.contains(field)) return script;
    if (!j[field].is_array()) throw ConfigError(std::string(field) + " must be an array");
    for (const auto& a : j[field]) script.push_back(parse_action(a));
    return script;
}

}  // namespace detail

inline Scenario load_scenario_json(const ordered_json& j) {
    if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
    Scenario s;
    s.name = j.value("name", std::string("unnamed"));
    s.theorem = j.value("theorem", std::string());
    if (!j.contains("collector")) throw ConfigError("scenario is missing 'collector'");
    s.collector = j["collector"].get<std::string>();
    s.simulator = j.value("simulator", std::string());
    s.lambda = j.value("lambda", 16u);
    s.trials = j.value("trials", std::uint64_t{1000});
    s.master_seed = j.value("master_seed", std::uint64_t{1});
    if (j.contains("threshold")) s.threshold = j["threshold"].get<double>();
    s.max_sessions = j.value("max_sessions", std::uint64_t{4096});
    if (j.contains("interleave_p") && !j["interleave_p"].is_null())
        s.interleave_p = j["interleave_p"].get<double>();
    s.y_script = detail::parse_script(j, "y_script");
    s.z_script = detail::parse_script(j, "z_script");
    if (j.contains("k_list"))
        for (const auto& k : j["k_list"]) s.k_list.push_back(k.get<std::uint32_t>());
    s.y_key_prefix = j.value("y_key_prefix", std::string("yk"));

    // Validate everything that can fail before a single trial runs.
    auto collector = make_collector(s.collector);
    validate_script(s.y_script, *collector, "Y");
    validate_script(s.z_script, *collector, "Z");
    if (!s.simulator.empty()) make_simulator(s.simulator);
    if (s.interleave_p && script_has_activate_y(s.z_script))
        throw ConfigError("interleave_p and activate_y actions are mutually exclusive");
    RunSpec spec = s.run_spec();
    spec.config(s.master_seed, 0, "real").validate();
    if (s.trials == 0) throw ConfigError("trials must be >= 1");
    return s;
}

inline Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("scenario parse error in " + path + ": " + e.what());
    }
    return load_scenario_json(j);
}

// ---------------------------------------------------------------------------
// Report serialization. Key order is fixed by insertion; files are UTF-8,
// newline-terminated, and byte-identical for a fixed scenario and seed.
// ---------------------------------------------------------------------------

inline ordered_json report_to_json(const AdvantageReport& report, const Scenario& scenario) {
    ordered_json j;
    j["kind"] = report.kind + "_audit";
    j["scenario"] = scenario.name;
    j["theorem"] = scenario.theorem;
    j["collector"] = scenario.collector;
    j["simulator"] = report.kind == "weak" ? scenario.simulator : std::string();
    j["lambda"] = scenario.lambda;
    j["trials"] = report.trials;
    j["master_seed"] = scenario.master_seed;
    j["flavor"] = report.flavor;
    j["mismatches"] = report.mismatches;
    j["sim_errors"] = report.sim_errors;
    if (report.first_mismatch_trial)
        j["first_mismatch_trial"] = *report.first_mismatch_trial;
    else
        j["first_mismatch_trial"] = nullptr;
    ordered_json per = ordered_json::object();
    for (const auto& [name, s] : report.per_distinguisher) {
        ordered_json d;
        d["real_ones"] = s.real_ones;
        d["ideal_ones"] = s.ideal_ones;
        d["advantage"] = std::abs(static_cast<double>(s.real_ones) -
                                  static_cast<double>(s.ideal_ones)) /
                         static_cast<double>(report.trials);
        per[name] = d;
    }
    j["per_distinguisher"] = per;
    j["point_estimate"] = report.point_estimate;
    j["confidence_bound_95"] = report.confidence_bound_95;
    j["threshold"] = report.threshold;
    j["verdict"] = report.pass ? "pass" : "fail";
    j["interpretation"] = report.interpretation;
    return j;
}

inline ordered_json bound_check_to_json(const BoundCheck& check) {
    ordered_json j;
    j["name"] = check.name;
    j["measured"] = check.measured;
    j["bound"] = check.bound;
    j["slack"] = check.slack;
    j["holds"] = check.holds;
    ordered_json terms = ordered_json::object();
    for (const auto& [name, value] : check.terms) terms[name] = value;
    j["terms"] = terms;
    return j;
}

inline ordered_json experiment_to_json(const std::string& experiment,
                                       const std::vector<BoundCheck>& checks,
                                       const Scenario& scenario) {
    ordered_json j;
    j["kind"] = "experiment";
    j["experiment"] = experiment;
    j["scenario"] = scenario.name;
    j["theorem"] = scenario.theorem;
    j["collector"] = scenario.collector;
    j["lambda"] = scenario.lambda;
    j["trials"] = scenario.trials;
    j["master_seed"] = scenario.master_seed;
    bool all = true;
    ordered_json arr = ordered_json::array();
    for (const auto& c : checks) {
        all = all && c.holds;
        arr.push_back(bound_check_to_json(c));
    }
    j["checks"] = arr;
    j["all_hold"] = all;
    return j;
}

inline ordered_json hi_check_to_json(const std::string& impl_name, std::uint32_t universe_size,
                                     std::uint32_t max_len, const HiCheckResult& result) {
    ordered_json j;
    j["kind"] = "hi_check";
    j["impl"] = impl_name;
    j["universe_size"] = universe_size;
    j["max_len"] = max_len;
    j["ok"] = result.ok;
    j["sequences_checked"] = result.sequences_checked;
    if (result.counterexample) {
        const auto& ce = *result.counterexample;
        ordered_json c;
        auto seq = [](const std::vector<AdsOp>& ops) {
            ordered_json a = ordered_json::array();
            for (const auto& op : ops) a.push_back(op.to_string());
            return a;
        };
        c["seq_s"] = seq(ce.seq_s);
        c["seq_t"] = seq(ce.seq_t);
        c["rep_s"] = to_hex(ce.rep_s);
        c["rep_t"] = to_hex(ce.rep_t);
        j["counterexample"] = c;
    } else {
        j["counterexample"] = nullptr;
    }
    return j;
}

inline void write_report(const std::string& path, const ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace delaudit
