// Scenario-driven deletion-compliance auditor.
//
//   delaudit audit <weak|strong|privacy> --scenario file [--out file] ...
//   delaudit check-hi --impl name --universe N --max-len L [--out file]
//   delaudit experiment <thm3|thm5|thm6|thm7> --scenario file [--out file] ...
//
// Exit codes: 0 verdict pass / all bounds hold, 1 fail, 2 config error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "delaudit/audit.hpp"
#include "delaudit/scenario.hpp"

namespace {

using namespace delaudit;

struct Overrides {
    std::optional<std::uint64_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> lambda;
    std::optional<double> threshold;
    int jobs = 1;

    void apply(Scenario& s) const {
        if (trials) s.trials = *trials;
        if (seed) s.master_seed = *seed;
        if (lambda) s.lambda = *lambda;
        if (threshold) s.threshold = *threshold;
    }
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--trials", ov.trials, "Override the scenario's trial count");
    cmd->add_option("--seed", ov.seed, "Override the scenario's master seed");
    cmd->add_option("--lambda", ov.lambda, "Override the scenario's security parameter");
    cmd->add_option("--threshold", ov.threshold, "Override the scenario's verdict threshold");
    cmd->add_option("--jobs", ov.jobs, "Worker threads for trials (report bytes are unaffected)")
        ->check(CLI::Range(1, 256));
}

void emit(const ordered_json& j, const std::string& out_path) {
    if (!out_path.empty()) write_report(out_path, j);
}

int run_audit(const std::string& kind, const std::string& scenario_path,
              const std::string& out_path, const Overrides& ov) {
    Scenario scenario = load_scenario_file(scenario_path);
    ov.apply(scenario);
    CollectorFactory factory = collector_factory(scenario.collector);
    AdvantageReport report;
    if (kind == "weak") {
        if (scenario.simulator.empty())
            throw ConfigError("weak audit needs a 'simulator' in the scenario");
        auto simulator = make_simulator(scenario.simulator);
        report = estimate_weak_advantage(factory, *simulator, scenario.run_spec(), scenario.trials,
                                         scenario.master_seed, scenario.threshold, ov.jobs);
    } else {
        auto battery = default_battery();
        if (kind == "strong")
            report = estimate_strong_advantage(factory, scenario.run_spec(), battery,
                                               scenario.trials, scenario.master_seed,
                                               scenario.threshold, ov.jobs);
        else
            report = estimate_privacy_advantage(factory, scenario.run_spec(), battery,
                                                scenario.trials, scenario.master_seed,
                                                scenario.threshold, ov.jobs);
    }
    emit(report_to_json(report, scenario), out_path);
    std::cout << kind << " audit '" << scenario.name << "': point_estimate=" << report.point_estimate
              << " threshold=" << report.threshold << " -> "
              << (report.pass ? "pass" : "fail") << "\n";
    return report.pass ? 0 : 1;
}

int run_check_hi(const std::string& impl_name, std::uint32_t universe_size, std::uint32_t max_len,
                 const std::string& out_path, std::uint64_t budget) {
    auto impl = make_ads_impl(impl_name);
    std::vector<Bytes> universe;
    for (std::uint32_t i = 1; i <= universe_size; ++i) universe.push_back("k" + std::to_string(i));
    HiCheckResult result = check_history_independence(*impl, universe, max_len, budget);
    emit(hi_check_to_json(impl_name, universe_size, max_len, result), out_path);
    if (result.ok) {
        std::cout << impl_name << ": history independent over " << result.sequences_checked
                  << " sequences\n";
        return 0;
    }
    const auto& ce = *result.counterexample;
    std::cout << impl_name << ": counterexample, |S|=" << ce.seq_s.size()
              << " |T|=" << ce.seq_t.size() << "\n";
    return 1;
}

int run_experiment(const std::string& name, const std::string& scenario_path,
                   const std::string& out_path, const Overrides& ov) {
    Scenario scenario = load_scenario_file(scenario_path);
    ov.apply(scenario);
    CollectorFactory factory = collector_factory(scenario.collector);
    std::vector<BoundCheck> checks;

    if (name == "thm3") {
        if (scenario.simulator.empty())
            throw ConfigError("thm3 needs a 'simulator' for the weak audit");
        auto simulator = make_simulator(scenario.simulator);
        checks.push_back(verify_bound_thm3(factory, *simulator, scenario.run_spec(),
                                           scenario.trials, scenario.master_seed, ov.jobs));
    } else if (name == "thm5") {
        if (scenario.simulator.empty()) throw ConfigError("thm5 needs a 'simulator'");
        if (scenario.k_list.empty()) throw ConfigError("thm5 needs a non-empty 'k_list'");
        auto simulator = make_simulator(scenario.simulator);
        checks = verify_bound_thm5(factory, *simulator, scenario.run_spec(), scenario.k_list,
                                   scenario.y_key_prefix, scenario.trials, scenario.master_seed,
                                   ov.jobs);
    } else if (name == "thm6") {
        if (!scenario.collector.starts_with("parallel(") ||
            !scenario.simulator.starts_with("parallel("))
            throw ConfigError("thm6 needs parallel(a,b) collector and simulator");
        auto [c1, c2] = detail::split_pair_args(
            scenario.collector.substr(9, scenario.collector.size() - 10), "parallel");
        auto [s1, s2] = detail::split_pair_args(
            scenario.simulator.substr(9, scenario.simulator.size() - 10), "parallel");
        checks.push_back(verify_bound_thm6(
            factory, *make_simulator(scenario.simulator), collector_factory(c1),
            *make_simulator(s1), collector_factory(c2), *make_simulator(s2), scenario.run_spec(),
            scenario.trials, scenario.master_seed, ov.jobs));
    } else if (name == "thm7") {
        if (!scenario.collector.starts_with("sequential(") ||
            !scenario.simulator.starts_with("sequential("))
            throw ConfigError("thm7 needs sequential(a,b) collector and simulator");
        auto [c1, c2] = detail::split_pair_args(
            scenario.collector.substr(11, scenario.collector.size() - 12), "sequential");
        auto [s1, s2] = detail::split_pair_args(
            scenario.simulator.substr(11, scenario.simulator.size() - 12), "sequential");
        checks.push_back(verify_bound_thm7(
            factory, *make_simulator(scenario.simulator), collector_factory(c1),
            *make_simulator(s1), collector_factory(c2), *make_simulator(s2), scenario.run_spec(),
            scenario.trials, scenario.master_seed, ov.jobs));
    } else {
        throw ConfigError("unknown experiment: " + name);
    }

    emit(experiment_to_json(name, checks, scenario), out_path);
    bool all = true;
    for (const auto& c : checks) {
        all = all && c.holds;
        std::cout << name << " '" << scenario.name << "': " << c.name << ": measured=" << c.measured
                  << " bound=" << c.bound << " slack=" << c.slack << " -> "
                  << (c.holds ? "holds" : "VIOLATED") << "\n";
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deletion-compliance audit harness"};
    app.require_subcommand(1);

    std::string audit_kind, scenario_path, out_path;
    Overrides ov;
    auto* audit_cmd = app.add_subcommand("audit", "Run a weak/strong/privacy audit");
    audit_cmd->add_option("kind", audit_kind, "weak, strong or privacy")
        ->required()
        ->check(CLI::IsMember({"weak", "strong", "privacy"}));
    audit_cmd->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    audit_cmd->add_option("--out", out_path, "Write the report JSON here");
    add_override_flags(audit_cmd, ov);

    std::string impl_name = "sorted_set";
    std::uint32_t universe_size = 3, max_len = 6;
    std::uint64_t budget = 2'000'000;
    std::string hi_out;
    auto* hi_cmd = app.add_subcommand("check-hi", "Exhaustive history-independence check");
    hi_cmd->add_option("--impl", impl_name,
                       "sorted_set, compacting_list, tombstone_list or sorted_map");
    hi_cmd->add_option("--universe", universe_size, "Number of keys in the operation universe");
    hi_cmd->add_option("--max-len", max_len, "Maximum operation-sequence length");
    hi_cmd->add_option("--budget", budget, "Enumeration budget (operation applications)");
    hi_cmd->add_option("--out", hi_out, "Write the result JSON here");

    std::string exp_name, exp_scenario, exp_out;
    Overrides exp_ov;
    auto* exp_cmd = app.add_subcommand("experiment", "Verify a composition/implication bound");
    exp_cmd->add_option("name", exp_name, "thm3, thm5, thm6 or thm7")
        ->required()
        ->check(CLI::IsMember({"thm3", "thm5", "thm6", "thm7"}));
    exp_cmd->add_option("--scenario", exp_scenario, "Scenario JSON file")->required();
    exp_cmd->add_option("--out", exp_out, "Write the report JSON here");
    add_override_flags(exp_cmd, exp_ov);

    CLI11_PARSE(app, argc, argv);

    try {
        if (audit_cmd->parsed()) return run_audit(audit_kind, scenario_path, out_path, ov);
        if (hi_cmd->parsed()) return run_check_hi(impl_name, universe_size, max_len, hi_out, budget);
        if (exp_cmd->parsed()) return run_experiment(exp_name, exp_scenario, exp_out, exp_ov);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
