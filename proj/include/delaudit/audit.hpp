#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "delaudit/collectors.hpp"
#include "delaudit/errors.hpp"
#include "delaudit/execution.hpp"
#include "delaudit/simulators.hpp"

namespace delaudit {

// Two-sided Hoeffding deviation for a Bernoulli mean at the given confidence,
// clamped to the probability range. Used as the statistical allowance
// everywhere a measured rate meets a theorem bound.
inline double hoeffding_bound(std::uint64_t trials, double confidence = 0.95) {
    if (trials == 0) return 1.0;
    const double raw = std::sqrt(std::log(2.0 / (1.0 - confidence)) /
                                 (2.0 * static_cast<double>(trials)));
    return std::min(1.0, raw);
}

// Everything an execution needs besides per-trial seeds.
struct RunSpec {
    std::uint32_t lambda = 16;
    PartyScript y_script;
    PartyScript z_script;
    std::optional<double> interleave_p;
    std::uint64_t max_sessions = 4096;

    ExecutionConfig config(std::uint64_t master_seed, std::uint64_t trial,
                           std::string_view stream) const {
        ExecutionConfig cfg = ExecutionConfig::make(lambda, master_seed, trial, stream);
        cfg.max_sessions = max_sessions;
        cfg.interleave_p = interleave_p;
        return cfg;
    }
};

struct DistinguisherStats {
    std::uint64_t real_ones = 0;
    std::uint64_t ideal_ones = 0;
};

struct AdvantageReport {
    std::string kind;  // weak | strong | privacy
    std::string flavor = "statistical";
    std::uint64_t trials = 0;
    std::uint64_t mismatches = 0;   // weak audits
    std::uint64_t sim_errors = 0;   // simulator exceptions; counted as mismatches too
    std::optional<std::uint64_t> first_mismatch_trial;
    std::map<std::string, DistinguisherStats> per_distinguisher;  // strong/privacy audits
    double point_estimate = 0.0;
    double confidence_bound_95 = 1.0;
    double threshold = 0.0;
    bool pass = false;
    std::string interpretation;
};

// Distinguishers are pure functions of (state, view); privacy audits pass no
// state. The shipped battery projects payload content only.
struct Distinguisher {
    std::string name;
    std::function<int(const CollectorState*, const View&)> evaluate;
};

inline std::vector<Distinguisher> default_battery() {
    std::vector<Distinguisher> battery;
    battery.push_back({"response_parity", [](const CollectorState*, const View& v) {
                           for (const auto& r : v.records)
                               if (!r.is_deletion && !r.response.empty())
                                   return static_cast<int>(r.response.back() & 1);
                           return 0;
                       }});
    battery.push_back({"response_flag", [](const CollectorState*, const View& v) {
                           for (const auto& r : v.records)
                               if (r.response.find("FLAG") != Bytes::npos) return 1;
                           return 0;
                       }});
    battery.push_back({"view_len_mod2", [](const CollectorState*, const View& v) {
                           return static_cast<int>(v.records.size() & 1);
                       }});
    battery.push_back({"state_size_mod2", [](const CollectorState* s, const View&) {
                           return s ? static_cast<int>(s->bytes.size() & 1) : 0;
                       }});
    battery.push_back({"state_hash_mod2", [](const CollectorState* s, const View&) {
                           return s ? static_cast<int>(fnv1a64(s->bytes) & 1) : 0;
                       }});
    return battery;
}

namespace detail {

// Runs `body(trial, agg)` for every trial index, optionally across threads.
// Thread j handles trials congruent to j; aggregates must merge commutatively
// so the result is identical for any job count.
template <class Agg>
Agg run_trials(std::uint64_t trials, int jobs, const std::function<void(std::uint64_t, Agg&)>& body) {
    jobs = std::max(1, jobs);
    if (trials > 0) jobs = static_cast<int>(std::min<std::uint64_t>(jobs, trials));
    std::vector<Agg> aggs(static_cast<std::size_t>(jobs));
    if (jobs == 1) {
        for (std::uint64_t t = 0; t < trials; ++t) body(t, aggs[0]);
    } else {
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
        for (int j = 0; j < jobs; ++j) {
            threads.emplace_back([&, j] {
                try {
                    for (std::uint64_t t = static_cast<std::uint64_t>(j); t < trials;
                         t += static_cast<std::uint64_t>(jobs))
                        body(t, aggs[static_cast<std::size_t>(j)]);
                } catch (...) {
                    errors[static_cast<std::size_t>(j)] = std::current_exception();
                }
            });
        }
        for (auto& th : threads) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    Agg total;
    for (auto& a : aggs) total.merge(a);
    return total;
}

struct WeakAgg {
    std::uint64_t mismatches = 0;
    std::uint64_t sim_errors = 0;
    std::uint64_t first_mismatch = UINT64_MAX;

    void merge(const WeakAgg& o) {
        mismatches += o.mismatches;
        sim_errors += o.sim_errors;
        first_mismatch = std::min(first_mismatch, o.first_mismatch);
    }
};

struct BatteryAgg {
    std::map<std::string, DistinguisherStats> stats;

    void merge(const BatteryAgg& o) {
        for (const auto& [name, s] : o.stats) {
            stats[name].real_ones += s.real_ones;
            stats[name].ideal_ones += s.ideal_ones;
        }
    }
};

}  // namespace detail

// Weak deletion-compliance estimate (coupled): per trial, one execution gives
// both state_X and S(view_Z^X); a byte mismatch on the coupled pair
// upper-bounds any distinguisher's advantage on that trial. Simulator errors
// count as mismatches and are tallied separately.
inline AdvantageReport estimate_weak_advantage(const CollectorFactory& factory,
                                               const Simulator& simulator, const RunSpec& spec,
                                               std::uint64_t trials, std::uint64_t master_seed,
                                               std::optional<double> threshold = {},
                                               int jobs = 1) {
    if (trials == 0) throw ConfigError("weak audit needs at least one trial");
    auto agg = detail::run_trials<detail::WeakAgg>(
        trials, jobs, [&](std::uint64_t t, detail::WeakAgg& a) {
            auto collector = factory();
            ExecutionResult result =
                run_execution(*collector, spec.y_script, spec.z_script,
                              spec.config(master_seed, t, "real"));
            bool mismatch;
            try {
                CollectorState sim = simulator.simulate(result.view_z_x, spec.lambda,
                                                        derive_seed(master_seed, "sim", t, "real"));
                mismatch = sim.bytes != result.state_x.bytes;
            } catch (const Error&) {
                mismatch = true;
                ++a.sim_errors;
            }
            if (mismatch) {
                ++a.mismatches;
                a.first_mismatch = std::min(a.first_mismatch, t);
            }
        });

    AdvantageReport report;
    report.kind = "weak";
    report.trials = trials;
    report.mismatches = agg.mismatches;
    report.sim_errors = agg.sim_errors;
    if (agg.first_mismatch != UINT64_MAX) report.first_mismatch_trial = agg.first_mismatch;
    report.point_estimate = static_cast<double>(agg.mismatches) / static_cast<double>(trials);
    const double h = hoeffding_bound(trials);
    report.confidence_bound_95 = std::min(1.0, report.point_estimate + h);
    report.threshold = threshold.value_or(h);
    report.pass = report.point_estimate <= report.threshold;
    report.interpretation = "coupled mismatch rate upper-bounds any distinguisher's advantage";
    return report;
}

namespace detail {

inline AdvantageReport estimate_real_ideal(const CollectorFactory& factory, const RunSpec& spec,
                                           const std::vector<Distinguisher>& battery,
                                           std::uint64_t trials, std::uint64_t master_seed,
                                           std::optional<double> threshold, int jobs,
                                           bool give_state, const char* kind) {
    if (trials == 0) throw ConfigError("audit needs at least one trial");
    if (battery.empty()) throw ConfigError("distinguisher battery is empty");
    if (script_has_send_to_z(spec.y_script))
        throw ConfigError(std::string(kind) +
                          " audit forbids send_to_z in the Y script (ideal execution has no Y)");

    auto agg = detail::run_trials<detail::BatteryAgg>(
        trials, jobs, [&](std::uint64_t t, detail::BatteryAgg& a) {
            auto real_collector = factory();
            ExecutionResult real = run_execution(*real_collector, spec.y_script, spec.z_script,
                                                 spec.config(master_seed, t, "real"));
            auto ideal_collector = factory();
            ExecutionResult ideal = run_ideal_execution(*ideal_collector, spec.z_script,
                                                        spec.config(master_seed, t, "ideal"));
            for (const auto& d : battery) {
                const CollectorState* rs = give_state ? &real.state_x : nullptr;
                const CollectorState* is = give_state ? &ideal.state_x : nullptr;
                if (d.evaluate(rs, real.view_z_x) != 0) ++a.stats[d.name].real_ones;
                if (d.evaluate(is, ideal.view_z_x) != 0) ++a.stats[d.name].ideal_ones;
            }
        });

    AdvantageReport report;
    report.kind = kind;
    report.trials = trials;
    for (const auto& d : battery) report.per_distinguisher[d.name];  // keep zero rows
    for (const auto& [name, s] : agg.stats) report.per_distinguisher[name] = s;
    double max_adv = 0.0;
    for (const auto& [name, s] : report.per_distinguisher) {
        const double adv = std::abs(static_cast<double>(s.real_ones) -
                                    static_cast<double>(s.ideal_ones)) /
                           static_cast<double>(trials);
        max_adv = std::max(max_adv, adv);
    }
    report.point_estimate = max_adv;
    const double h = hoeffding_bound(trials);
    // Two independent sample sets, so the deviation allowance doubles.
    report.confidence_bound_95 = std::min(1.0, max_adv + 2.0 * h);
    report.threshold = threshold.value_or(2.0 * h);
    report.pass = report.point_estimate <= report.threshold;
    report.interpretation = report.pass
                                ? "no distinguisher in battery exceeded the threshold"
                                : "lower bound on sup-advantage (battery is not exhaustive)";
    return report;
}

}  // namespace detail

// Strong deletion-compliance estimate: real executions against ideal
// executions with the silent Y0 on independent seed streams; per
// distinguisher, the advantage is the absolute frequency gap, and the report
// carries the battery maximum. A failure is a certificate (a lower bound on
// the sup over all distinguishers); a pass only speaks for the battery.
inline AdvantageReport estimate_strong_advantage(const CollectorFactory& factory,
                                                 const RunSpec& spec,
                                                 const std::vector<Distinguisher>& battery,
                                                 std::uint64_t trials, std::uint64_t master_seed,
                                                 std::optional<double> threshold = {},
                                                 int jobs = 1) {
    return detail::estimate_real_ideal(factory, spec, battery, trials, master_seed, threshold,
                                       jobs, true, "strong");
}

// Privacy-preservation estimate: as the strong audit, but distinguishers see
// only the environment's view.
inline AdvantageReport estimate_privacy_advantage(const CollectorFactory& factory,
                                                  const RunSpec& spec,
                                                  const std::vector<Distinguisher>& battery,
                                                  std::uint64_t trials, std::uint64_t master_seed,
                                                  std::optional<double> threshold = {},
                                                  int jobs = 1) {
    return detail::estimate_real_ideal(factory, spec, battery, trials, master_seed, threshold,
                                       jobs, false, "privacy");
}

// ---------------------------------------------------------------------------
// Theorem-bound experiments. Each check pins its slack as the sum of the
// Hoeffding allowances of every estimate entering the inequality, with
// two-sample estimates contributing 2h and bound-side terms scaled by their
// coefficients.
// ---------------------------------------------------------------------------

struct BoundCheck {
    std::string name;
    double measured = 0.0;
    double bound = 0.0;
    double slack = 0.0;
    bool holds = false;
    std::vector<std::pair<std::string, double>> terms;
};

inline BoundCheck make_bound_check(std::string name, double measured, double bound, double slack,
                                   std::vector<std::pair<std::string, double>> terms) {
    BoundCheck c;
    c.name = std::move(name);
    c.measured = measured;
    c.bound = bound;
    c.slack = slack;
    c.holds = measured <= bound + slack;
    c.terms = std::move(terms);
    return c;
}

// eps_strong <= 2(eps1 + eps2): weak error and privacy error imply strong
// compliance. Slack: strong is a two-sample estimate (2h); eps1 enters with
// coefficient 2 (2h); eps2 is two-sample with coefficient 2 (4h). Total 8h.
inline BoundCheck verify_bound_thm3(const CollectorFactory& factory, const Simulator& weak_sim,
                                    const RunSpec& spec, std::uint64_t trials,
                                    std::uint64_t master_seed, int jobs = 1) {
    const auto battery = default_battery();
    AdvantageReport weak = estimate_weak_advantage(factory, weak_sim, spec, trials,
                                                   mix64(master_seed ^ 0x31), {}, jobs);
    AdvantageReport privacy = estimate_privacy_advantage(factory, spec, battery, trials,
                                                         mix64(master_seed ^ 0x32), {}, jobs);
    AdvantageReport strong = estimate_strong_advantage(factory, spec, battery, trials,
                                                       mix64(master_seed ^ 0x33), {}, jobs);
    const double h = hoeffding_bound(trials);
    const double eps1 = weak.point_estimate;
    const double eps2 = privacy.point_estimate;
    return make_bound_check("strong <= 2*(weak + privacy)", strong.point_estimate,
                            2.0 * (eps1 + eps2), 8.0 * h,
                            {{"eps1_weak", eps1},
                             {"eps2_privacy", eps2},
                             {"eps_strong", strong.point_estimate},
                             {"hoeffding", h}});
}

// eps_k <= 2k * eps1 for a k-representative deletion-requester. The Y script
// for each k is k posts under the given key prefix; eps1 is measured on the
// k = 1 member. Slack: h for eps_k plus 2k*h for the scaled eps1.
inline std::vector<BoundCheck> verify_bound_thm5(const CollectorFactory& factory,
                                                 const Simulator& simulator,
                                                 const RunSpec& base_spec,
                                                 const std::vector<std::uint32_t>& k_list,
                                                 const Bytes& y_key_prefix, std::uint64_t trials,
                                                 std::uint64_t master_seed, int jobs = 1) {
    auto spec_for = [&](std::uint32_t k) {
        RunSpec s = base_spec;
        s.y_script.clear();
        for (std::uint32_t i = 1; i <= k; ++i)
            s.y_script.push_back(
                Action::post(y_key_prefix + std::to_string(i), "m" + std::to_string(i)));
        return s;
    };
    AdvantageReport one = estimate_weak_advantage(factory, simulator, spec_for(1), trials,
                                                  mix64(master_seed ^ 0x51), {}, jobs);
    const double eps1 = one.point_estimate;
    const double h = hoeffding_bound(trials);
    std::vector<BoundCheck> checks;
    for (std::uint32_t k : k_list) {
        AdvantageReport rep = estimate_weak_advantage(factory, simulator, spec_for(k), trials,
                                                      mix64(master_seed ^ (0x5100 + k)), {}, jobs);
        checks.push_back(make_bound_check(
            "eps_" + std::to_string(k) + " <= 2*" + std::to_string(k) + "*eps1",
            rep.point_estimate, 2.0 * k * eps1, (2.0 * k + 1.0) * h,
            {{"k", static_cast<double>(k)},
             {"eps_k", rep.point_estimate},
             {"eps1", eps1},
             {"hoeffding", h}}));
    }
    return checks;
}

// Sub-scenario of a parallel-composition scenario: the actions addressed to
// sub-collector `index`, with the index stripped. A capture survives only if
// the action just before it survived (captures bind the previous session's
// token), and deletes survive only if their reference does.
inline PartyScript split_script_by_index(const PartyScript& script, int index) {
    PartyScript out;
    std::vector<std::string> kept_names;
    bool last_kept = false;
    for (const auto& a : script) {
        switch (a.op) {
            case Action::Op::Post:
            case Action::Op::Fetch:
            case Action::Op::Query:
                if (a.index == index) {
                    Action b = a;
                    b.index = 0;
                    out.push_back(std::move(b));
                    last_kept = true;
                } else {
                    last_kept = false;
                }
                break;
            case Action::Op::Delete:
                if (a.token_literal) {
                    if (a.index == index) {
                        Action b = a;
                        b.index = 0;
                        out.push_back(std::move(b));
                    }
                } else if (std::find(kept_names.begin(), kept_names.end(), a.token_ref) !=
                           kept_names.end()) {
                    out.push_back(a);
                }
                last_kept = false;
                break;
            case Action::Op::Capture:
                if (last_kept) {
                    kept_names.push_back(a.capture_name);
                    out.push_back(a);
                }
                last_kept = false;
                break;
            case Action::Op::ActivateY:
            case Action::Op::SendToZ:
                out.push_back(a);
                last_kept = false;
                break;
        }
    }
    return out;
}

inline RunSpec split_spec_by_index(const RunSpec& spec, int index) {
    RunSpec s = spec;
    s.y_script = split_script_by_index(spec.y_script, index);
    s.z_script = split_script_by_index(spec.z_script, index);
    return s;
}

// Parallel composition: eps_composed <= eps1 + eps2. Components are audited
// on the composed scenario's per-index sub-scenarios. Slack: 3h.
inline BoundCheck verify_bound_thm6(const CollectorFactory& composed_factory,
                                    const Simulator& composed_sim,
                                    const CollectorFactory& sub1_factory, const Simulator& sub1_sim,
                                    const CollectorFactory& sub2_factory, const Simulator& sub2_sim,
                                    const RunSpec& composed_spec, std::uint64_t trials,
                                    std::uint64_t master_seed, int jobs = 1) {
    AdvantageReport comp = estimate_weak_advantage(composed_factory, composed_sim, composed_spec,
                                                   trials, mix64(master_seed ^ 0x61), {}, jobs);
    AdvantageReport sub1 =
        estimate_weak_advantage(sub1_factory, sub1_sim, split_spec_by_index(composed_spec, 1),
                                trials, mix64(master_seed ^ 0x62), {}, jobs);
    AdvantageReport sub2 =
        estimate_weak_advantage(sub2_factory, sub2_sim, split_spec_by_index(composed_spec, 2),
                                trials, mix64(master_seed ^ 0x63), {}, jobs);
    const double h = hoeffding_bound(trials);
    return make_bound_check("eps_parallel <= eps1 + eps2", comp.point_estimate,
                            sub1.point_estimate + sub2.point_estimate, 3.0 * h,
                            {{"eps_composed", comp.point_estimate},
                             {"eps1", sub1.point_estimate},
                             {"eps2", sub2.point_estimate},
                             {"hoeffding", h}});
}

// Independence error of the shipped sequential composition: fraction of
// trials where the extractor's reconstruction of the internal records for
// Z's sessions is not byte-identical to the transcript's.
inline double measure_independence_error(const CollectorFactory& composed_factory,
                                         const RunSpec& spec, std::uint64_t trials,
                                         std::uint64_t master_seed, int jobs = 1) {
    struct Agg {
        std::uint64_t mismatches = 0;
        void merge(const Agg& o) { mismatches += o.mismatches; }
    };
    auto agg = detail::run_trials<Agg>(trials, jobs, [&](std::uint64_t t, Agg& a) {
        auto collector = composed_factory();
        ExecutionResult result = run_execution(*collector, spec.y_script, spec.z_script,
                                               spec.config(master_seed, t, "real"));
        View extracted = extract_internal_view(result.view_z_x);
        // Internal records paired with Z-initiated client sessions (the
        // internal session directly follows its client session).
        std::vector<const SessionRecord*> actual;
        for (const auto& z_rec : result.view_z_x.records)
            for (const auto& rec : result.transcript)
                if (rec.initiator == Origin::Internal && rec.sid == z_rec.sid + 1)
                    actual.push_back(&rec);
        bool ok = actual.size() == extracted.records.size();
        for (std::size_t i = 0; ok && i < actual.size(); ++i)
            ok = encode_record(*actual[i]) == encode_record(extracted.records[i]);
        if (!ok) ++a.mismatches;
    });
    return static_cast<double>(agg.mismatches) / static_cast<double>(trials);
}

// Sequential composition: eps_composed <= eps1 + eps2 + 2*eps_independence.
// Components are audited standalone on the same client scripts (the composite
// is client-transparent). Slack: h + h + h + 2h = 5h.
inline BoundCheck verify_bound_thm7(const CollectorFactory& composed_factory,
                                    const Simulator& composed_sim,
                                    const CollectorFactory& frontend_factory,
                                    const Simulator& frontend_sim,
                                    const CollectorFactory& backend_factory,
                                    const Simulator& backend_sim, const RunSpec& spec,
                                    std::uint64_t trials, std::uint64_t master_seed,
                                    int jobs = 1) {
    AdvantageReport comp = estimate_weak_advantage(composed_factory, composed_sim, spec, trials,
                                                   mix64(master_seed ^ 0x71), {}, jobs);
    AdvantageReport front = estimate_weak_advantage(frontend_factory, frontend_sim, spec, trials,
                                                    mix64(master_seed ^ 0x72), {}, jobs);
    AdvantageReport back = estimate_weak_advantage(backend_factory, backend_sim, spec, trials,
                                                   mix64(master_seed ^ 0x73), {}, jobs);
    const double eps_ind =
        measure_independence_error(composed_factory, spec, trials, mix64(master_seed ^ 0x74), jobs);
    const double h = hoeffding_bound(trials);
    return make_bound_check("eps_sequential <= eps1 + eps2 + 2*eps_ind", comp.point_estimate,
                            front.point_estimate + back.point_estimate + 2.0 * eps_ind, 5.0 * h,
                            {{"eps_composed", comp.point_estimate},
                             {"eps1_frontend", front.point_estimate},
                             {"eps2_backend", back.point_estimate},
                             {"eps_independence", eps_ind},
                             {"hoeffding", h}});
}

}  // namespace delaudit
