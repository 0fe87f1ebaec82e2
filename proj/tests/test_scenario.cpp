#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "delaudit/scenario.hpp"

using namespace delaudit;

namespace {

ordered_json minimal() {
    return ordered_json::parse(R"({
        "name": "t",
        "collector": "board",
        "simulator": "board",
        "z_script": [
            {"op": "post", "k": "k1", "m": "m1"},
            {"op": "capture", "name": "t1"},
            {"op": "fetch"},
            {"op": "delete", "token": "t1"}
        ]
    })");
}

}  // namespace

TEST_CASE("scenario defaults and parsing") {
    Scenario s = load_scenario_json(minimal());
    CHECK(s.name == "t");
    CHECK(s.lambda == 16);
    CHECK(s.trials == 1000);
    CHECK(s.master_seed == 1);
    CHECK_FALSE(s.threshold.has_value());
    CHECK(s.z_script.size() == 4);
    CHECK(s.y_script.empty());
    CHECK(s.z_script[0].op == Action::Op::Post);
    CHECK(s.z_script[3].token_ref == "t1");
}

TEST_CASE("scenario validation errors") {
    SUBCASE("missing collector") {
        auto j = minimal();
        j.erase("collector");
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("unknown collector") {
        auto j = minimal();
        j["collector"] = "ledger";
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("unknown simulator") {
        auto j = minimal();
        j["simulator"] = "oracle";
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("unknown action op") {
        auto j = minimal();
        j["z_script"].push_back({{"op", "explode"}});
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("post without message") {
        auto j = minimal();
        j["z_script"].push_back({{"op", "post"}, {"k", "a"}});
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("delete without token or literal") {
        auto j = minimal();
        j["z_script"].push_back({{"op", "delete"}});
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("dangling token reference") {
        auto j = minimal();
        j["z_script"].push_back({{"op", "delete"}, {"token", "never_captured"}});
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("protocol unknown to the collector") {
        auto j = minimal();
        j["z_script"].push_back({{"op", "query"}});
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("interleave_p conflicts with activate_y") {
        auto j = minimal();
        j["interleave_p"] = 0.5;
        j["z_script"].push_back({{"op", "activate_y"}, {"n", 1}});
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("lambda out of range") {
        auto j = minimal();
        j["lambda"] = 4;
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("zero trials") {
        auto j = minimal();
        j["trials"] = 0;
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
    SUBCASE("bad index") {
        auto j = minimal();
        j["z_script"].push_back({{"op", "fetch"}, {"index", 7}});
        CHECK_THROWS_AS(load_scenario_json(j), ConfigError);
    }
}

TEST_CASE("send_to_z parses for weak-audit scenarios") {
    auto j = minimal();
    j["y_script"] = ordered_json::array({ordered_json{{"op", "send_to_z"}, {"payload", "hi"}}});
    Scenario s = load_scenario_json(j);
    CHECK(s.y_script.size() == 1);
    CHECK(s.y_script[0].op == Action::Op::SendToZ);
}

TEST_CASE("report JSON has a stable key layout") {
    Scenario s = load_scenario_json(minimal());
    AdvantageReport rep;
    rep.kind = "weak";
    rep.trials = 10;
    rep.point_estimate = 0.0;
    rep.confidence_bound_95 = 0.5;
    rep.threshold = 0.1;
    rep.pass = true;

    ordered_json j = report_to_json(rep, s);
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    const std::vector<std::string> expected{
        "kind",       "scenario",       "theorem",        "collector",
        "simulator",  "lambda",         "trials",         "master_seed",
        "flavor",     "mismatches",     "sim_errors",     "first_mismatch_trial",
        "per_distinguisher", "point_estimate", "confidence_bound_95", "threshold",
        "verdict",    "interpretation"};
    CHECK(keys == expected);
    CHECK(j["verdict"] == "pass");
    CHECK(j.dump(2) == report_to_json(rep, s).dump(2));
}

TEST_CASE("written reports are newline-terminated") {
    Scenario s = load_scenario_json(minimal());
    AdvantageReport rep;
    rep.kind = "weak";
    rep.trials = 1;
    const std::string path = "test_scenario_report.json";
    write_report(path, report_to_json(rep, s));
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE_FALSE(content.empty());
    CHECK(content.back() == '\n');
    std::remove(path.c_str());
}

TEST_CASE("experiment and hi-check reports serialize") {
    Scenario s = load_scenario_json(minimal());
    BoundCheck c = make_bound_check("x <= y", 0.0, 0.1, 0.05, {{"eps", 0.0}});
    ordered_json j = experiment_to_json("thm6", {c}, s);
    CHECK(j["all_hold"] == true);
    CHECK(j["checks"][0]["holds"] == true);

    auto impl = make_ads_impl("tombstone_list");
    std::vector<Bytes> universe{"k1"};
    HiCheckResult hi = check_history_independence(*impl, universe, 2);
    ordered_json hj = hi_check_to_json("tombstone_list", 1, 2, hi);
    CHECK(hj["ok"] == false);
    CHECK(hj["counterexample"]["seq_t"].size() == 2);
}

TEST_CASE("scenario file loading reports missing files and parse errors") {
    CHECK_THROWS_AS(load_scenario_file("no_such_file.json"), ConfigError);
    const std::string path = "test_scenario_broken.json";
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    CHECK_THROWS_AS(load_scenario_file(path), ConfigError);
    std::remove(path.c_str());
}
