#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "delaudit/execution.hpp"

using namespace delaudit;

namespace {

ExecutionConfig config16(std::uint64_t seed, std::uint64_t trial = 0) {
    return ExecutionConfig::make(16, seed, trial);
}

}  // namespace

TEST_CASE("no interaction leaves the board state canonically empty") {
    MessageBoard b;
    ExecutionResult r = run_execution(b, {}, {}, config16(1));
    CHECK(r.state_x.bytes == CompactingList{}.rep());
    CHECK(r.view_z_x.records.empty());
    CHECK(r.view_y_x.records.empty());
    CHECK(r.transcript.empty());
}

TEST_CASE("separation scenario: real execution") {
    // Y queries once; Z activates Y, then queries. Y's session is deleted in
    // the terminate phase, so the final state is ({x_Z}, 1) while Z saw
    // parity 0.
    CounterCollector c;
    PartyScript y{Action::query()};
    PartyScript z{Action::activate_y(1), Action::query()};
    ExecutionResult r = run_execution(c, y, z, config16(42));

    REQUIRE(r.view_z_x.records.size() == 1);
    const SessionRecord& zrec = r.view_z_x.records[0];
    CHECK((zrec.response.back() & 1) == 0);

    Bytes x_z = zrec.response.substr(0, zrec.response.size() - 1);
    SortedKeySet xs;
    xs.insert(x_z);
    CHECK(r.state_x.bytes == encode_counter_state(xs, 1));

    // transcript: Y pi, Z pi, terminate-phase Y pid
    REQUIRE(r.transcript.size() == 3);
    CHECK(r.transcript[0].initiator == Origin::Y);
    CHECK(r.transcript[2].is_deletion);
    CHECK(r.transcript[2].token == r.transcript[0].token);
    CHECK(r.transcript[2].response == Bytes(1, kAckOk));
}

TEST_CASE("separation scenario: ideal execution sees parity 1") {
    CounterCollector c;
    PartyScript z{Action::activate_y(1), Action::query()};
    ExecutionResult r = run_ideal_execution(c, z, config16(42));
    REQUIRE(r.view_z_x.records.size() == 1);
    CHECK((r.view_z_x.records[0].response.back() & 1) == 1);
    CHECK(r.view_y_x.records.empty());
}

TEST_CASE("ideal execution is plain single-party determinism") {
    MessageBoard b;
    PartyScript z{Action::post("k1", "m1"), Action::fetch()};
    ExecutionResult r = run_ideal_execution(b, z, config16(4));
    Bytes expected;
    put_bstr(expected, "m1");
    CHECK(r.view_z_x.records[1].response == expected);
    CompactingList one;
    one.insert("k1", "m1");
    CHECK(r.state_x.bytes == one.rep());
}

TEST_CASE("ideal equals real when the Y script is empty") {
    CounterCollector c1, c2;
    PartyScript z{Action::query()};
    ExecutionResult real = run_execution(c1, {}, z, config16(7));
    ExecutionResult ideal = run_ideal_execution(c2, z, config16(7));
    CHECK(encode_execution_result(real) == encode_execution_result(ideal));
}

TEST_CASE("terminate phase auto-deletes Y's posts") {
    PartyScript y{Action::post("k", "m")};

    SUBCASE("Y activated through the interleaver") {
        MessageBoard b;
        ExecutionConfig cfg = config16(3);
        cfg.interleave_p = 1.0;
        ExecutionResult r = run_execution(b, y, {}, cfg);
        CHECK(r.state_x.bytes == CompactingList{}.rep());
        REQUIRE(r.view_y_x.records.size() == 2);
        CHECK(r.view_y_x.records[1].is_deletion);
    }
    SUBCASE("Z grants no activations: Y never acts") {
        MessageBoard b;
        ExecutionResult r = run_execution(b, y, {}, config16(3));
        CHECK(r.state_x.bytes == CompactingList{}.rep());
        CHECK(r.transcript.empty());
    }
}

TEST_CASE("scripted Y deletes are not repeated by the terminate phase") {
    MessageBoard b;
    PartyScript y{Action::post("y1", "m1"), Action::capture("t"), Action::post("y2", "m2"),
                  Action::del("t")};
    PartyScript z{Action::activate_y(4), Action::post("z1", "mz")};
    ExecutionResult r = run_execution(b, y, z, config16(5));

    // Y pi tokens and Y pid tokens must match as multisets
    std::map<Bytes, int> pi_tokens, pid_tokens;
    for (const auto& rec : r.transcript) {
        if (rec.initiator != Origin::Y) continue;
        if (rec.is_deletion)
            ++pid_tokens[rec.token];
        else
            ++pi_tokens[rec.token];
    }
    CHECK(pi_tokens == pid_tokens);
    CHECK(pi_tokens.size() == 2);

    CompactingList expected;
    expected.insert("z1", "mz");
    CHECK(r.state_x.bytes == expected.rep());
}

TEST_CASE("fetch sessions carry an empty token and the terminate phase copes") {
    MessageBoard b;
    PartyScript y{Action::fetch()};
    PartyScript z{Action::activate_y(1)};
    ExecutionResult r = run_execution(b, y, z, config16(6));
    REQUIRE(r.transcript.size() == 2);
    CHECK(r.transcript[0].token.empty());
    CHECK(r.transcript[1].is_deletion);
    CHECK(r.transcript[1].response == Bytes(1, kAckFail));  // nothing to delete
}

TEST_CASE("restrict_view filters to the pair in order") {
    MessageBoard b;
    PartyScript y{Action::post("y1", "a"), Action::post("y2", "b"), Action::post("y3", "c")};
    PartyScript z{Action::activate_y(3), Action::post("z1", "d"), Action::post("z2", "e")};
    ExecutionResult r = run_execution(b, y, z, config16(8));

    View zx = restrict_view(r.transcript, Party::Z, Party::X);
    REQUIRE(zx.records.size() == 2);
    CHECK(zx.records[0].token == "z1");
    CHECK(zx.records[1].token == "z2");
    CHECK(zx.records[0].order_index < zx.records[1].order_index);

    View yx = restrict_view(r.transcript, "Y", "X");
    CHECK(yx.records.size() == 6);  // 3 posts + 3 terminate deletes

    CHECK(restrict_view({}, Party::Z, Party::X).records.empty());
    CHECK_THROWS_AS(restrict_view(r.transcript, "Q", "X"), UnknownParty);
}

TEST_CASE("restrict_view on a sequential composition isolates internal records") {
    SequentialComposite s(std::make_unique<IndexFrontend>(), std::make_unique<MessageBoard>());
    PartyScript z{Action::post("k1", "m1"), Action::capture("t"), Action::fetch(),
                  Action::del("t")};
    ExecutionResult r = run_execution(s, {}, z, config16(9));

    View internal = restrict_view(r.transcript, Party::X1, Party::X2);
    REQUIRE(internal.records.size() == 3);  // forwarded post, fetch read, forwarded delete
    CHECK(internal.records[0].protocol == "post");
    CHECK(internal.records[1].protocol == "fetch");
    CHECK(internal.records[2].is_deletion);
    for (const auto& rec : internal.records) CHECK(rec.initiator == Origin::Internal);

    // client view excludes internals; each internal directly follows its client session
    View zx = restrict_view(r.transcript, Party::Z, Party::X);
    REQUIRE(zx.records.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(internal.records[i].sid == zx.records[i].sid + 1);
        CHECK(internal.records[i].order_index == zx.records[i].order_index + 1);
    }
}

TEST_CASE("executions are deterministic for a fixed config") {
    PartyScript y{Action::post("y1", "m1"), Action::capture("t"), Action::del("t")};
    PartyScript z{Action::post("z1", "m2"), Action::post("z2", "m3")};
    ExecutionConfig cfg = config16(77);
    cfg.interleave_p = 0.5;

    MessageBoard b1, b2;
    Bytes r1 = encode_execution_result(run_execution(b1, y, z, cfg));
    Bytes r2 = encode_execution_result(run_execution(b2, y, z, cfg));
    CHECK(r1 == r2);

    // a different scheduler stream may reorder, but stays internally deterministic
    ExecutionConfig other = config16(77, 1);
    other.interleave_p = 0.5;
    MessageBoard b3;
    Bytes r3 = encode_execution_result(run_execution(b3, y, z, other));
    CHECK(r3 == encode_execution_result([&] {
              MessageBoard b4;
              return run_execution(b4, y, z, other);
          }()));
}

TEST_CASE("restricting commutes with truncating the transcript") {
    CounterCollector c;
    PartyScript y{Action::query(), Action::query()};
    PartyScript z{Action::query(), Action::query(), Action::query()};
    ExecutionConfig cfg = config16(13);
    cfg.interleave_p = 0.4;
    ExecutionResult r = run_execution(c, y, z, cfg);

    for (std::uint64_t t = 0; t <= r.transcript.size(); ++t) {
        std::vector<SessionRecord> prefix;
        for (const auto& rec : r.transcript)
            if (rec.order_index <= t) prefix.push_back(rec);
        View a = restrict_view(prefix, Party::Z, Party::X);

        View full = restrict_view(r.transcript, Party::Z, Party::X);
        View b{full.owner, full.peer, {}};
        for (const auto& rec : full.records)
            if (rec.order_index <= t) b.records.push_back(rec);

        CHECK(encode_view(a) == encode_view(b));
    }
}

TEST_CASE("script errors surface at run time") {
    MessageBoard b;
    SUBCASE("unknown token reference") {
        PartyScript z{Action::del("ghost")};
        CHECK_THROWS_AS(run_execution(b, {}, z, config16(1)), ScriptError);
    }
    SUBCASE("capture before any session") {
        PartyScript z{Action::capture("t")};
        CHECK_THROWS_AS(run_execution(b, {}, z, config16(1)), ScriptError);
    }
}

TEST_CASE("session cap is enforced") {
    MessageBoard b;
    PartyScript z{Action::post("a", "1"), Action::post("b", "2"), Action::post("c", "3")};
    ExecutionConfig cfg = config16(1);
    cfg.max_sessions = 2;
    CHECK_THROWS_AS(run_execution(b, {}, z, cfg), SessionLimitExceeded);
}

TEST_CASE("config validation") {
    ExecutionConfig cfg = config16(1);
    cfg.lambda = 4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.lambda = 300;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.lambda = 256;
    CHECK_NOTHROW(cfg.validate());
    cfg.interleave_p = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("send_to_z lands in the Y<->Z view only") {
    MessageBoard b;
    PartyScript y{Action::send_to_z("hello"), Action::post("y1", "m")};
    PartyScript z{Action::activate_y(2), Action::post("z1", "m")};
    ExecutionResult r = run_execution(b, y, z, config16(2));

    View yz = restrict_view(r.transcript, Party::Y, Party::Z);
    REQUIRE(yz.records.size() == 1);
    CHECK(yz.records[0].protocol == "send_to_z");
    CHECK(yz.records[0].request == "hello");
    for (const auto& rec : r.view_z_x.records) CHECK(rec.protocol != "send_to_z");
}

TEST_CASE("script validation catches bad protocols and dangling refs") {
    auto board = make_collector("board");
    PartyScript bad_proto{Action::query()};
    CHECK_THROWS_AS(validate_script(bad_proto, *board, "Z"), ConfigError);

    PartyScript dangling{Action::del("nope")};
    CHECK_THROWS_AS(validate_script(dangling, *board, "Z"), ConfigError);

    PartyScript fine{Action::post("k", "m"), Action::capture("t"), Action::del("t")};
    CHECK_NOTHROW(validate_script(fine, *board, "Z"));

    PartyScript misplaced{Action::activate_y(1)};
    CHECK_THROWS_AS(validate_script(misplaced, *board, "Y"), ConfigError);

    PartyScript z_sends{Action::send_to_z("x")};
    CHECK_THROWS_AS(validate_script(z_sends, *board, "Z"), ConfigError);

    auto composite = make_collector("parallel(board,board)");
    PartyScript unindexed{Action::post("k", "m")};
    CHECK_THROWS_AS(validate_script(unindexed, *composite, "Z"), ConfigError);
    PartyScript indexed{Action::post("k", "m", 1)};
    CHECK_NOTHROW(validate_script(indexed, *composite, "Z"));
}
