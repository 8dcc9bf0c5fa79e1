#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <string>
#include <vector>

#include "cvwin/dataio.hpp"
#include "cvwin/errors.hpp"
#include "cvwin/judge.hpp"
#include "stub_judge_server.hpp"
#include "temp_dir.hpp"

using namespace cvwin;
using namespace std::chrono_literals;
using cvwin::testing::question_of;
using cvwin::testing::slurp;
using cvwin::testing::StubJudgeServer;
using cvwin::testing::StubReply;
using cvwin::testing::TempDir;

namespace {

bool throws_kind(ErrorKind kind, auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

std::vector<ResponseRecord> make_records(int n) {
    std::vector<ResponseRecord> out;
    for (int i = 0; i < n; ++i) {
        const std::string id = "p" + std::to_string(1000 + i);
        out.push_back({id, "m-" + std::to_string(i % 3), "m-x", "question " + id, "left answer", "right answer"});
    }
    return out;
}

// Deterministic verdicts keyed on the question; every tenth record gets prose only.
StubReply mixed_reply(const std::string& user) {
    const auto q = question_of(user);
    const int id = std::stoi(q.substr(q.find('p') + 1));
    if (id % 10 == 3) return {200, "Both answers have merit and I cannot decide."};
    static const char* verdicts[] = {"[[A]]", "[[B]]", "[[C]]"};
    return {200, "Assistant B restates [[B]]; weighing it all, " + std::string(verdicts[id % 3])};
}

JudgeConfig config_for(const StubJudgeServer& server) {
    JudgeConfig c;
    c.endpoint = server.endpoint();
    c.model = "stub-judge";
    c.timeout = 2000ms;
    c.max_retries = 1;
    c.backoff_base = 1ms;
    return c;
}

}  // namespace

TEST_CASE("render_prompt examples") {
    const auto a = render_prompt("pair-v2", "What is 2+2?", "4", "5");
    const auto b = render_prompt("pair-v2", "What is 2+2?", "4", "5");
    CHECK(a.text() == b.text());
    CHECK(a.user.find("[User Question]\nWhat is 2+2?") != std::string::npos);
    CHECK(a.system.find("\"[[A]]\" if assistant A is better") != std::string::npos);

    const auto swapped = render_prompt("pair-v2", "What is 2+2?", "5", "4");
    CHECK(swapped.system == a.system);
    CHECK(swapped.user.find("[The Start of Assistant A's Answer]\n5\n") != std::string::npos);
    CHECK(a.user.find("[The Start of Assistant A's Answer]\n4\n") != std::string::npos);

    CHECK(throws_kind(ErrorKind::kInputDomain, [] { render_prompt("pair-v2", "q", "", "b"); }));
    CHECK(throws_kind(ErrorKind::kConfiguration, [] { render_prompt("pair-v9", "q", "a", "b"); }));
}

TEST_CASE("parse_verdict examples") {
    CHECK(parse_verdict("... therefore [[A]]") == Outcome::kLeftWins);
    CHECK(parse_verdict("The better answer is clear.") == Outcome::kUnparseable);
    CHECK(parse_verdict("[[B]] ... on reflection [[C]]") == Outcome::kTie);
    CHECK(parse_verdict("[[C]] then [[A]] then [[B]]") == Outcome::kRightWins);
    CHECK(parse_verdict("[A] and [[D]]") == Outcome::kUnparseable);
    CHECK(parse_verdict("") == Outcome::kUnparseable);
    CHECK(outcome_preference(Outcome::kLeftWins) == 1.0);
    CHECK(outcome_preference(Outcome::kTie) == 0.5);
    CHECK_FALSE(outcome_preference(Outcome::kUnparseable).has_value());
}

TEST_CASE("judge config validation") {
    JudgeConfig c;
    CHECK(throws_kind(ErrorKind::kConfiguration, [&] { c.validate(); }));
    c.endpoint = "ftp://x/y";
    c.model = "m";
    CHECK(throws_kind(ErrorKind::kConfiguration, [&] { c.validate(); }));
    c.endpoint = "http://localhost:1/v1/chat/completions";
    CHECK_NOTHROW(c.validate());
    c.max_concurrency = 0;
    CHECK(throws_kind(ErrorKind::kConfiguration, [&] { c.validate(); }));
    c.max_concurrency = 1;
    c.timeout = 0ms;
    CHECK(throws_kind(ErrorKind::kConfiguration, [&] { c.validate(); }));
}

TEST_CASE("load_responses") {
    TempDir dir;
    const auto ok = dir.write("r.jsonl",
                              R"({"question_id": 1, "model_a": "a", "model_b": "b", "question": "q", "answer_a": "x", "answer_b": "y"})" "\n");
    const auto recs = load_responses(ok);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].key() == "1|a|b");
    const auto dup = dir.write("d.jsonl", slurp(ok) + slurp(ok));
    CHECK(throws_kind(ErrorKind::kCorruptDataset, [&] { load_responses(dup); }));
}

TEST_CASE("endpoint that always answers [[A]]") {
    StubJudgeServer server([](const std::string&) { return StubReply{200, "Clearly [[A]]"}; });
    TempDir dir;
    const auto records = make_records(12);
    const auto summary = annotate_dataset(records, config_for(server),
                                          {dir / "scores.jsonl", dir / "audit.jsonl", dir / "skips.jsonl", "", {}});
    CHECK(summary.total == 12);
    CHECK(summary.scored == 12);
    CHECK(summary.skipped == 0);
    const auto scores = load_scores(dir / "scores.jsonl");
    REQUIRE(scores.rows.size() == 12);
    for (const auto& row : scores.rows) {
        CHECK(row.preference == 1.0);
        CHECK(row.evaluator == "stub-judge");
    }
    CHECK(slurp(dir / "skips.jsonl").empty());
}

TEST_CASE("endpoint that always times out") {
    StubJudgeServer server([](const std::string&) { return StubReply{200, "[[A]]", "", 600ms}; });
    TempDir dir;
    auto cfg = config_for(server);
    cfg.timeout = 150ms;
    cfg.max_retries = 2;
    const auto records = make_records(4);
    const auto summary = annotate_dataset(records, cfg, {dir / "scores.jsonl", dir / "audit.jsonl", dir / "skips.jsonl", "", {}});
    CHECK(summary.scored == 0);
    CHECK(summary.skipped == 4);
    CHECK(summary.scored + summary.skipped == summary.total);
    CHECK(server.requests() >= 4);
    for (const auto& s : summary.skips) CHECK(s.reason.find("retries exhausted") == 0);
}

TEST_CASE("transient errors are retried, permanent ones skipped") {
    std::atomic<int> calls{0};
    StubJudgeServer server([&](const std::string& user) {
        const auto q = question_of(user);
        if (q == "question p1000") return StubReply{calls++ < 2 ? 503 : 200, "[[B]]"};
        if (q == "question p1001") return StubReply{404, ""};
        if (q == "question p1002") return StubReply{200, "", "{not json"};
        return StubReply{200, "[[C]]"};
    });
    TempDir dir;
    auto cfg = config_for(server);
    cfg.max_retries = 3;
    cfg.max_concurrency = 1;
    const auto records = make_records(4);
    const auto summary = annotate_dataset(records, cfg, {dir / "scores.jsonl", dir / "audit.jsonl", dir / "skips.jsonl", "ev", {}});
    CHECK(summary.scored == 2);
    CHECK(summary.skipped == 2);
    const auto scores = load_scores(dir / "scores.jsonl");
    REQUIRE(scores.rows.size() == 2);
    CHECK(scores.rows[0].preference == 0.0);
    CHECK(scores.rows[1].preference == 0.5);
    CHECK(scores.rows[0].evaluator == "ev");
}

TEST_CASE("100 records with 10 unparseable answers") {
    StubJudgeServer server(mixed_reply);
    TempDir dir;
    const auto records = make_records(100);
    const auto summary = annotate_dataset(records, config_for(server),
                                          {dir / "scores.jsonl", dir / "audit.jsonl", dir / "skips.jsonl", "", {}});
    CHECK(summary.scored == 90);
    CHECK(summary.skipped == 10);
    CHECK(load_scores(dir / "scores.jsonl").rows.size() == 90);
    const auto skips = slurp(dir / "skips.jsonl");
    CHECK(std::count(skips.begin(), skips.end(), '\n') == 10);
    const auto audit = slurp(dir / "audit.jsonl");
    CHECK(std::count(audit.begin(), audit.end(), '\n') == 100);
    CHECK(audit.find("\"outcome\":\"unparseable\"") != std::string::npos);
}

TEST_CASE("interrupted runs resume to the uninterrupted result") {
    StubJudgeServer server(mixed_reply);
    const auto records = make_records(60);

    TempDir full;
    annotate_dataset(records, config_for(server), {full / "scores.jsonl", {}, {}, "", {}});

    TempDir parts;
    const AnnotateOptions opts{parts / "scores.jsonl", {}, {}, "", 17};
    const auto first = annotate_dataset(records, config_for(server), opts);
    CHECK(first.pending == 43);
    const int before = server.requests();
    auto second_opts = opts;
    second_opts.limit.reset();
    const auto second = annotate_dataset(records, config_for(server), second_opts);
    CHECK(second.already_scored == first.scored);
    CHECK(server.requests() - before == 60 - static_cast<int>(first.scored));
    CHECK(slurp(parts / "scores.jsonl") == slurp(full / "scores.jsonl"));
    CHECK(second.scored + second.skipped == second.total);
}

TEST_CASE("auth failures are fatal") {
    StubJudgeServer server([](const std::string&) { return StubReply{200, "[[A]]"}; }, "secret-token");
    TempDir dir;
    auto cfg = config_for(server);
    const auto records = make_records(5);

    cfg.token_env = "CVWIN_TEST_UNSET_TOKEN_VAR";
    CHECK(throws_kind(ErrorKind::kAuth, [&] { annotate_dataset(records, cfg, {dir / "s.jsonl", {}, {}, "", {}}); }));

    ::setenv("CVWIN_TEST_WRONG_TOKEN", "wrong", 1);
    cfg.token_env = "CVWIN_TEST_WRONG_TOKEN";
    CHECK(throws_kind(ErrorKind::kAuth, [&] { annotate_dataset(records, cfg, {dir / "s.jsonl", {}, {}, "", {}}); }));

    ::setenv("CVWIN_TEST_GOOD_TOKEN", "secret-token", 1);
    cfg.token_env = "CVWIN_TEST_GOOD_TOKEN";
    CHECK(annotate_dataset(records, cfg, {dir / "s.jsonl", {}, {}, "", {}}).scored == 5);
}

TEST_CASE("unreachable endpoint skips every record") {
    TempDir dir;
    JudgeConfig cfg;
    cfg.endpoint = "http://127.0.0.1:9/v1/chat/completions";
    cfg.model = "none";
    cfg.timeout = 200ms;
    cfg.max_retries = 1;
    cfg.backoff_base = 1ms;
    const auto records = make_records(3);
    const auto summary = annotate_dataset(records, cfg, {dir / "s.jsonl", {}, {}, "", {}});
    CHECK(summary.skipped == 3);
    CHECK(summary.scored == 0);
}
