#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "cvwin/dataio.hpp"
#include "cvwin/estimator.hpp"
#include "stub_judge_server.hpp"
#include "temp_dir.hpp"

using namespace cvwin;
using cvwin::testing::slurp;
using cvwin::testing::StubJudgeServer;
using cvwin::testing::StubReply;
using cvwin::testing::TempDir;

namespace {

const std::filesystem::path kData = CVWIN_TEST_DATA_DIR;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "cvwin");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

void write_worked_dataset(const TempDir& dir) {
    dir.write("a.jsonl",
              R"({"question_id": "q1", "model_a": "A", "model_b": "B", "winner": "model_a"})" "\n"
              R"({"question_id": "q2", "model_a": "A", "model_b": "B", "winner": "model_b"})" "\n"
              R"({"question_id": "q3", "model_a": "B", "model_b": "A", "winner": "model_b"})" "\n"
              R"({"question_id": "q4", "model_a": "A", "model_b": "B", "winner": "tie"})" "\n");
    dir.write("s.jsonl",
              R"({"question_id": "q1", "model_a": "A", "model_b": "B", "preference": 0.9, "evaluator": "rm"})" "\n"
              R"({"question_id": "q2", "model_a": "B", "model_b": "A", "preference": 0.8, "evaluator": "rm"})" "\n"
              R"({"question_id": "q3", "model_a": "A", "model_b": "B", "preference": 0.8, "evaluator": "rm"})" "\n"
              R"({"question_id": "q4", "model_a": "A", "model_b": "B", "preference": 0.4, "evaluator": "rm"})" "\n");
}

}  // namespace

TEST_CASE("help and argument errors") {
    CHECK(run_cli({"--help"}).code == 0);
    CHECK(run_cli({"estimate", "--help"}).code == 0);
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"simulate", "--bogus"}).code == 2);
    CHECK(run_cli({"saving", "--annotations", "x.jsonl"}).code == 2);
    TempDir dir;
    CHECK(run_cli({"simulate", "--p", "1.5", "--out", dir.path().string()}).code == 2);
}

TEST_CASE("estimate on the worked dataset") {
    TempDir dir;
    write_worked_dataset(dir);
    const auto a = (dir / "a.jsonl").string();
    const auto s = (dir / "s.jsonl").string();
    const auto out = dir.path().string();

    auto r = run_cli({"estimate", "--annotations", a, "--scores", s, "--indices", "0,1", "--out", out});
    REQUIRE(r.code == 0);
    auto doc = read_report(dir / "estimate.json");
    CHECK(doc.report.win_rate == doctest::Approx(15.0 / 28.0).epsilon(1e-9));
    CHECK(doc.report.params->alpha == doctest::Approx(10.0 / 7.0).epsilon(1e-9));
    CHECK(doc.report.params->mu_hat_z == doctest::Approx(0.575).epsilon(1e-9));

    r = run_cli({"estimate", "--annotations", a, "--scores", s, "--out", out});
    REQUIRE(r.code == 0);
    CHECK(read_report(dir / "estimate.json").report.win_rate == doctest::Approx(0.625).epsilon(1e-9));

    r = run_cli({"estimate", "--annotations", a, "--scores", s, "--pair", "B,A", "--method", "reference_only", "--out", out});
    REQUIRE(r.code == 0);
    CHECK(read_report(dir / "estimate.json").report.win_rate == doctest::Approx(0.375).epsilon(1e-9));

    r = run_cli({"estimate", "--annotations", a, "--scores", s, "--method", "synthetic_only", "--out", out});
    REQUIRE(r.code == 0);
    CHECK(read_report(dir / "estimate.json").report.win_rate == doctest::Approx(0.575).epsilon(1e-9));

    r = run_cli({"estimate", "--annotations", a, "--scores", s, "--k", "3", "--seed", "5", "--out", out});
    REQUIRE(r.code == 0);
    const auto sampled = read_report(dir / "estimate.json");
    CHECK(sampled.report.k == 3);
    CHECK(sampled.seed == 5u);
    CHECK(sampled.sampling == "without_replacement");

    CHECK(run_cli({"estimate", "--annotations", a, "--scores", s, "--k", "5", "--out", out}).code == 3);
    CHECK(run_cli({"estimate", "--annotations", a, "--scores", s, "--pair", "A,C", "--out", out}).code == 3);
    CHECK(run_cli({"estimate", "--annotations", a, "--scores", s, "--method", "magic", "--out", out}).code == 2);
}

TEST_CASE("estimate with k = n on simulated data reproduces the full reference mean") {
    TempDir dir;
    const auto out = dir.path().string();
    REQUIRE(run_cli({"simulate", "--p", "0.3", "--lambda", "0.6", "--n", "400", "--seed", "3", "--out", out}).code == 0);
    const auto a = (dir / "annotations.jsonl").string();
    const auto s = (dir / "scores.jsonl").string();
    REQUIRE(run_cli({"estimate", "--annotations", a, "--scores", s, "--k", "400", "--out", out}).code == 0);
    const auto ds = join_scores(load_annotations(a).rows, load_scores(s).rows);
    CHECK(read_report(dir / "estimate.json").report.win_rate ==
          doctest::Approx(reference_mean(ds[0].reference_values()).win_rate).epsilon(1e-9));
}

TEST_CASE("control variates without scores is a data error") {
    TempDir dir;
    write_worked_dataset(dir);
    const auto r = run_cli({"estimate", "--annotations", (dir / "a.jsonl").string(), "--out", dir.path().string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("synthetic") != std::string::npos);
    CHECK(run_cli({"estimate", "--annotations", (dir / "missing.jsonl").string(), "--out", dir.path().string()}).code == 3);
}

TEST_CASE("saving on the golden mini dataset") {
    TempDir dir;
    const auto r = run_cli({"saving", "--annotations", (kData / "mini_annotations.jsonl").string(), "--scores",
                            (kData / "mini_scores.jsonl").string(), "--min-annotations", "50", "--out",
                            dir.path().string()});
    REQUIRE(r.code == 0);
    const auto agg = parse_aggregate(slurp(dir / "saving.json"));
    CHECK(agg.average_saving == doctest::Approx(0.453600124728554).epsilon(1e-9));
    CHECK(agg.per_pair.size() == 2);
    CHECK(std::filesystem::exists(dir / "saving_matrix.csv"));

    CHECK(run_cli({"saving", "--annotations", (kData / "mini_annotations.jsonl").string(), "--scores",
                   (kData / "mini_scores.jsonl").string(), "--min-annotations", "500", "--out", dir.path().string()})
              .code == 3);
}

TEST_CASE("bootstrap writes one curve per method and is deterministic") {
    TempDir dir;
    const auto out = dir.path().string();
    REQUIRE(run_cli({"simulate", "--p", "0.3", "--lambda", "0.6", "--n", "500", "--seed", "9", "--out", out}).code == 0);
    const std::vector<std::string> args{"bootstrap", "--annotations", (dir / "annotations.jsonl").string(), "--scores",
                                        (dir / "scores.jsonl").string(), "--k-grid", "5,10,20", "--replicates", "500",
                                        "--seed", "4", "--out", out};
    REQUIRE(run_cli(args).code == 0);
    const std::string names[] = {"reference_only.csv", "control_variates.csv", "synthetic_only.csv",
                                 "reference_shifted.csv", "bootstrap_summary.json"};
    std::vector<std::string> first;
    for (const auto& n : names) {
        REQUIRE(std::filesystem::exists(dir / n));
        first.push_back(slurp(dir / n));
    }
    const auto cv = read_curve(dir / "control_variates.csv");
    CHECK(cv.points.size() == 3);
    CHECK(cv.replicates == 500);
    const auto summary = nlohmann::json::parse(first.back());
    CHECK(summary.contains("saving_ratio"));
    CHECK(summary.contains("overlap"));

    REQUIRE(run_cli(args).code == 0);
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(slurp(dir / names[i]) == first[i]);
}

TEST_CASE("simulate emits ingestible files and exact moments") {
    TempDir dir;
    const auto out = dir.path().string();
    REQUIRE(run_cli({"simulate", "--p", "0.3", "--lambda", "0.6", "--n", "50", "--out", out}).code == 0);
    CHECK(load_annotations(dir / "annotations.jsonl").rows.size() == 50);
    CHECK(load_scores(dir / "scores.jsonl").rows.size() == 50);
    const auto m = nlohmann::json::parse(slurp(dir / "moments.json"));
    CHECK(m.dump().find("0.126") != std::string::npos);

    REQUIRE(run_cli({"simulate", "--tie-rate", "0.2", "--n", "50", "--out", out}).code == 0);
    CHECK(std::filesystem::exists(dir / "annotations.jsonl"));
}

TEST_CASE("annotate against a stub endpoint") {
    StubJudgeServer server([](const std::string&) { return StubReply{200, "[[B]]"}; });
    TempDir dir;
    dir.write("r.jsonl",
              R"({"question_id": "q1", "model_a": "A", "model_b": "B", "question": "hi", "answer_a": "x", "answer_b": "y"})" "\n"
              R"({"question_id": "q2", "model_a": "B", "model_b": "A", "question": "hi", "answer_a": "x", "answer_b": "y"})" "\n");
    const auto r = run_cli({"annotate", "--responses", (dir / "r.jsonl").string(), "--endpoint", server.endpoint(),
                            "--model", "stub", "--backoff", "0.001", "--out", dir.path().string()});
    REQUIRE(r.code == 0);
    const auto scores = load_scores(dir / "scores.jsonl");
    REQUIRE(scores.rows.size() == 2);
    CHECK(scores.rows[0].preference == 0.0);
    CHECK(std::filesystem::exists(dir / "audit.jsonl"));
    CHECK(std::filesystem::exists(dir / "skips.jsonl"));

    CHECK(run_cli({"annotate", "--responses", (dir / "r.jsonl").string(), "--endpoint", server.endpoint(), "--model",
                   "stub", "--token-env", "CVWIN_CLI_TEST_NO_SUCH_VAR", "--out", dir.path().string()})
              .code == 2);
}
