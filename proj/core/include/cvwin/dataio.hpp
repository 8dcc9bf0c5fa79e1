/// @file dataio.hpp
/// @brief Line-delimited JSON ingestion, the annotation/score join, and
/// canonical report and curve files.
///
/// Input files carry one JSON object per line (see schemas/ in the source
/// tree). Outputs are written in a canonical form: fixed field order and
/// every real number rounded to 10 significant digits, so writing a parsed
/// file reproduces it byte for byte.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvwin/estimator.hpp"
#include "cvwin/experiments.hpp"
#include "cvwin/prefcore.hpp"

namespace cvwin {

enum class Winner { kModelA, kModelB, kTie };

struct RawAnnotationRow {
    std::string question_id;
    std::string model_a;
    std::string model_b;
    Winner winner = Winner::kTie;
    std::optional<std::string> judge;
    std::size_t line = 0;
};

struct ScoreRow {
    std::string question_id;
    std::string model_a;
    std::string model_b;
    std::optional<RewardPair> rewards;  // reward_a, reward_b
    std::optional<double> preference;   // P(model_a wins)
    std::string evaluator;
    std::size_t line = 0;

    /// P(model_a wins), from the preference or the reward pair.
    double preference_value() const;
};

struct RejectedLine {
    std::size_t line = 0;
    std::string reason;
};

template <typename Row>
struct LoadResult {
    std::vector<Row> rows;
    std::vector<RejectedLine> rejects;
    std::vector<std::string> warnings;
};

using AnnotationLoad = LoadResult<RawAnnotationRow>;
using ScoreLoad = LoadResult<ScoreRow>;

/// Streams an annotations file, calling `sink` per parsed row. Malformed lines
/// land in the returned rejects. Throws kIo for unreadable files and
/// kCorruptDataset when more than half of the non-blank lines are malformed.
AnnotationLoad stream_annotations(const std::filesystem::path& path,
                                  const std::function<void(RawAnnotationRow&&)>& sink);
AnnotationLoad load_annotations(const std::filesystem::path& path);

ScoreLoad stream_scores(const std::filesystem::path& path,
                        const std::function<void(ScoreRow&&)>& sink);
ScoreLoad load_scores(const std::filesystem::path& path);

/// Joins annotations with scores on (question_id, unordered model pair) and
/// groups the result per lexicographically ordered pair. Annotations without a
/// score keep an empty synthetic score; scores without annotations become
/// records with only a synthetic score. Within a pair, records are sorted by
/// content so the result does not depend on input line order. Throws
/// kAmbiguousJoin when one key carries conflicting scores.
std::vector<PairDataset> join_scores(std::span<const RawAnnotationRow> annotations,
                                     std::span<const ScoreRow> scores);

/// Dataset whose pair is {a, b} in either order, oriented as (a, b).
std::optional<PairDataset> find_pair(std::span<const PairDataset> datasets,
                                     const std::string& a, const std::string& b);

/// An estimate together with the run context that produced it.
struct EstimateDocument {
    EstimateReport report;
    std::optional<GeneratorPair> pair;
    std::optional<std::string> sampling;
    std::optional<std::uint64_t> seed;

    friend bool operator==(const EstimateDocument&, const EstimateDocument&) = default;
};

/// Rounds to 10 significant digits, the precision of every written file.
double canonical_real(double value);

std::string serialize_report(const EstimateDocument& doc);
EstimateDocument parse_report(const std::string& text);
void write_report(const EstimateDocument& doc, const std::filesystem::path& path);
EstimateDocument read_report(const std::filesystem::path& path);

/// CSV with header `method,k,mse,replicates`. Empty curves are rejected.
std::string serialize_curve(const BootstrapCurve& curve);
BootstrapCurve parse_curve(const std::string& text);
void write_curve(const BootstrapCurve& curve, const std::filesystem::path& path);
BootstrapCurve read_curve(const std::filesystem::path& path);

std::string serialize_aggregate(const PairAggregate& aggregate);
PairAggregate parse_aggregate(const std::string& text);
void write_aggregate(const PairAggregate& aggregate, const std::filesystem::path& path);

/// CSV `left,right,annotations,rho,saving_ratio,status`, one row per pair.
void write_saving_matrix(const PairAggregate& aggregate, const std::filesystem::path& path);

/// JSONL `{"line": ..., "reason": ...}` per rejected input line.
void write_rejects(std::span<const RejectedLine> rejects, const std::filesystem::path& path);

/// Emits a dataset in the ingestible formats: reference labels to the
/// annotations file, synthetic scores (as preferences, or rewards when known)
/// to the scores file.
void write_annotations(const PairDataset& dataset, const std::filesystem::path& path);
void write_scores(const PairDataset& dataset, const std::string& evaluator,
                  const std::filesystem::path& path);

/// Writes `contents` to `path`, throwing kIo on failure.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace cvwin
