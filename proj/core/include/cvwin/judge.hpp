/// @file judge.hpp
/// @brief Pairwise LLM-as-a-judge client for producing synthetic (or strong
/// reference) preferences from a chat-completion endpoint.

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cvwin {

struct JudgeConfig {
    /// Full URL of the chat-completions route, e.g.
    /// https://api.example.com/v1/chat/completions
    std::string endpoint;
    std::string model;
    /// Environment variable holding the bearer token; empty disables auth.
    std::string token_env;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    int max_concurrency = 4;
    std::string template_id = "pair-v2";
    /// First retry delay; doubles on every further attempt.
    std::chrono::milliseconds backoff_base{500};

    /// Throws kConfiguration on invalid values.
    void validate() const;
};

enum class Outcome { kLeftWins, kRightWins, kTie, kUnparseable };

std::string_view to_string(Outcome outcome);

struct JudgeVerdict {
    std::string record_key;
    Outcome outcome = Outcome::kUnparseable;
    std::string raw_text;
    std::chrono::milliseconds latency{0};
};

struct RenderedPrompt {
    std::string system;
    std::string user;

    /// System and user parts joined by a blank line.
    std::string text() const;
};

/// Known template ids: "pair-v2" (single-turn pairwise comparison with the
/// [[A]] / [[B]] / [[C]] verdict convention). Throws kConfiguration for
/// unknown ids and kInputDomain for empty inputs.
RenderedPrompt render_prompt(std::string_view template_id, std::string_view question,
                             std::string_view answer_left, std::string_view answer_right);

/// Last [[A]] / [[B]] / [[C]] marker in `response`; kUnparseable when none.
Outcome parse_verdict(std::string_view response);

/// Preference of the left answer for a parsed outcome (1, 0 or 0.5).
std::optional<double> outcome_preference(Outcome outcome);

/// One comparison with its response text, in the orientation it is judged:
/// answer_a fills the first slot of the prompt.
struct ResponseRecord {
    std::string question_id;
    std::string model_a;
    std::string model_b;
    std::string question;
    std::string answer_a;
    std::string answer_b;

    std::string key() const;
};

/// JSONL with fields question_id, model_a, model_b, question, answer_a,
/// answer_b. Throws kCorruptDataset on malformed lines and on duplicate keys.
std::vector<ResponseRecord> load_responses(const std::filesystem::path& path);

struct AnnotateOptions {
    /// Scores file; existing entries are kept and their records not re-queried.
    std::filesystem::path scores_path;
    std::filesystem::path audit_log_path;
    std::filesystem::path skip_report_path;
    /// Evaluator tag written to every score row; defaults to the model name.
    std::string evaluator;
    /// Stop after this many new queries (the rest stay pending).
    std::optional<std::size_t> limit;
};

struct SkipEntry {
    std::string record_key;
    std::string reason;
};

struct AnnotateSummary {
    std::size_t total = 0;
    std::size_t already_scored = 0;
    std::size_t scored = 0;  // includes already_scored
    std::size_t skipped = 0;
    std::size_t pending = 0;  // left unqueried because of `limit`
    std::vector<SkipEntry> skips;
};

/// Queries the judge for every record not yet in the scores file, with at
/// most `max_concurrency` requests in flight. Unparseable answers and
/// requests that exhaust their retries are skipped, never fatal; an auth
/// rejection (HTTP 401/403) or a missing token aborts with kAuth. On return
/// the scores file is rewritten sorted by record key.
AnnotateSummary annotate_dataset(std::span<const ResponseRecord> records,
                                 const JudgeConfig& config, const AnnotateOptions& options);

}  // namespace cvwin
