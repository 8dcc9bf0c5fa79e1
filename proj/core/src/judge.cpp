/// @file judge.cpp

#include "cvwin/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cvwin/dataio.hpp"
#include "cvwin/errors.hpp"

namespace cvwin {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

// Single-turn pairwise template of the MT-bench judge ("pair-v2").
constexpr std::string_view kPairV2System =
    "Please act as an impartial judge and evaluate the quality of the responses provided by two "
    "AI assistants to the user question displayed below. You should choose the assistant that "
    "follows the user's instructions and answers the user's question better. Your evaluation "
    "should consider factors such as the helpfulness, relevance, accuracy, depth, creativity, "
    "and level of detail of their responses. Begin your evaluation by comparing the two "
    "responses and provide a short explanation. Avoid any position biases and ensure that the "
    "order in which the responses were presented does not influence your decision. Do not allow "
    "the length of the responses to influence your evaluation. Do not favor certain names of the "
    "assistants. Be as objective as possible. After providing your explanation, output your "
    "final verdict by strictly following this format: \"[[A]]\" if assistant A is better, "
    "\"[[B]]\" if assistant B is better, and \"[[C]]\" for a tie.";

constexpr std::size_t kAuditTextLimit = 200;

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint parse_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) {
        throw Error(ErrorKind::kConfiguration, "endpoint '" + url + "' is not an http(s) URL");
    }
    return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

std::string truncate(const std::string& text, std::size_t limit) {
    if (text.size() <= limit) return text;
    return text.substr(0, limit) + "...";
}

std::string require_string(const json& obj, const char* key) {
    if (!obj.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
    const auto& v = obj.at(key);
    if (v.is_number_integer()) return v.dump();
    return v.get<std::string>();
}

enum class AttemptStatus { kOk, kTransient, kPermanent, kAuth };

struct Attempt {
    AttemptStatus status = AttemptStatus::kTransient;
    std::string content;
    std::string detail;
};

class JudgeClient {
public:
    JudgeClient(const JudgeConfig& config, const Endpoint& endpoint, std::string token)
        : config_(config), endpoint_(endpoint), client_(endpoint.origin) {
        const auto secs = config.timeout.count() / 1000;
        const auto usecs = (config.timeout.count() % 1000) * 1000;
        client_.set_connection_timeout(secs, usecs);
        client_.set_read_timeout(secs, usecs);
        client_.set_write_timeout(secs, usecs);
        if (!token.empty()) client_.set_bearer_token_auth(token);
    }

    Attempt send(const RenderedPrompt& prompt) {
        json body;
        body["model"] = config_.model;
        body["messages"] = json::array({json{{"role", "system"}, {"content", prompt.system}},
                                        json{{"role", "user"}, {"content", prompt.user}}});
        body["temperature"] = 0;
        auto res = client_.Post(endpoint_.path, body.dump(), "application/json");
        if (!res) return {AttemptStatus::kTransient, "", httplib::to_string(res.error())};
        if (res->status == 401 || res->status == 403) {
            return {AttemptStatus::kAuth, "", "HTTP " + std::to_string(res->status)};
        }
        if (res->status == 429 || res->status >= 500) {
            return {AttemptStatus::kTransient, "", "HTTP " + std::to_string(res->status)};
        }
        if (res->status != 200) {
            return {AttemptStatus::kPermanent, "", "HTTP " + std::to_string(res->status)};
        }
        try {
            const json reply = json::parse(res->body);
            return {AttemptStatus::kOk,
                    reply.at("choices").at(0).at("message").at("content").get<std::string>(), ""};
        } catch (const std::exception& e) {
            return {AttemptStatus::kPermanent, truncate(res->body, kAuditTextLimit),
                    std::string("malformed completion body: ") + e.what()};
        }
    }

private:
    const JudgeConfig& config_;
    const Endpoint& endpoint_;
    httplib::Client client_;
};

std::string score_line(const ResponseRecord& r, double preference, const std::string& evaluator) {
    json j;
    j["question_id"] = r.question_id;
    j["model_a"] = r.model_a;
    j["model_b"] = r.model_b;
    j["preference"] = preference;
    j["evaluator"] = evaluator;
    return j.dump();
}

std::string key_of(const std::string& qid, const std::string& a, const std::string& b) {
    return qid + "|" + a + "|" + b;
}

// Existing score lines by record key, kept verbatim.
std::map<std::string, std::string> read_existing_scores(const std::filesystem::path& path) {
    std::map<std::string, std::string> lines;
    if (path.empty() || !std::filesystem::exists(path)) return lines;
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            lines[key_of(require_string(j, "question_id"), require_string(j, "model_a"),
                         require_string(j, "model_b"))] = line;
        } catch (const std::exception& e) {
            throw Error(ErrorKind::kCorruptDataset, "'" + path.string() + "' line " +
                                                        std::to_string(line_no) + ": " + e.what());
        }
    }
    return lines;
}

}  // namespace

void JudgeConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::kConfiguration, what); };
    if (endpoint.empty()) fail("judge endpoint is required");
    parse_endpoint(endpoint);
    if (model.empty()) fail("judge model name is required");
    if (timeout.count() <= 0) fail("judge timeout must be > 0");
    if (max_retries < 0) fail("max retries must be >= 0");
    if (max_concurrency < 1) fail("max concurrency must be >= 1");
    if (backoff_base.count() < 0) fail("backoff must be >= 0");
    render_prompt(template_id, "q", "a", "b");
}

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::kLeftWins: return "left_wins";
        case Outcome::kRightWins: return "right_wins";
        case Outcome::kTie: return "tie";
        case Outcome::kUnparseable: return "unparseable";
    }
    return "unparseable";
}

std::string RenderedPrompt::text() const { return system + "\n\n" + user; }

RenderedPrompt render_prompt(std::string_view template_id, std::string_view question,
                             std::string_view answer_left, std::string_view answer_right) {
    if (template_id != "pair-v2") {
        throw Error(ErrorKind::kConfiguration, "unknown prompt template '" +
                                                   std::string(template_id) + "'");
    }
    if (question.empty() || answer_left.empty() || answer_right.empty()) {
        throw Error(ErrorKind::kInputDomain, "question and both answers must be non-empty");
    }
    RenderedPrompt p;
    p.system = std::string(kPairV2System);
    p.user.reserve(question.size() + answer_left.size() + answer_right.size() + 200);
    p.user += "[User Question]\n";
    p.user += question;
    p.user += "\n\n[The Start of Assistant A's Answer]\n";
    p.user += answer_left;
    p.user += "\n[The End of Assistant A's Answer]\n\n[The Start of Assistant B's Answer]\n";
    p.user += answer_right;
    p.user += "\n[The End of Assistant B's Answer]";
    return p;
}

Outcome parse_verdict(std::string_view response) {
    Outcome found = Outcome::kUnparseable;
    std::size_t best = std::string_view::npos;
    for (auto [marker, outcome] : {std::pair{"[[A]]", Outcome::kLeftWins},
                                   std::pair{"[[B]]", Outcome::kRightWins},
                                   std::pair{"[[C]]", Outcome::kTie}}) {
        const auto pos = response.rfind(marker);
        if (pos != std::string_view::npos && (best == std::string_view::npos || pos > best)) {
            best = pos;
            found = outcome;
        }
    }
    return found;
}

std::optional<double> outcome_preference(Outcome outcome) {
    switch (outcome) {
        case Outcome::kLeftWins: return 1.0;
        case Outcome::kRightWins: return 0.0;
        case Outcome::kTie: return 0.5;
        case Outcome::kUnparseable: break;
    }
    return std::nullopt;
}

std::string ResponseRecord::key() const { return key_of(question_id, model_a, model_b); }

std::vector<ResponseRecord> load_responses(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
    std::vector<ResponseRecord> out;
    std::set<std::string> keys;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            ResponseRecord r{require_string(j, "question_id"), require_string(j, "model_a"),
                             require_string(j, "model_b"),     require_string(j, "question"),
                             require_string(j, "answer_a"),    require_string(j, "answer_b")};
            if (r.model_a == r.model_b) throw std::invalid_argument("model_a equals model_b");
            if (!keys.insert(r.key()).second) throw std::invalid_argument("duplicate record " + r.key());
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::kCorruptDataset, "'" + path.string() + "' line " +
                                                        std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

AnnotateSummary annotate_dataset(std::span<const ResponseRecord> records,
                                 const JudgeConfig& config, const AnnotateOptions& options) {
    config.validate();
    if (options.scores_path.empty()) {
        throw Error(ErrorKind::kConfiguration, "a scores output path is required");
    }
    std::string token;
    if (!config.token_env.empty()) {
        const char* value = std::getenv(config.token_env.c_str());
        if (value == nullptr || *value == '\0') {
            throw Error(ErrorKind::kAuth,
                        "environment variable " + config.token_env + " holding the judge token is unset");
        }
        token = value;
    }
    const Endpoint endpoint = parse_endpoint(config.endpoint);
    const std::string evaluator = options.evaluator.empty() ? config.model : options.evaluator;

    auto score_lines = read_existing_scores(options.scores_path);

    AnnotateSummary summary;
    summary.total = records.size();
    std::vector<const ResponseRecord*> pending;
    for (const auto& r : records) {
        if (score_lines.count(r.key())) {
            ++summary.already_scored;
        } else {
            pending.push_back(&r);
        }
    }
    std::sort(pending.begin(), pending.end(),
              [](const auto* a, const auto* b) { return a->key() < b->key(); });
    if (options.limit && pending.size() > *options.limit) {
        summary.pending = pending.size() - *options.limit;
        pending.resize(*options.limit);
    }

    std::ofstream scores_out(options.scores_path, std::ios::app);
    if (!scores_out) throw Error(ErrorKind::kIo, "cannot write '" + options.scores_path.string() + "'");
    std::ofstream audit_out;
    if (!options.audit_log_path.empty()) {
        audit_out.open(options.audit_log_path, std::ios::app);
        if (!audit_out) {
            throw Error(ErrorKind::kIo, "cannot write '" + options.audit_log_path.string() + "'");
        }
    }

    // Single writer: every state transition and file append goes through here.
    std::mutex writer;
    auto record_result = [&](const ResponseRecord& r, const JudgeVerdict& verdict,
                             const std::optional<std::string>& skip_reason) {
        std::lock_guard lock(writer);
        if (audit_out.is_open()) {
            json a;
            a["key"] = verdict.record_key;
            a["outcome"] = std::string(to_string(verdict.outcome));
            a["latency_ms"] = verdict.latency.count();
            a["raw"] = truncate(verdict.raw_text, kAuditTextLimit);
            if (skip_reason) a["skip_reason"] = *skip_reason;
            audit_out << a.dump() << '\n' << std::flush;
        }
        if (skip_reason) {
            summary.skips.push_back({r.key(), *skip_reason});
            return;
        }
        const auto line = score_line(r, *outcome_preference(verdict.outcome), evaluator);
        scores_out << line << '\n' << std::flush;
        score_lines[r.key()] = line;
    };

    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex error_mutex;
    std::optional<Error> fatal;

    auto worker = [&] {
        JudgeClient client(config, endpoint, token);
        while (!abort.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= pending.size()) return;
            const ResponseRecord& r = *pending[i];

            JudgeVerdict verdict;
            verdict.record_key = r.key();
            std::optional<std::string> skip_reason;
            const auto start = Clock::now();
            RenderedPrompt prompt;
            try {
                prompt = render_prompt(config.template_id, r.question, r.answer_a, r.answer_b);
            } catch (const Error& e) {
                record_result(r, verdict, std::string(e.what()));
                continue;
            }

            Attempt attempt;
            for (int tries = 0;; ++tries) {
                attempt = client.send(prompt);
                if (attempt.status != AttemptStatus::kTransient || tries >= config.max_retries ||
                    abort.load()) {
                    break;
                }
                std::this_thread::sleep_for(config.backoff_base * (1LL << std::min(tries, 20)));
            }
            verdict.latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);

            switch (attempt.status) {
                case AttemptStatus::kAuth: {
                    std::lock_guard lock(error_mutex);
                    if (!fatal) {
                        fatal.emplace(ErrorKind::kAuth, "judge endpoint rejected credentials (" +
                                                            attempt.detail + ")");
                    }
                    abort = true;
                    return;
                }
                case AttemptStatus::kTransient:
                    skip_reason = "retries exhausted: " + attempt.detail;
                    break;
                case AttemptStatus::kPermanent:
                    verdict.raw_text = attempt.content;
                    skip_reason = attempt.detail;
                    break;
                case AttemptStatus::kOk:
                    verdict.raw_text = attempt.content;
                    verdict.outcome = parse_verdict(attempt.content);
                    if (verdict.outcome == Outcome::kUnparseable) skip_reason = "no verdict marker";
                    break;
            }
            record_result(r, verdict, skip_reason);
        }
    };

    const auto threads = static_cast<std::size_t>(config.max_concurrency);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, std::max<std::size_t>(pending.size(), 1)); ++t) {
        pool.emplace_back(worker);
    }
    for (auto& th : pool) th.join();
    scores_out.close();

    // Canonical order so interrupted and uninterrupted runs end identical.
    std::string canonical;
    for (const auto& [key, line] : score_lines) canonical += line + "\n";
    write_text_file(options.scores_path, canonical);

    std::sort(summary.skips.begin(), summary.skips.end(),
              [](const SkipEntry& a, const SkipEntry& b) { return a.record_key < b.record_key; });
    if (!options.skip_report_path.empty()) {
        std::string skip_text;
        for (const auto& s : summary.skips) {
            json j;
            j["key"] = s.record_key;
            j["reason"] = s.reason;
            skip_text += j.dump() + "\n";
        }
        write_text_file(options.skip_report_path, skip_text);
    }

    if (fatal) throw *fatal;

    summary.skipped = summary.skips.size();
    std::set<std::string> requested;
    for (const auto& r : records) requested.insert(r.key());
    summary.scored = 0;
    for (const auto& [key, line] : score_lines) summary.scored += requested.count(key);
    return summary;
}

}  // namespace cvwin
