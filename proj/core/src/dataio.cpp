/// @file dataio.cpp

#include "cvwin/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "cvwin/errors.hpp"

namespace cvwin {

using json = nlohmann::ordered_json;

namespace {

bool is_blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string id_field(const json& obj, const char* key) {
    if (!obj.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
    const auto& v = obj.at(key);
    std::string out;
    if (v.is_string()) {
        out = v.get<std::string>();
    } else if (v.is_number_integer()) {
        out = v.dump();
    } else {
        throw std::invalid_argument(std::string("field '") + key + "' must be a string or integer");
    }
    if (out.empty()) throw std::invalid_argument(std::string("field '") + key + "' is empty");
    return out;
}

std::optional<double> number_field(const json& obj, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw std::invalid_argument(std::string("field '") + key + "' must be numeric");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw std::invalid_argument(std::string("field '") + key + "' is not finite");
    return d;
}

Winner parse_winner(const std::string& w) {
    if (w == "model_a") return Winner::kModelA;
    if (w == "model_b") return Winner::kModelB;
    if (w == "tie" || w == "tie (bothbad)" || w == "tie_bothbad") return Winner::kTie;
    throw std::invalid_argument("unknown winner '" + w + "'");
}

Verdict to_verdict(Winner w) {
    switch (w) {
        case Winner::kModelA: return Verdict::kLeftWins;
        case Winner::kModelB: return Verdict::kRightWins;
        case Winner::kTie: break;
    }
    return Verdict::kTie;
}

RawAnnotationRow parse_annotation_line(const std::string& line, std::size_t line_no) {
    const json obj = json::parse(line);
    if (!obj.is_object()) throw std::invalid_argument("line is not a JSON object");
    RawAnnotationRow row;
    row.question_id = id_field(obj, "question_id");
    row.model_a = id_field(obj, "model_a");
    row.model_b = id_field(obj, "model_b");
    if (row.model_a == row.model_b) throw std::invalid_argument("model_a equals model_b");
    if (!obj.contains("winner") || !obj.at("winner").is_string()) {
        throw std::invalid_argument("missing string field 'winner'");
    }
    row.winner = parse_winner(obj.at("winner").get<std::string>());
    if (obj.contains("judge") && obj.at("judge").is_string()) {
        row.judge = obj.at("judge").get<std::string>();
    }
    row.line = line_no;
    return row;
}

ScoreRow parse_score_line(const std::string& line, std::size_t line_no) {
    const json obj = json::parse(line);
    if (!obj.is_object()) throw std::invalid_argument("line is not a JSON object");
    ScoreRow row;
    row.question_id = id_field(obj, "question_id");
    row.model_a = id_field(obj, "model_a");
    row.model_b = id_field(obj, "model_b");
    if (row.model_a == row.model_b) throw std::invalid_argument("model_a equals model_b");
    const auto ra = number_field(obj, "reward_a");
    const auto rb = number_field(obj, "reward_b");
    row.preference = number_field(obj, "preference");
    if (ra.has_value() != rb.has_value()) {
        throw std::invalid_argument("reward_a and reward_b must appear together");
    }
    if (ra) row.rewards = RewardPair{*ra, *rb};
    if (row.rewards.has_value() == row.preference.has_value()) {
        throw std::invalid_argument("exactly one of (reward_a, reward_b) or preference is required");
    }
    if (row.preference && (*row.preference < 0.0 || *row.preference > 1.0)) {
        throw std::invalid_argument("preference must lie in [0, 1]");
    }
    if (obj.contains("evaluator") && obj.at("evaluator").is_string()) {
        row.evaluator = obj.at("evaluator").get<std::string>();
    }
    row.line = line_no;
    return row;
}

template <typename Row, typename Parse>
LoadResult<Row> stream_lines(const std::filesystem::path& path, Parse parse,
                             const std::function<void(Row&&)>& sink) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");

    LoadResult<Row> result;
    std::string line;
    std::size_t line_no = 0;
    std::size_t non_blank = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        ++non_blank;
        try {
            sink(parse(line, line_no));
        } catch (const std::exception& e) {
            result.rejects.push_back({line_no, e.what()});
        }
    }
    if (in.bad()) throw Error(ErrorKind::kIo, "read error on '" + path.string() + "'");
    if (non_blank == 0) result.warnings.push_back("'" + path.string() + "' contains no records");
    if (result.rejects.size() * 2 > non_blank) {
        throw Error(ErrorKind::kCorruptDataset,
                    "'" + path.string() + "': " + std::to_string(result.rejects.size()) + " of " +
                        std::to_string(non_blank) + " lines are malformed (first at line " +
                        std::to_string(result.rejects.front().line) + ": " +
                        result.rejects.front().reason + ")");
    }
    return result;
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_real(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters in '" + s + "'");
    return v;
}

template <typename Fn>
auto parse_or_throw(const char* what, Fn fn) {
    try {
        return fn();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::kCorruptDataset, std::string("malformed ") + what + ": " + e.what());
    }
}

json pair_json(const GeneratorPair& pair) {
    json j;
    j["left"] = pair.left.name();
    j["right"] = pair.right.name();
    return j;
}

GeneratorPair pair_from_json(const json& j) {
    return {GeneratorId(j.at("left").get<std::string>()),
            GeneratorId(j.at("right").get<std::string>())};
}

// Content key used to order records independently of input order.
auto record_key(const ComparisonRecord& r) {
    const double z = r.reference_label ? r.reference_label->value() : -1.0;
    const double zh = r.synthetic_score ? r.synthetic_score->value() : -1.0;
    const double ra = r.raw_rewards ? r.raw_rewards->left : 0.0;
    const double rb = r.raw_rewards ? r.raw_rewards->right : 0.0;
    return std::make_tuple(std::cref(r.prompt_id), z, zh, r.raw_rewards.has_value(), ra, rb);
}

}  // namespace

double ScoreRow::preference_value() const {
    if (preference) return *preference;
    if (rewards) return bt_preference(rewards->left, rewards->right).value();
    throw Error(ErrorKind::kInputDomain, "score row carries neither preference nor rewards");
}

AnnotationLoad stream_annotations(const std::filesystem::path& path,
                                  const std::function<void(RawAnnotationRow&&)>& sink) {
    return stream_lines<RawAnnotationRow>(path, parse_annotation_line, sink);
}

AnnotationLoad load_annotations(const std::filesystem::path& path) {
    std::vector<RawAnnotationRow> rows;
    auto result = stream_annotations(path, [&](RawAnnotationRow&& r) { rows.push_back(std::move(r)); });
    result.rows = std::move(rows);
    return result;
}

ScoreLoad stream_scores(const std::filesystem::path& path,
                        const std::function<void(ScoreRow&&)>& sink) {
    return stream_lines<ScoreRow>(path, parse_score_line, sink);
}

ScoreLoad load_scores(const std::filesystem::path& path) {
    std::vector<ScoreRow> rows;
    auto result = stream_scores(path, [&](ScoreRow&& r) { rows.push_back(std::move(r)); });
    result.rows = std::move(rows);
    return result;
}

std::vector<PairDataset> join_scores(std::span<const RawAnnotationRow> annotations,
                                     std::span<const ScoreRow> scores) {
    struct OrientedScore {
        double preference;  // P(canonical left wins)
        std::optional<RewardPair> rewards;
        std::size_t line;
        bool used = false;
    };
    using Key = std::pair<std::string, GeneratorPair>;

    std::map<Key, OrientedScore> score_index;
    std::vector<std::string> conflicts;
    for (const auto& s : scores) {
        const GeneratorId a(s.model_a);
        const GeneratorId b(s.model_b);
        const auto pair = GeneratorPair::canonical(a, b);
        const bool flipped = pair.left != a;
        OrientedScore os;
        os.preference = flipped ? 1.0 - s.preference_value() : s.preference_value();
        if (s.rewards) {
            os.rewards = flipped ? RewardPair{s.rewards->right, s.rewards->left} : *s.rewards;
        }
        os.line = s.line;
        Key key{s.question_id, pair};
        auto [it, inserted] = score_index.emplace(key, os);
        if (!inserted && std::abs(it->second.preference - os.preference) > 1e-12) {
            conflicts.push_back("question '" + s.question_id + "' (" + pair.to_string() +
                                ") at lines " + std::to_string(it->second.line) + " and " +
                                std::to_string(s.line));
        }
    }
    if (!conflicts.empty()) {
        std::string msg = std::to_string(conflicts.size()) + " conflicting score key(s):";
        for (const auto& c : conflicts) msg += "\n  " + c;
        throw Error(ErrorKind::kAmbiguousJoin, msg);
    }

    std::map<GeneratorPair, std::vector<ComparisonRecord>> grouped;
    for (const auto& a : annotations) {
        const GeneratorId left(a.model_a);
        const GeneratorId right(a.model_b);
        const auto pair = GeneratorPair::canonical(left, right);
        ComparisonRecord record{a.question_id, left, right,
                                label_from_verdict(to_verdict(a.winner)), std::nullopt,
                                std::nullopt};
        auto it = score_index.find({a.question_id, pair});
        if (it != score_index.end()) {
            it->second.used = true;
            record = normalize_orientation(record, pair);
            record.synthetic_score = PreferenceLabel::synthetic(it->second.preference);
            record.raw_rewards = it->second.rewards;
            if (record.raw_rewards) {
                record.synthetic_score =
                    bt_preference(record.raw_rewards->left, record.raw_rewards->right);
            }
        }
        grouped[pair].push_back(std::move(record));
    }
    for (const auto& [key, os] : score_index) {
        if (os.used) continue;
        ComparisonRecord record{key.first, key.second.left, key.second.right, std::nullopt,
                                PreferenceLabel::synthetic(os.preference), os.rewards};
        if (os.rewards) record.synthetic_score = bt_preference(os.rewards->left, os.rewards->right);
        grouped[key.second].push_back(std::move(record));
    }

    std::vector<PairDataset> out;
    for (auto& [pair, records] : grouped) {
        PairDataset oriented(pair, std::move(records));
        auto sorted = oriented.records();
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto& x, const auto& y) { return record_key(x) < record_key(y); });
        out.emplace_back(pair, std::move(sorted));
    }
    return out;
}

std::optional<PairDataset> find_pair(std::span<const PairDataset> datasets, const std::string& a,
                                     const std::string& b) {
    const GeneratorPair wanted{GeneratorId(a), GeneratorId(b)};
    for (const auto& d : datasets) {
        if (d.pair() == wanted) return d;
        if (d.pair() == wanted.swapped()) return d.swapped();
    }
    return std::nullopt;
}

double canonical_real(double value) {
    if (!std::isfinite(value)) {
        throw Error(ErrorKind::kInputDomain, "cannot serialize a non-finite number");
    }
    return std::stod(format_real(value));
}

std::string serialize_report(const EstimateDocument& doc) {
    const auto& r = doc.report;
    json j;
    j["method"] = std::string(to_string(r.method));
    if (doc.pair) j["pair"] = pair_json(*doc.pair);
    j["win_rate"] = canonical_real(r.win_rate);
    j["win_rate_clamped"] = canonical_real(r.win_rate_clamped);
    j["k"] = r.k;
    j["n"] = r.n;
    if (r.params) {
        json p;
        p["alpha"] = canonical_real(r.params->alpha);
        p["mu_hat_z"] = canonical_real(r.params->mu_hat_z);
        p["alpha_fallback_used"] = r.params->alpha_fallback_used;
        j["params"] = p;
    } else {
        j["params"] = nullptr;
    }
    j["se_estimate"] = canonical_real(r.se_estimate);
    if (doc.sampling) j["sampling"] = *doc.sampling;
    if (doc.seed) j["seed"] = *doc.seed;
    return j.dump(2) + "\n";
}

EstimateDocument parse_report(const std::string& text) {
    return parse_or_throw("report", [&] {
        const json j = json::parse(text);
        EstimateDocument doc;
        auto& r = doc.report;
        r.method = parse_method(j.at("method").get<std::string>());
        if (j.contains("pair")) doc.pair = pair_from_json(j.at("pair"));
        r.win_rate = j.at("win_rate").get<double>();
        r.win_rate_clamped = j.at("win_rate_clamped").get<double>();
        r.k = j.at("k").get<std::size_t>();
        r.n = j.at("n").get<std::size_t>();
        if (!j.at("params").is_null()) {
            const auto& p = j.at("params");
            r.params = CvParameters{p.at("alpha").get<double>(), p.at("mu_hat_z").get<double>(),
                                    p.at("alpha_fallback_used").get<bool>()};
        }
        r.se_estimate = j.at("se_estimate").get<double>();
        if (j.contains("sampling")) doc.sampling = j.at("sampling").get<std::string>();
        if (j.contains("seed")) doc.seed = j.at("seed").get<std::uint64_t>();
        if (r.k > r.n || r.se_estimate < 0.0) {
            throw std::invalid_argument("report violates k <= n or se >= 0");
        }
        return doc;
    });
}

void write_report(const EstimateDocument& doc, const std::filesystem::path& path) {
    write_text_file(path, serialize_report(doc));
}

EstimateDocument read_report(const std::filesystem::path& path) {
    return parse_report(read_text_file(path));
}

std::string serialize_curve(const BootstrapCurve& curve) {
    validate(curve);
    std::string out = "method,k,mse,replicates\n";
    for (const auto& p : curve.points) {
        out += std::string(to_string(curve.method)) + "," + format_real(p.k) + "," +
               format_real(p.mse) + "," + std::to_string(curve.replicates) + "\n";
    }
    return out;
}

BootstrapCurve parse_curve(const std::string& text) {
    return parse_or_throw("curve", [&] {
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line) || line != "method,k,mse,replicates") {
            throw std::invalid_argument("missing header 'method,k,mse,replicates'");
        }
        BootstrapCurve curve;
        bool first = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = split_csv(line);
            if (cells.size() != 4) throw std::invalid_argument("expected 4 columns: " + line);
            const auto method = parse_curve_method(cells[0]);
            const auto replicates = static_cast<std::size_t>(std::stoull(cells[3]));
            if (first) {
                curve.method = method;
                curve.replicates = replicates;
                first = false;
            } else if (method != curve.method || replicates != curve.replicates) {
                throw std::invalid_argument("mixed methods or replicate counts in one curve");
            }
            curve.points.push_back({parse_real(cells[1]), parse_real(cells[2]), 0});
        }
        validate(curve);
        return curve;
    });
}

void write_curve(const BootstrapCurve& curve, const std::filesystem::path& path) {
    write_text_file(path, serialize_curve(curve));
}

BootstrapCurve read_curve(const std::filesystem::path& path) {
    return parse_curve(read_text_file(path));
}

std::string serialize_aggregate(const PairAggregate& agg) {
    json j;
    j["average_saving"] = canonical_real(agg.average_saving);
    j["min_annotations"] = agg.min_annotations_filter;
    j["weighted"] = agg.weighted;
    json pairs = json::array();
    for (const auto& p : agg.per_pair) {
        json e = pair_json(p.pair);
        e["annotations"] = p.annotations;
        e["rho"] = canonical_real(p.saving.rho);
        e["saving_ratio"] = canonical_real(p.saving.saving_ratio);
        e["k_used"] = p.saving.k_used;
        pairs.push_back(e);
    }
    j["pairs"] = pairs;
    json excluded = json::array();
    for (const auto& x : agg.excluded) {
        json e = pair_json(x.pair);
        e["annotations"] = x.annotations;
        e["reason"] = x.reason;
        excluded.push_back(e);
    }
    j["excluded"] = excluded;
    return j.dump(2) + "\n";
}

PairAggregate parse_aggregate(const std::string& text) {
    return parse_or_throw("aggregate", [&] {
        const json j = json::parse(text);
        PairAggregate agg;
        agg.average_saving = j.at("average_saving").get<double>();
        agg.min_annotations_filter = j.at("min_annotations").get<std::size_t>();
        agg.weighted = j.at("weighted").get<bool>();
        for (const auto& e : j.at("pairs")) {
            agg.per_pair.push_back({pair_from_json(e),
                                    SavingReport{e.at("rho").get<double>(),
                                                 e.at("saving_ratio").get<double>(),
                                                 e.at("k_used").get<std::size_t>()},
                                    e.at("annotations").get<std::size_t>()});
        }
        for (const auto& e : j.at("excluded")) {
            agg.excluded.push_back({pair_from_json(e), e.at("annotations").get<std::size_t>(),
                                    e.at("reason").get<std::string>()});
        }
        return agg;
    });
}

void write_aggregate(const PairAggregate& aggregate, const std::filesystem::path& path) {
    write_text_file(path, serialize_aggregate(aggregate));
}

void write_saving_matrix(const PairAggregate& agg, const std::filesystem::path& path) {
    struct Row {
        GeneratorPair pair;
        std::string text;
    };
    std::vector<Row> rows;
    for (const auto& p : agg.per_pair) {
        rows.push_back({p.pair, p.pair.left.name() + "," + p.pair.right.name() + "," +
                                    std::to_string(p.annotations) + "," +
                                    format_real(p.saving.rho) + "," +
                                    format_real(p.saving.saving_ratio) + ",included"});
    }
    for (const auto& x : agg.excluded) {
        rows.push_back({x.pair, x.pair.left.name() + "," + x.pair.right.name() + "," +
                                    std::to_string(x.annotations) + ",,,excluded"});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.pair < b.pair; });
    std::string out = "left,right,annotations,rho,saving_ratio,status\n";
    for (const auto& r : rows) out += r.text + "\n";
    write_text_file(path, out);
}

void write_rejects(std::span<const RejectedLine> rejects, const std::filesystem::path& path) {
    std::string out;
    for (const auto& r : rejects) {
        json j;
        j["line"] = r.line;
        j["reason"] = r.reason;
        out += j.dump() + "\n";
    }
    write_text_file(path, out);
}

void write_annotations(const PairDataset& dataset, const std::filesystem::path& path) {
    std::string out;
    for (const auto& r : dataset.records()) {
        if (!r.reference_label) continue;
        const double z = r.reference_label->value();
        json j;
        j["question_id"] = r.prompt_id;
        j["model_a"] = r.left.name();
        j["model_b"] = r.right.name();
        j["winner"] = z == 1.0 ? "model_a" : (z == 0.0 ? "model_b" : "tie");
        out += j.dump() + "\n";
    }
    write_text_file(path, out);
}

void write_scores(const PairDataset& dataset, const std::string& evaluator,
                  const std::filesystem::path& path) {
    std::string out;
    for (const auto& r : dataset.records()) {
        if (!r.synthetic_score) continue;
        json j;
        j["question_id"] = r.prompt_id;
        j["model_a"] = r.left.name();
        j["model_b"] = r.right.name();
        if (r.raw_rewards) {
            j["reward_a"] = r.raw_rewards->left;
            j["reward_b"] = r.raw_rewards->right;
        } else {
            j["preference"] = r.synthetic_score->value();
        }
        j["evaluator"] = evaluator;
        out += j.dump() + "\n";
    }
    write_text_file(path, out);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
    out << contents;
    out.close();
    if (!out) throw Error(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cvwin
