/// @file prefcore.cpp

#include "cvwin/prefcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "cvwin/errors.hpp"

namespace cvwin {

namespace {

constexpr double kSaturation = std::numeric_limits<double>::epsilon();

bool is_reference_value(double v) { return v == 0.0 || v == 0.5 || v == 1.0; }

}  // namespace

PreferenceLabel PreferenceLabel::reference(double value) {
    if (!is_reference_value(value)) {
        throw Error(ErrorKind::kInputDomain,
                    "reference label must be 0, 0.5 or 1, got " + std::to_string(value));
    }
    return {value, Kind::kReference};
}

PreferenceLabel PreferenceLabel::synthetic(double value) {
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
        throw Error(ErrorKind::kInputDomain,
                    "synthetic preference must lie in [0, 1], got " + std::to_string(value));
    }
    return {value, Kind::kSynthetic};
}

PreferenceLabel PreferenceLabel::complement() const noexcept { return {1.0 - value_, kind_}; }

GeneratorId::GeneratorId(std::string name) : name_(std::move(name)) {
    if (name_.empty()) throw Error(ErrorKind::kInputDomain, "generator id must be non-empty");
}

GeneratorPair::GeneratorPair(GeneratorId left_id, GeneratorId right_id)
    : left(std::move(left_id)), right(std::move(right_id)) {
    if (left == right) {
        throw Error(ErrorKind::kInputDomain,
                    "a comparison needs two distinct generators, got '" + left.name() + "' twice");
    }
}

GeneratorPair GeneratorPair::canonical(const GeneratorId& a, const GeneratorId& b) {
    return a < b ? GeneratorPair(a, b) : GeneratorPair(b, a);
}

void validate(const ComparisonRecord& record) {
    if (record.left == record.right) {
        throw Error(ErrorKind::kInputDomain,
                    "record '" + record.prompt_id + "' compares '" + record.left.name() +
                        "' with itself");
    }
    if (record.reference_label &&
        record.reference_label->kind() != PreferenceLabel::Kind::kReference) {
        throw Error(ErrorKind::kInputDomain,
                    "record '" + record.prompt_id + "' reference label has synthetic kind");
    }
    if (record.raw_rewards && record.synthetic_score) {
        const double expected =
            bt_preference(record.raw_rewards->left, record.raw_rewards->right).value();
        if (std::abs(expected - record.synthetic_score->value()) > 1e-12) {
            throw Error(ErrorKind::kInputDomain,
                        "record '" + record.prompt_id +
                            "' synthetic score disagrees with its rewards");
        }
    }
}

Verdict flip(Verdict verdict) noexcept {
    switch (verdict) {
        case Verdict::kLeftWins: return Verdict::kRightWins;
        case Verdict::kRightWins: return Verdict::kLeftWins;
        case Verdict::kTie: return Verdict::kTie;
    }
    return verdict;
}

PreferenceLabel bt_preference(double r1, double r2) {
    if (!std::isfinite(r1) || !std::isfinite(r2)) {
        throw Error(ErrorKind::kInputDomain, "rewards must be finite");
    }
    const double gap = r1 - r2;
    double p;
    if (gap >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-gap));
    } else {
        const double e = std::exp(gap);
        p = e / (1.0 + e);
    }
    return PreferenceLabel::synthetic(std::clamp(p, kSaturation, 1.0 - kSaturation));
}

ComparisonRecord normalize_orientation(const ComparisonRecord& record, const GeneratorPair& pair) {
    if (record.left == pair.left && record.right == pair.right) return record;
    if (record.left == pair.right && record.right == pair.left) {
        ComparisonRecord out = record;
        std::swap(out.left, out.right);
        if (out.reference_label) out.reference_label = out.reference_label->complement();
        if (out.synthetic_score) out.synthetic_score = out.synthetic_score->complement();
        if (out.raw_rewards) std::swap(out.raw_rewards->left, out.raw_rewards->right);
        return out;
    }
    throw Error(ErrorKind::kPairMismatch, "record '" + record.prompt_id + "' (" +
                                              record.left.name() + ", " + record.right.name() +
                                              ") does not belong to " + pair.to_string());
}

PreferenceLabel label_from_verdict(Verdict verdict) noexcept {
    switch (verdict) {
        case Verdict::kLeftWins: return PreferenceLabel::reference(1.0);
        case Verdict::kRightWins: return PreferenceLabel::reference(0.0);
        case Verdict::kTie: break;
    }
    return PreferenceLabel::reference(0.5);
}

PairDataset::PairDataset(GeneratorPair pair, std::vector<ComparisonRecord> records)
    : pair_(std::move(pair)), records_(std::move(records)) {
    for (auto& record : records_) {
        validate(record);
        record = normalize_orientation(record, pair_);
    }
}

std::size_t PairDataset::reference_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(
        records_.begin(), records_.end(), [](const auto& r) { return r.reference_label.has_value(); }));
}

std::size_t PairDataset::synthetic_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(
        records_.begin(), records_.end(), [](const auto& r) { return r.synthetic_score.has_value(); }));
}

PairDataset PairDataset::co_annotated() const {
    std::vector<ComparisonRecord> kept;
    for (const auto& r : records_) {
        if (r.reference_label && r.synthetic_score) kept.push_back(r);
    }
    return {pair_, std::move(kept)};
}

PairDataset PairDataset::swapped() const { return {pair_.swapped(), records_}; }

std::vector<double> PairDataset::reference_values() const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) {
        if (!r.reference_label) {
            throw Error(ErrorKind::kIncompleteSample,
                        "record '" + r.prompt_id + "' has no reference label");
        }
        out.push_back(r.reference_label->value());
    }
    return out;
}

std::vector<double> PairDataset::synthetic_values() const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) {
        if (!r.synthetic_score) {
            throw Error(ErrorKind::kIncompleteSyntheticCoverage,
                        "record '" + r.prompt_id + "' has no synthetic score");
        }
        out.push_back(r.synthetic_score->value());
    }
    return out;
}

}  // namespace cvwin
