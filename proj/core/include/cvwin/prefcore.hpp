/// @file prefcore.hpp
/// @brief Pairwise preference domain types and label/score conversions.
///
/// Every label in this library means "probability that the left generator's
/// response wins". Datasets fix an ordered generator pair and normalize each
/// record on construction so that this reading holds everywhere downstream.

#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace cvwin {

/// A preference value in [0, 1].
///
/// Reference labels come from the trusted annotator (a human, or a strong judge
/// model standing in for one) and only take the values 0, 0.5 and 1. Synthetic
/// labels may take any value in [0, 1].
class PreferenceLabel {
public:
    enum class Kind { kReference, kSynthetic };

    static PreferenceLabel reference(double value);
    static PreferenceLabel synthetic(double value);

    double value() const noexcept { return value_; }
    Kind kind() const noexcept { return kind_; }

    /// The same judgement seen from the other side: v -> 1 - v.
    PreferenceLabel complement() const noexcept;

    friend bool operator==(const PreferenceLabel&, const PreferenceLabel&) = default;

private:
    PreferenceLabel(double value, Kind kind) noexcept : value_(value), kind_(kind) {}

    double value_;
    Kind kind_;
};

class GeneratorId {
public:
    explicit GeneratorId(std::string name);

    const std::string& name() const noexcept { return name_; }

    friend auto operator<=>(const GeneratorId&, const GeneratorId&) = default;

private:
    std::string name_;
};

/// Ordered pair (left, right) of distinct generators.
struct GeneratorPair {
    GeneratorPair(GeneratorId left_id, GeneratorId right_id);

    /// Lexicographic orientation of an unordered pair.
    static GeneratorPair canonical(const GeneratorId& a, const GeneratorId& b);

    GeneratorPair swapped() const { return {right, left}; }
    std::string to_string() const { return left.name() + " vs " + right.name(); }

    friend auto operator<=>(const GeneratorPair&, const GeneratorPair&) = default;

    GeneratorId left;
    GeneratorId right;
};

struct RewardPair {
    double left = 0.0;
    double right = 0.0;

    friend bool operator==(const RewardPair&, const RewardPair&) = default;
};

struct ComparisonRecord {
    std::string prompt_id;
    GeneratorId left;
    GeneratorId right;
    std::optional<PreferenceLabel> reference_label;
    std::optional<PreferenceLabel> synthetic_score;
    std::optional<RewardPair> raw_rewards;

    friend bool operator==(const ComparisonRecord&, const ComparisonRecord&) = default;
};

/// Throws kInputDomain when a record breaks its invariants (left == right,
/// label kinds wrong, or a synthetic score disagreeing with its rewards).
void validate(const ComparisonRecord& record);

enum class Verdict { kLeftWins, kRightWins, kTie };

Verdict flip(Verdict verdict) noexcept;

/// Bradley-Terry preference of reward r1 over reward r2: 1 / (1 + exp(r2 - r1)).
/// Saturates to [eps, 1 - eps] with eps the double machine epsilon.
PreferenceLabel bt_preference(double r1, double r2);

/// Re-expresses `record` in the orientation of `pair`. Flipping swaps the
/// generators and rewards and complements both labels; records already in
/// orientation are returned unchanged.
ComparisonRecord normalize_orientation(const ComparisonRecord& record, const GeneratorPair& pair);

PreferenceLabel label_from_verdict(Verdict verdict) noexcept;

/// All comparisons for one ordered generator pair.
class PairDataset {
public:
    /// Validates and orients every record; throws kPairMismatch for records
    /// about a different pair of generators.
    PairDataset(GeneratorPair pair, std::vector<ComparisonRecord> records);

    const GeneratorPair& pair() const noexcept { return pair_; }
    const std::vector<ComparisonRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    std::size_t reference_count() const noexcept;
    std::size_t synthetic_count() const noexcept;
    bool has_full_synthetic_coverage() const noexcept { return synthetic_count() == size(); }
    bool has_full_reference_coverage() const noexcept { return reference_count() == size(); }

    /// Records carrying both a reference label and a synthetic score.
    PairDataset co_annotated() const;

    /// Same comparisons seen from the swapped pair.
    PairDataset swapped() const;

    /// Reference label values in record order; throws kIncompleteSample if
    /// any record lacks one.
    std::vector<double> reference_values() const;
    /// Synthetic score values in record order; throws
    /// kIncompleteSyntheticCoverage if any record lacks one.
    std::vector<double> synthetic_values() const;

private:
    GeneratorPair pair_;
    std::vector<ComparisonRecord> records_;
};

}  // namespace cvwin
