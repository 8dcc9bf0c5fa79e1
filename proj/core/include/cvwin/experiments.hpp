/// @file experiments.hpp
/// @brief Index sampling, bootstrap MSE curves, curve shifting and
/// cross-pair aggregation of saving ratios.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvwin/estimator.hpp"
#include "cvwin/prefcore.hpp"

namespace cvwin {

enum class SamplingMode { kWithReplacement, kWithoutReplacement };

std::string_view to_string(SamplingMode mode);
SamplingMode parse_sampling_mode(std::string_view name);

struct SamplingPlan {
    std::size_t k = 1;
    SamplingMode mode = SamplingMode::kWithoutReplacement;
    std::uint64_t seed = 0;
};

/// Deterministic in (n, plan). Without replacement yields a uniform k-subset
/// in uniform random order.
std::vector<std::size_t> sample_indices(std::size_t n, const SamplingPlan& plan);

enum class CurveMethod { kReferenceOnly, kControlVariates, kSyntheticOnly, kReferenceShifted };

std::string_view to_string(CurveMethod method);
CurveMethod parse_curve_method(std::string_view name);

struct CurvePoint {
    /// Annotation count. Integral except on reference_shifted curves.
    double k = 0.0;
    double mse = 0.0;
    /// Replicates whose alpha fell back to 0 (control variates only).
    std::size_t alpha_fallbacks = 0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct BootstrapCurve {
    CurveMethod method = CurveMethod::kReferenceOnly;
    std::vector<CurvePoint> points;
    std::size_t replicates = 0;

    friend bool operator==(const BootstrapCurve&, const BootstrapCurve&) = default;
};

/// Throws kInvalidCurve unless points are non-empty, strictly increasing in k
/// and have non-negative mse.
void validate(const BootstrapCurve& curve);

struct BootstrapOptions {
    std::size_t replicates = 1000;
    std::uint64_t seed = 0;
    /// Fixed alpha for control variates; estimated per replicate otherwise.
    std::optional<double> alpha_override;
    /// Worker threads; 0 picks the hardware concurrency.
    unsigned threads = 0;
};

struct BootstrapResult {
    double mse = 0.0;
    std::size_t alpha_fallbacks = 0;
};

/// One estimate per replicate, in replicate order. Replicate r samples k
/// indices with replacement from a stream seeded by derive_seed(seed, r), so
/// different methods run with the same seed see the same samples.
std::vector<double> replicate_estimates(const PairDataset& dataset, CurveMethod method,
                                        std::size_t k, const BootstrapOptions& options,
                                        std::size_t* alpha_fallbacks = nullptr);

/// Mean squared error against the full-dataset reference mean.
BootstrapResult bootstrap_mse(const PairDataset& dataset, CurveMethod method, std::size_t k,
                              const BootstrapOptions& options);

BootstrapCurve mse_curve(const PairDataset& dataset, CurveMethod method,
                         std::span<const std::size_t> k_grid, const BootstrapOptions& options);

/// Maps each (k, mse) of a reference_only curve to (k (1 - s), mse).
BootstrapCurve shift_curve(const BootstrapCurve& curve, double s);

/// Piecewise-linear interpolation of mse at k; throws kInvalidCurve outside
/// the curve's k range.
double interpolate_mse(const BootstrapCurve& curve, double k);

/// Reference-curve grid whose shift by s brackets every point of `k_grid`:
/// the grid itself plus floor and ceil of k / (1 - s) for each k.
std::vector<std::size_t> reference_grid_for_shift(std::span<const std::size_t> k_grid, double s);

struct OverlapPoint {
    double k = 0.0;
    double target_mse = 0.0;
    double shifted_mse = 0.0;
    /// |shifted - target| / target.
    double relative_gap = 0.0;
};

/// Compares a shifted reference curve with a target curve (normally control
/// variates) at the target's k values.
std::vector<OverlapPoint> curve_overlap(const BootstrapCurve& shifted,
                                        const BootstrapCurve& target);

/// Smallest grid k from which `curve` stays strictly below `baseline` at every
/// larger grid point. Both curves must share k values.
std::optional<double> crossover_k(const BootstrapCurve& curve, const BootstrapCurve& baseline);

/// Pointwise mean of curves sharing method and k grid.
BootstrapCurve average_curves(std::span<const BootstrapCurve> curves);

struct PairSaving {
    GeneratorPair pair;
    SavingReport saving;
    std::size_t annotations = 0;
};

struct ExcludedPair {
    GeneratorPair pair;
    std::size_t annotations = 0;
    std::string reason;
};

struct PairAggregate {
    std::vector<PairSaving> per_pair;  // sorted by pair
    std::vector<ExcludedPair> excluded;
    double average_saving = 0.0;
    std::size_t min_annotations_filter = 0;
    bool weighted = false;
};

/// Saving ratio of every pair with at least `min_annotations` co-annotated
/// records, and their mean (unweighted unless `weighted_by_n`). Pairs below
/// the threshold or with undefined correlation are listed as excluded.
PairAggregate aggregate_pairs(std::span<const PairDataset> datasets, std::size_t min_annotations,
                              bool weighted_by_n = false);

}  // namespace cvwin
