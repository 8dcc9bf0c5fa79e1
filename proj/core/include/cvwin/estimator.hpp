/// @file estimator.hpp
/// @brief Win-rate estimators: reference mean, synthetic mean, control variates.
///
/// The control-variates estimate over a sample S of k reference-annotated
/// records is
///
///     mean_S(z) - alpha * (mean_S(zhat) - mu_zhat)
///
/// where mu_zhat is the synthetic mean over the whole dataset and alpha is
/// Cov_S(z, zhat) / Var_S(zhat) unless overridden. For any fixed alpha the
/// estimate is unbiased; alpha = Cov/Var minimizes its variance at
/// (1 - rho^2) Var(z) / k.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "cvwin/prefcore.hpp"

namespace cvwin {

enum class Method { kReferenceOnly, kSyntheticOnly, kControlVariates };

std::string_view to_string(Method method);
/// Throws kConfiguration for unknown names.
Method parse_method(std::string_view name);

struct CvParameters {
    double alpha = 0.0;
    double mu_hat_z = 0.0;
    bool alpha_fallback_used = false;

    friend bool operator==(const CvParameters&, const CvParameters&) = default;
};

struct AlphaEstimate {
    double alpha = 0.0;
    bool fallback_used = false;
};

struct EstimateReport {
    Method method = Method::kReferenceOnly;
    /// Raw estimate; the control-variates form can leave [0, 1].
    double win_rate = 0.0;
    /// win_rate clamped to [0, 1] for presentation.
    double win_rate_clamped = 0.0;
    std::size_t k = 0;
    std::size_t n = 0;
    std::optional<CvParameters> params;
    double se_estimate = 0.0;

    friend bool operator==(const EstimateReport&, const EstimateReport&) = default;
};

struct SavingReport {
    double rho = 0.0;
    double saving_ratio = 0.0;
    std::size_t k_used = 0;

    friend bool operator==(const SavingReport&, const SavingReport&) = default;
};

/// Plain mean of reference labels. se uses the (k - 1) sample variance.
EstimateReport reference_mean(std::span<const double> labels);

/// Mean synthetic score over all records of the dataset.
double synthetic_win_rate(const PairDataset& dataset);

EstimateReport synthetic_only_win_rate(const PairDataset& dataset);

/// Cov/Var ratio with population normalization on both sides. Falls back to
/// alpha = 0 when k < 2 or the synthetic sample is constant.
AlphaEstimate estimate_alpha(std::span<const double> z, std::span<const double> zhat);

/// Control-variates estimate on already-gathered aligned samples. `n` is the
/// dataset size recorded in the report.
EstimateReport cv_estimate(std::span<const double> z, std::span<const double> zhat,
                           double mu_hat_z, std::optional<double> alpha_override,
                           std::size_t n);

/// Control-variates estimate over the records at `sampled_indices`.
EstimateReport cv_win_rate(const PairDataset& dataset,
                           std::span<const std::size_t> sampled_indices,
                           std::optional<double> alpha_override = std::nullopt);

/// Pearson correlation and its square. Throws kUndefinedCorrelation when
/// either side is constant.
SavingReport saving_ratio(std::span<const double> z, std::span<const double> zhat);

}  // namespace cvwin
