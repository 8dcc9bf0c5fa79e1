/// @file estimator.cpp

#include "cvwin/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cvwin/errors.hpp"

namespace cvwin {

namespace {

double mean_of(std::span<const double> xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

bool is_constant(std::span<const double> xs) {
    return std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); });
}

// sqrt of the (k - 1) sample variance over k; 0 when k < 2.
double standard_error(std::span<const double> xs, double mean) {
    const std::size_t k = xs.size();
    if (k < 2) return 0.0;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(k - 1) / static_cast<double>(k));
}

void require_aligned(std::span<const double> z, std::span<const double> zhat) {
    if (z.size() != zhat.size()) {
        throw Error(ErrorKind::kAlignment, "reference and synthetic samples differ in length (" +
                                              std::to_string(z.size()) + " vs " +
                                              std::to_string(zhat.size()) + ")");
    }
}

}  // namespace

std::string_view to_string(Method method) {
    switch (method) {
        case Method::kReferenceOnly: return "reference_only";
        case Method::kSyntheticOnly: return "synthetic_only";
        case Method::kControlVariates: return "control_variates";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (Method m : {Method::kReferenceOnly, Method::kSyntheticOnly, Method::kControlVariates}) {
        if (name == to_string(m)) return m;
    }
    throw Error(ErrorKind::kConfiguration, "unknown method '" + std::string(name) + "'");
}

EstimateReport reference_mean(std::span<const double> labels) {
    if (labels.empty()) throw Error(ErrorKind::kEmptyDataset, "no reference labels");
    EstimateReport report;
    report.method = Method::kReferenceOnly;
    report.win_rate = mean_of(labels);
    report.win_rate_clamped = std::clamp(report.win_rate, 0.0, 1.0);
    report.k = labels.size();
    report.n = labels.size();
    report.se_estimate = standard_error(labels, report.win_rate);
    return report;
}

double synthetic_win_rate(const PairDataset& dataset) {
    if (dataset.empty()) throw Error(ErrorKind::kEmptyDataset, "dataset has no records");
    const auto zhat = dataset.synthetic_values();
    return mean_of(zhat);
}

EstimateReport synthetic_only_win_rate(const PairDataset& dataset) {
    EstimateReport report;
    report.method = Method::kSyntheticOnly;
    report.win_rate = synthetic_win_rate(dataset);
    report.win_rate_clamped = std::clamp(report.win_rate, 0.0, 1.0);
    report.k = 0;
    report.n = dataset.size();
    report.se_estimate = 0.0;
    return report;
}

AlphaEstimate estimate_alpha(std::span<const double> z, std::span<const double> zhat) {
    require_aligned(z, zhat);
    if (z.empty()) throw Error(ErrorKind::kEmptySample, "alpha needs at least one sample");
    if (z.size() < 2 || is_constant(zhat)) return {0.0, true};

    const double mz = mean_of(z);
    const double mzh = mean_of(zhat);
    double cov = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double dz = z[i] - mz;
        const double dzh = zhat[i] - mzh;
        cov += dz * dzh;
        var += dzh * dzh;
    }
    // Both sums carry the same 1/k normalization, which cancels.
    if (!(var > 0.0)) return {0.0, true};
    return {cov / var, false};
}

EstimateReport cv_estimate(std::span<const double> z, std::span<const double> zhat,
                           double mu_hat_z, std::optional<double> alpha_override,
                           std::size_t n) {
    require_aligned(z, zhat);
    if (z.empty()) throw Error(ErrorKind::kEmptySample, "control variates need a non-empty sample");
    if (alpha_override && !std::isfinite(*alpha_override)) {
        throw Error(ErrorKind::kInputDomain, "alpha override must be finite");
    }

    AlphaEstimate alpha = alpha_override ? AlphaEstimate{*alpha_override, false}
                                         : estimate_alpha(z, zhat);

    const double mean_z = mean_of(z);
    EstimateReport report;
    report.method = Method::kControlVariates;
    report.k = z.size();
    report.n = n;
    report.params = CvParameters{alpha.alpha, mu_hat_z, alpha.fallback_used};

    if (alpha.alpha == 0.0) {
        // Exactly the reference mean, including its standard error.
        report.win_rate = mean_z;
        report.se_estimate = standard_error(z, mean_z);
    } else {
        const double mean_zhat = mean_of(zhat);
        report.win_rate = mean_z - alpha.alpha * (mean_zhat - mu_hat_z);
        std::vector<double> adjusted(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
            adjusted[i] = z[i] - alpha.alpha * (zhat[i] - mu_hat_z);
        }
        report.se_estimate = standard_error(adjusted, mean_of(adjusted));
    }
    report.win_rate_clamped = std::clamp(report.win_rate, 0.0, 1.0);
    return report;
}

EstimateReport cv_win_rate(const PairDataset& dataset,
                           std::span<const std::size_t> sampled_indices,
                           std::optional<double> alpha_override) {
    if (sampled_indices.empty()) throw Error(ErrorKind::kEmptySample, "no sampled indices");
    const double mu = synthetic_win_rate(dataset);

    const auto& records = dataset.records();
    std::vector<double> z;
    std::vector<double> zhat;
    z.reserve(sampled_indices.size());
    zhat.reserve(sampled_indices.size());
    for (std::size_t idx : sampled_indices) {
        if (idx >= records.size()) {
            throw Error(ErrorKind::kIncompleteSample,
                        "index " + std::to_string(idx) + " out of range for " +
                            std::to_string(records.size()) + " records");
        }
        const auto& r = records[idx];
        if (!r.reference_label || !r.synthetic_score) {
            throw Error(ErrorKind::kIncompleteSample,
                        "sampled record '" + r.prompt_id + "' lacks a reference label or score");
        }
        z.push_back(r.reference_label->value());
        zhat.push_back(r.synthetic_score->value());
    }
    return cv_estimate(z, zhat, mu, alpha_override, dataset.size());
}

SavingReport saving_ratio(std::span<const double> z, std::span<const double> zhat) {
    require_aligned(z, zhat);
    if (z.size() < 2) {
        throw Error(ErrorKind::kUndefinedCorrelation, "correlation needs at least two samples");
    }
    if (is_constant(z) || is_constant(zhat)) {
        throw Error(ErrorKind::kUndefinedCorrelation,
                    std::string(is_constant(z) ? "reference" : "synthetic") +
                        " preferences are constant");
    }
    const double mz = mean_of(z);
    const double mzh = mean_of(zhat);
    double cov = 0.0;
    double vz = 0.0;
    double vzh = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double dz = z[i] - mz;
        const double dzh = zhat[i] - mzh;
        cov += dz * dzh;
        vz += dz * dz;
        vzh += dzh * dzh;
    }
    const double rho = std::clamp(cov / std::sqrt(vz * vzh), -1.0, 1.0);
    return {rho, rho * rho, z.size()};
}

}  // namespace cvwin
