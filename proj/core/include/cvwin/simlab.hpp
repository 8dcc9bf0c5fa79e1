/// @file simlab.hpp
/// @brief Preference data with analytically known moments.
///
/// Mixture annotator: z ~ Bernoulli(p); with probability lambda the synthetic
/// score copies z, otherwise it is an independent Bernoulli(q) draw (q = p by
/// default). With q = p and no ties, corr(z, zhat) = lambda exactly and the
/// optimal control-variates coefficient is lambda as well.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "cvwin/prefcore.hpp"

namespace cvwin {

struct MixtureAnnotatorConfig {
    double p = 0.5;
    double lambda = 0.0;
    double tie_rate = 0.0;
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    /// Win probability of the independent synthetic draw. Setting it away
    /// from p biases the synthetic win rate.
    std::optional<double> p_synthetic;
    std::string left = "sim_left";
    std::string right = "sim_right";
};

/// Throws kConfiguration on out-of-range fields.
void validate(const MixtureAnnotatorConfig& config);

/// Records are named q000000, q000001, ... in generation order.
PairDataset generate(const MixtureAnnotatorConfig& config);

struct ExactMoments {
    double mean_z = 0.0;
    double var_z = 0.0;
    double mean_zhat = 0.0;
    double var_zhat = 0.0;
    double cov_z_zhat = 0.0;
    double rho = 0.0;
    double alpha_star = 0.0;
};

/// Closed-form moments of the tie-free mixture; throws kNoClosedForm when
/// tie_rate != 0.
ExactMoments exact_moments(const MixtureAnnotatorConfig& config);

}  // namespace cvwin
