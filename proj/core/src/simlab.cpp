/// @file simlab.cpp

#include "cvwin/simlab.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cvwin/errors.hpp"
#include "cvwin/rng.hpp"

namespace cvwin {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::kConfiguration, what);
}

}  // namespace

void validate(const MixtureAnnotatorConfig& c) {
    require(c.p > 0.0 && c.p < 1.0, "p must lie in (0, 1)");
    require(c.lambda >= 0.0 && c.lambda <= 1.0, "lambda must lie in [0, 1]");
    require(c.tie_rate >= 0.0 && c.tie_rate < 1.0, "tie_rate must lie in [0, 1)");
    require(c.n >= 1, "n must be >= 1");
    if (c.p_synthetic) {
        require(*c.p_synthetic > 0.0 && *c.p_synthetic < 1.0, "p_synthetic must lie in (0, 1)");
    }
    require(!c.left.empty() && !c.right.empty() && c.left != c.right,
            "generator names must be non-empty and distinct");
}

PairDataset generate(const MixtureAnnotatorConfig& config) {
    validate(config);
    const double q = config.p_synthetic.value_or(config.p);
    Xoshiro256StarStar rng(config.seed);

    GeneratorId left(config.left);
    GeneratorId right(config.right);
    std::vector<ComparisonRecord> records;
    records.reserve(config.n);
    char id[32];
    for (std::size_t i = 0; i < config.n; ++i) {
        // Four draws per record regardless of branch keeps streams aligned
        // across configurations.
        const bool win = rng.bernoulli(config.p);
        const bool copy = rng.bernoulli(config.lambda);
        const bool independent = rng.bernoulli(q);
        const bool tie = rng.bernoulli(config.tie_rate);

        const double z = win ? 1.0 : 0.0;
        const double zhat = copy ? z : (independent ? 1.0 : 0.0);
        std::snprintf(id, sizeof(id), "q%06zu", i);
        records.push_back({id, left, right, PreferenceLabel::reference(tie ? 0.5 : z),
                           PreferenceLabel::synthetic(zhat), std::nullopt});
    }
    return {GeneratorPair(left, right), std::move(records)};
}

ExactMoments exact_moments(const MixtureAnnotatorConfig& config) {
    validate(config);
    if (config.tie_rate != 0.0) {
        throw Error(ErrorKind::kNoClosedForm, "closed-form moments require tie_rate = 0");
    }
    const double p = config.p;
    const double q = config.p_synthetic.value_or(p);
    const double lambda = config.lambda;

    ExactMoments m;
    m.mean_z = p;
    m.var_z = p * (1.0 - p);
    m.mean_zhat = lambda * p + (1.0 - lambda) * q;
    m.var_zhat = m.mean_zhat * (1.0 - m.mean_zhat);
    // E[z zhat] = lambda p + (1 - lambda) p q.
    m.cov_z_zhat = lambda * p + (1.0 - lambda) * p * q - m.mean_z * m.mean_zhat;
    m.rho = m.cov_z_zhat / std::sqrt(m.var_z * m.var_zhat);
    m.alpha_star = m.cov_z_zhat / m.var_zhat;
    return m;
}

}  // namespace cvwin
