#include <doctest.h>

#include <cmath>
#include <vector>

#include "cvwin/errors.hpp"
#include "cvwin/estimator.hpp"
#include "cvwin/simlab.hpp"
#include "oracles.hpp"

using namespace cvwin;

namespace {

bool throws_kind(ErrorKind kind, auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

// Brute-force expectation over the joint law of (z, zhat) in {0,1}^2.
struct Joint {
    double ez = 0, ezh = 0, ezz = 0, ezhzh = 0, ezzh = 0;
};

Joint brute_force(double p, double lambda, double q) {
    Joint j;
    for (int z = 0; z <= 1; ++z) {
        for (int zh = 0; zh <= 1; ++zh) {
            const double pz = z ? p : 1 - p;
            const double copy = (zh == z) ? lambda : 0.0;
            const double indep = (1 - lambda) * (zh ? q : 1 - q);
            const double w = pz * (copy + indep);
            j.ez += w * z;
            j.ezh += w * zh;
            j.ezz += w * z * z;
            j.ezhzh += w * zh * zh;
            j.ezzh += w * z * zh;
        }
    }
    return j;
}

}  // namespace

TEST_CASE("exact_moments examples") {
    const auto perfect = exact_moments({.p = 0.5, .lambda = 1.0});
    CHECK(perfect.rho == doctest::Approx(1.0));
    CHECK(perfect.alpha_star == doctest::Approx(1.0));

    const auto indep = exact_moments({.p = 0.5, .lambda = 0.0});
    CHECK(indep.cov_z_zhat == 0.0);
    CHECK(indep.rho == 0.0);

    const auto m = exact_moments({.p = 0.3, .lambda = 0.6});
    CHECK(m.var_z == doctest::Approx(0.21).epsilon(1e-14));
    CHECK(m.cov_z_zhat == doctest::Approx(0.126).epsilon(1e-14));
    CHECK(m.alpha_star == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(m.mean_z == 0.3);

    CHECK(throws_kind(ErrorKind::kNoClosedForm, [] { exact_moments({.p = 0.3, .lambda = 0.6, .tie_rate = 0.1}); }));
}

TEST_CASE("exact_moments agree with a brute-force joint law") {
    for (double p : {0.1, 0.3, 0.5, 0.8}) {
        for (double lambda : {0.0, 0.25, 0.6, 1.0}) {
            for (double q : {p, 0.4, 0.9}) {
                const auto j = brute_force(p, lambda, q);
                const auto m = exact_moments({.p = p, .lambda = lambda, .p_synthetic = q});
                const double var_z = j.ezz - j.ez * j.ez;
                const double var_zh = j.ezhzh - j.ezh * j.ezh;
                const double cov = j.ezzh - j.ez * j.ezh;
                CHECK(m.mean_z == doctest::Approx(j.ez).epsilon(1e-12));
                CHECK(m.mean_zhat == doctest::Approx(j.ezh).epsilon(1e-12));
                CHECK(m.var_z == doctest::Approx(var_z).epsilon(1e-12));
                CHECK(m.var_zhat == doctest::Approx(var_zh).epsilon(1e-12));
                CHECK(m.cov_z_zhat == doctest::Approx(cov).epsilon(1e-12));
                if (var_zh > 0) CHECK(m.alpha_star == doctest::Approx(cov / var_zh).epsilon(1e-12));
                CHECK(m.rho == doctest::Approx(cov / std::sqrt(var_z * var_zh)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("generate examples") {
    const auto copy = generate({.p = 0.4, .lambda = 1.0, .n = 1000, .seed = 3});
    for (const auto& r : copy.records()) CHECK(r.reference_label->value() == r.synthetic_score->value());
    CHECK(copy.records().front().prompt_id == "q000000");
    CHECK(copy.pair().left.name() == "sim_left");

    const auto indep = generate({.p = 0.5, .lambda = 0.0, .n = 100000, .seed = 4});
    CHECK(std::abs(static_cast<double>(oracle::correlation(indep.reference_values(), indep.synthetic_values()))) < 0.01);

    const auto mixed = generate({.p = 0.3, .lambda = 0.6, .n = 100000, .seed = 5});
    const auto z = mixed.reference_values();
    const auto zh = mixed.synthetic_values();
    CHECK(estimate_alpha(z, zh).alpha == doctest::Approx(0.6).epsilon(0.02 / 0.6));
    CHECK(saving_ratio(z, zh).saving_ratio == doctest::Approx(0.36).epsilon(0.02 / 0.36));
}

TEST_CASE("generate is deterministic per seed") {
    const MixtureAnnotatorConfig cfg{.p = 0.3, .lambda = 0.6, .tie_rate = 0.2, .n = 5000, .seed = 77};
    CHECK(generate(cfg).records() == generate(cfg).records());
    auto other = cfg;
    other.seed = 78;
    CHECK_FALSE(generate(cfg).records() == generate(other).records());
}

TEST_CASE("ties replace reference draws only") {
    const auto ds = generate({.p = 0.3, .lambda = 0.6, .tie_rate = 0.25, .n = 100000, .seed = 6});
    std::size_t ties = 0;
    for (const auto& r : ds.records()) {
        ties += r.reference_label->value() == 0.5;
        const double zh = r.synthetic_score->value();
        CHECK((zh == 0.0 || zh == 1.0));
    }
    // binomial sd ~ 137
    CHECK(std::abs(static_cast<double>(ties) - 25000.0) < 700.0);
}

TEST_CASE("empirical moments converge to the closed form at n = 1e6") {
    for (const MixtureAnnotatorConfig cfg :
         {MixtureAnnotatorConfig{.p = 0.3, .lambda = 0.6, .n = 1000000, .seed = 10},
          MixtureAnnotatorConfig{.p = 0.7, .lambda = 0.2, .n = 1000000, .seed = 11, .p_synthetic = 0.4}}) {
        const auto m = exact_moments(cfg);
        const auto ds = generate(cfg);
        const auto z = ds.reference_values();
        const auto zh = ds.synthetic_values();
        const double n = static_cast<double>(cfg.n);
        const double mz = static_cast<double>(oracle::mean(z));
        const double mzh = static_cast<double>(oracle::mean(zh));
        // Binary moments: se of a mean is sqrt(v / n); the variance estimate of a
        // Bernoulli has se <= sqrt(v (1 - 4 v) / n) + O(1/n), bounded here by sqrt(v / n).
        CHECK(std::abs(mz - m.mean_z) < 5 * std::sqrt(m.var_z / n));
        CHECK(std::abs(mzh - m.mean_zhat) < 5 * std::sqrt(m.var_zhat / n));
        CHECK(std::abs(static_cast<double>(oracle::variance(z)) - m.var_z) < 5 * std::sqrt(m.var_z / n));
        CHECK(std::abs(static_cast<double>(oracle::variance(zh)) - m.var_zhat) < 5 * std::sqrt(m.var_zhat / n));
        const double cov = static_cast<double>(oracle::raw_cov(z, zh));
        // |zhat - E zhat| <= 1 bounds the product variance by var_z.
        CHECK(std::abs(cov - m.cov_z_zhat) < 5 * std::sqrt(m.var_z / n));
    }
}

TEST_CASE("estimated alpha on the full dataset matches alpha_star") {
    const MixtureAnnotatorConfig cfg{.p = 0.45, .lambda = 0.35, .n = 100000, .seed = 21};
    const auto ds = generate(cfg);
    CHECK(std::abs(estimate_alpha(ds.reference_values(), ds.synthetic_values()).alpha -
                   exact_moments(cfg).alpha_star) < 0.02);
}

TEST_CASE("generator config validation") {
    CHECK(throws_kind(ErrorKind::kConfiguration, [] { validate(MixtureAnnotatorConfig{.p = 0.0}); }));
    CHECK(throws_kind(ErrorKind::kConfiguration, [] { validate(MixtureAnnotatorConfig{.p = 1.0}); }));
    CHECK(throws_kind(ErrorKind::kConfiguration, [] { validate(MixtureAnnotatorConfig{.lambda = 1.1}); }));
    CHECK(throws_kind(ErrorKind::kConfiguration, [] { validate(MixtureAnnotatorConfig{.tie_rate = 1.0}); }));
    CHECK(throws_kind(ErrorKind::kConfiguration, [] { validate(MixtureAnnotatorConfig{.n = 0}); }));
    CHECK(throws_kind(ErrorKind::kConfiguration,
                      [] { validate(MixtureAnnotatorConfig{.left = "x", .right = "x"}); }));
}
