/// @file experiments.cpp

#include "cvwin/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <thread>

#include "cvwin/errors.hpp"
#include "cvwin/rng.hpp"

namespace cvwin {

namespace {

double mean_of(std::span<const double> xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

unsigned worker_count(unsigned requested, std::size_t jobs) {
    unsigned threads = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(jobs, 1)));
}

// Runs body(begin, end) over [0, count) split into contiguous chunks.
template <typename Body>
void parallel_chunks(std::size_t count, unsigned threads, Body body) {
    if (threads <= 1) {
        body(std::size_t{0}, count);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = std::min(count, t * chunk);
        const std::size_t end = std::min(count, begin + chunk);
        pool.emplace_back([&, t, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

bool uses_synthetic(CurveMethod method) {
    return method == CurveMethod::kControlVariates || method == CurveMethod::kSyntheticOnly;
}

}  // namespace

std::string_view to_string(SamplingMode mode) {
    return mode == SamplingMode::kWithReplacement ? "with_replacement" : "without_replacement";
}

SamplingMode parse_sampling_mode(std::string_view name) {
    if (name == "with_replacement") return SamplingMode::kWithReplacement;
    if (name == "without_replacement") return SamplingMode::kWithoutReplacement;
    throw Error(ErrorKind::kConfiguration, "unknown sampling mode '" + std::string(name) + "'");
}

std::vector<std::size_t> sample_indices(std::size_t n, const SamplingPlan& plan) {
    if (n == 0) throw Error(ErrorKind::kEmptyDataset, "cannot sample from an empty dataset");
    if (plan.k == 0) throw Error(ErrorKind::kEmptySample, "annotation budget k must be >= 1");

    Xoshiro256StarStar rng(plan.seed);
    std::vector<std::size_t> out;
    out.reserve(plan.k);
    if (plan.mode == SamplingMode::kWithReplacement) {
        for (std::size_t j = 0; j < plan.k; ++j) out.push_back(rng.below(n));
        return out;
    }
    if (plan.k > n) {
        throw Error(ErrorKind::kBudgetExceedsDataset,
                    "cannot draw " + std::to_string(plan.k) + " distinct records from " +
                        std::to_string(n));
    }
    // Partial Fisher-Yates; the first k slots are the sample in draw order.
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t j = 0; j < plan.k; ++j) {
        const std::size_t pick = j + rng.below(n - j);
        std::swap(pool[j], pool[pick]);
        out.push_back(pool[j]);
    }
    return out;
}

std::string_view to_string(CurveMethod method) {
    switch (method) {
        case CurveMethod::kReferenceOnly: return "reference_only";
        case CurveMethod::kControlVariates: return "control_variates";
        case CurveMethod::kSyntheticOnly: return "synthetic_only";
        case CurveMethod::kReferenceShifted: return "reference_shifted";
    }
    return "unknown";
}

CurveMethod parse_curve_method(std::string_view name) {
    for (CurveMethod m : {CurveMethod::kReferenceOnly, CurveMethod::kControlVariates,
                          CurveMethod::kSyntheticOnly, CurveMethod::kReferenceShifted}) {
        if (name == to_string(m)) return m;
    }
    throw Error(ErrorKind::kConfiguration, "unknown curve method '" + std::string(name) + "'");
}

void validate(const BootstrapCurve& curve) {
    if (curve.points.empty()) throw Error(ErrorKind::kInvalidCurve, "curve has no points");
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const auto& p = curve.points[i];
        if (!std::isfinite(p.k) || !std::isfinite(p.mse) || p.mse < 0.0) {
            throw Error(ErrorKind::kInvalidCurve, "curve point " + std::to_string(i) +
                                                      " has non-finite k or negative mse");
        }
        if (i > 0 && !(p.k > curve.points[i - 1].k)) {
            throw Error(ErrorKind::kInvalidCurve, "curve k values must be strictly increasing");
        }
        if (curve.method != CurveMethod::kReferenceShifted && p.k != std::floor(p.k)) {
            throw Error(ErrorKind::kInvalidCurve,
                        "only reference_shifted curves may have non-integral k");
        }
    }
}

std::vector<double> replicate_estimates(const PairDataset& dataset, CurveMethod method,
                                        std::size_t k, const BootstrapOptions& options,
                                        std::size_t* alpha_fallbacks) {
    if (method == CurveMethod::kReferenceShifted) {
        throw Error(ErrorKind::kConfiguration, "reference_shifted curves come from shift_curve");
    }
    if (dataset.empty()) throw Error(ErrorKind::kEmptyDataset, "dataset has no records");
    if (k == 0) throw Error(ErrorKind::kEmptySample, "annotation budget k must be >= 1");
    if (options.replicates == 0) throw Error(ErrorKind::kConfiguration, "replicates must be >= 1");

    const std::vector<double> z = dataset.reference_values();
    std::vector<double> zhat;
    double mu = 0.0;
    if (uses_synthetic(method)) {
        zhat = dataset.synthetic_values();
        mu = mean_of(zhat);
    }

    const std::size_t n = z.size();
    std::vector<double> estimates(options.replicates);
    std::vector<unsigned char> fell_back(options.replicates, 0);

    if (method == CurveMethod::kSyntheticOnly) {
        std::fill(estimates.begin(), estimates.end(), mu);
    } else {
        parallel_chunks(options.replicates, worker_count(options.threads, options.replicates),
                        [&](std::size_t begin, std::size_t end) {
                            std::vector<double> zs(k);
                            std::vector<double> zhs(k);
                            for (std::size_t r = begin; r < end; ++r) {
                                Xoshiro256StarStar rng(derive_seed(options.seed, r));
                                for (std::size_t j = 0; j < k; ++j) {
                                    const auto idx = rng.below(n);
                                    zs[j] = z[idx];
                                    if (!zhat.empty()) zhs[j] = zhat[idx];
                                }
                                if (method == CurveMethod::kReferenceOnly) {
                                    estimates[r] = mean_of(zs);
                                } else {
                                    const auto report =
                                        cv_estimate(zs, zhs, mu, options.alpha_override, n);
                                    estimates[r] = report.win_rate;
                                    fell_back[r] = report.params->alpha_fallback_used ? 1 : 0;
                                }
                            }
                        });
    }
    if (alpha_fallbacks) {
        *alpha_fallbacks = static_cast<std::size_t>(std::count(fell_back.begin(), fell_back.end(), 1));
    }
    return estimates;
}

BootstrapResult bootstrap_mse(const PairDataset& dataset, CurveMethod method, std::size_t k,
                              const BootstrapOptions& options) {
    BootstrapResult result;
    const auto estimates = replicate_estimates(dataset, method, k, options, &result.alpha_fallbacks);
    const double truth = mean_of(dataset.reference_values());
    double sse = 0.0;
    for (double e : estimates) sse += (e - truth) * (e - truth);
    result.mse = sse / static_cast<double>(estimates.size());
    return result;
}

BootstrapCurve mse_curve(const PairDataset& dataset, CurveMethod method,
                         std::span<const std::size_t> k_grid, const BootstrapOptions& options) {
    if (k_grid.empty()) throw Error(ErrorKind::kConfiguration, "k grid is empty");
    BootstrapCurve curve;
    curve.method = method;
    curve.replicates = options.replicates;
    for (std::size_t k : k_grid) {
        const auto point = bootstrap_mse(dataset, method, k, options);
        curve.points.push_back({static_cast<double>(k), point.mse, point.alpha_fallbacks});
    }
    validate(curve);
    return curve;
}

BootstrapCurve shift_curve(const BootstrapCurve& curve, double s) {
    if (curve.method != CurveMethod::kReferenceOnly) {
        throw Error(ErrorKind::kInvalidCurve, "only reference_only curves can be shifted");
    }
    if (!(s >= 0.0) || s >= 1.0) {
        throw Error(ErrorKind::kInvalidSavingRatio,
                    "saving ratio must lie in [0, 1), got " + std::to_string(s));
    }
    BootstrapCurve out = curve;
    out.method = CurveMethod::kReferenceShifted;
    for (auto& p : out.points) p.k *= (1.0 - s);
    return out;
}

double interpolate_mse(const BootstrapCurve& curve, double k) {
    validate(curve);
    const auto& pts = curve.points;
    if (k < pts.front().k || k > pts.back().k) {
        throw Error(ErrorKind::kInvalidCurve, "k = " + std::to_string(k) +
                                                  " lies outside the curve's range");
    }
    auto hi = std::lower_bound(pts.begin(), pts.end(), k,
                               [](const CurvePoint& p, double v) { return p.k < v; });
    if (hi->k == k) return hi->mse;
    auto lo = hi - 1;
    const double t = (k - lo->k) / (hi->k - lo->k);
    return lo->mse + t * (hi->mse - lo->mse);
}

std::vector<std::size_t> reference_grid_for_shift(std::span<const std::size_t> k_grid, double s) {
    if (!(s >= 0.0) || s >= 1.0) {
        throw Error(ErrorKind::kInvalidSavingRatio,
                    "saving ratio must lie in [0, 1), got " + std::to_string(s));
    }
    std::vector<std::size_t> grid(k_grid.begin(), k_grid.end());
    for (std::size_t k : k_grid) {
        const double scaled = static_cast<double>(k) / (1.0 - s);
        grid.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(scaled))));
        grid.push_back(static_cast<std::size_t>(std::ceil(scaled)));
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

std::vector<OverlapPoint> curve_overlap(const BootstrapCurve& shifted,
                                        const BootstrapCurve& target) {
    validate(target);
    std::vector<OverlapPoint> out;
    for (const auto& p : target.points) {
        OverlapPoint o;
        o.k = p.k;
        o.target_mse = p.mse;
        o.shifted_mse = interpolate_mse(shifted, p.k);
        o.relative_gap = std::abs(o.shifted_mse - o.target_mse) / o.target_mse;
        out.push_back(o);
    }
    return out;
}

std::optional<double> crossover_k(const BootstrapCurve& curve, const BootstrapCurve& baseline) {
    if (curve.points.size() != baseline.points.size()) {
        throw Error(ErrorKind::kInvalidCurve, "curves have different grids");
    }
    std::optional<double> k0;
    for (std::size_t i = curve.points.size(); i-- > 0;) {
        if (curve.points[i].k != baseline.points[i].k) {
            throw Error(ErrorKind::kInvalidCurve, "curves have different grids");
        }
        if (!(curve.points[i].mse < baseline.points[i].mse)) break;
        k0 = curve.points[i].k;
    }
    return k0;
}

BootstrapCurve average_curves(std::span<const BootstrapCurve> curves) {
    if (curves.empty()) throw Error(ErrorKind::kInvalidCurve, "no curves to average");
    BootstrapCurve out = curves.front();
    for (auto& p : out.points) {
        p.mse = 0.0;
        p.alpha_fallbacks = 0;
    }
    for (const auto& c : curves) {
        if (c.method != out.method || c.points.size() != out.points.size()) {
            throw Error(ErrorKind::kInvalidCurve, "curves to average must share method and grid");
        }
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            if (c.points[i].k != out.points[i].k) {
                throw Error(ErrorKind::kInvalidCurve, "curves to average must share a grid");
            }
            out.points[i].mse += c.points[i].mse;
            out.points[i].alpha_fallbacks += c.points[i].alpha_fallbacks;
        }
    }
    for (auto& p : out.points) p.mse /= static_cast<double>(curves.size());
    return out;
}

PairAggregate aggregate_pairs(std::span<const PairDataset> datasets, std::size_t min_annotations,
                              bool weighted_by_n) {
    PairAggregate agg;
    agg.min_annotations_filter = min_annotations;
    agg.weighted = weighted_by_n;

    std::map<GeneratorPair, const PairDataset*> ordered;
    for (const auto& d : datasets) ordered.emplace(d.pair(), &d);

    double weighted_sum = 0.0;
    double weight_total = 0.0;
    for (const auto& [pair, dataset] : ordered) {
        const PairDataset joint = dataset->co_annotated();
        const std::size_t annotations = joint.size();
        if (annotations < min_annotations) {
            agg.excluded.push_back({pair, annotations,
                                    "fewer than " + std::to_string(min_annotations) +
                                        " co-annotated records"});
            continue;
        }
        try {
            const auto report = saving_ratio(joint.reference_values(), joint.synthetic_values());
            agg.per_pair.push_back({pair, report, annotations});
            const double w = weighted_by_n ? static_cast<double>(annotations) : 1.0;
            weighted_sum += w * report.saving_ratio;
            weight_total += w;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::kUndefinedCorrelation) throw;
            agg.excluded.push_back({pair, annotations, e.what()});
        }
    }
    if (agg.per_pair.empty()) {
        throw Error(ErrorKind::kNoEligiblePairs,
                    "no pair has at least " + std::to_string(min_annotations) +
                        " co-annotated records with a defined correlation");
    }
    agg.average_saving = weighted_sum / weight_total;
    return agg;
}

}  // namespace cvwin
