/// @file cli.hpp
/// @brief The `cvwin` command line: estimate, saving, bootstrap, simulate,
/// annotate.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cvwin/estimator.hpp"
#include "cvwin/experiments.hpp"
#include "cvwin/judge.hpp"
#include "cvwin/simlab.hpp"

namespace cvwin::cli {

struct RunConfig {
    std::string subcommand;

    std::filesystem::path annotations;
    std::filesystem::path scores;
    std::filesystem::path responses;
    std::filesystem::path out_dir = ".";

    /// "left,right" or "all"; empty means "the only pair present".
    std::string pair;
    Method method = Method::kControlVariates;
    std::optional<std::size_t> k;
    std::vector<std::size_t> indices;
    SamplingMode sampling = SamplingMode::kWithoutReplacement;
    std::optional<double> alpha;
    std::uint64_t seed = 0;

    std::size_t replicates = 1000;
    std::vector<std::size_t> k_grid{10, 20, 40, 80, 160};
    std::size_t min_annotations = 100;
    bool weighted = false;
    unsigned threads = 0;

    MixtureAnnotatorConfig simulation;

    JudgeConfig judge;
    std::optional<std::size_t> limit;
    std::string evaluator;

    /// Cross-field checks for the chosen subcommand; throws kConfiguration.
    void validate() const;
};

/// Exit codes: 0 success, 2 configuration, 3 data, 4 network.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

void cmd_estimate(const RunConfig& config, std::ostream& out);
void cmd_saving(const RunConfig& config, std::ostream& out);
void cmd_bootstrap(const RunConfig& config, std::ostream& out);
void cmd_simulate(const RunConfig& config, std::ostream& out);
void cmd_annotate(const RunConfig& config, std::ostream& out);

}  // namespace cvwin::cli
