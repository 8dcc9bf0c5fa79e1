/// @file errors.hpp
/// @brief Error type shared by every cvwin module.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvwin {

enum class ErrorKind {
    kInputDomain,
    kPairMismatch,
    kEmptyDataset,
    kEmptySample,
    kIncompleteSyntheticCoverage,
    kIncompleteSample,
    kAlignment,
    kUndefinedCorrelation,
    kBudgetExceedsDataset,
    kInvalidSavingRatio,
    kNoEligiblePairs,
    kNoClosedForm,
    kInvalidCurve,
    kConfiguration,
    kIo,
    kCorruptDataset,
    kAmbiguousJoin,
    kNetwork,
    kAuth,
};

/// Process exit-code class of an error kind.
enum class ExitClass { kConfiguration = 2, kData = 3, kNetwork = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

std::string_view to_string(ErrorKind kind);
ExitClass exit_class(ErrorKind kind);

}  // namespace cvwin
