/// @file errors.cpp

#include "cvwin/errors.hpp"

namespace cvwin {

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kInputDomain: return "input-domain";
        case ErrorKind::kPairMismatch: return "pair-mismatch";
        case ErrorKind::kEmptyDataset: return "empty-dataset";
        case ErrorKind::kEmptySample: return "empty-sample";
        case ErrorKind::kIncompleteSyntheticCoverage: return "incomplete-synthetic-coverage";
        case ErrorKind::kIncompleteSample: return "incomplete-sample";
        case ErrorKind::kAlignment: return "alignment";
        case ErrorKind::kUndefinedCorrelation: return "undefined-correlation";
        case ErrorKind::kBudgetExceedsDataset: return "budget-exceeds-dataset";
        case ErrorKind::kInvalidSavingRatio: return "invalid-saving-ratio";
        case ErrorKind::kNoEligiblePairs: return "no-eligible-pairs";
        case ErrorKind::kNoClosedForm: return "no-closed-form";
        case ErrorKind::kInvalidCurve: return "invalid-curve";
        case ErrorKind::kConfiguration: return "configuration";
        case ErrorKind::kIo: return "io";
        case ErrorKind::kCorruptDataset: return "corrupt-dataset";
        case ErrorKind::kAmbiguousJoin: return "ambiguous-join";
        case ErrorKind::kNetwork: return "network";
        case ErrorKind::kAuth: return "auth";
    }
    return "unknown";
}

ExitClass exit_class(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kConfiguration:
        case ErrorKind::kAuth:
        case ErrorKind::kNoClosedForm:
        case ErrorKind::kInvalidSavingRatio:
            return ExitClass::kConfiguration;
        case ErrorKind::kNetwork:
            return ExitClass::kNetwork;
        default:
            return ExitClass::kData;
    }
}

}  // namespace cvwin
