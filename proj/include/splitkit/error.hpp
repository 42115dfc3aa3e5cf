#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace splitkit {

enum class ErrorKind {
    dimension_mismatch,
    not_square,
    not_symmetric,
    not_psd_quadratic_form,
    non_finite,
    negative_threshold,
    invalid_partition,
    nonpositive_scale,
    unsupported_theta1,
    subproblem_unsolvable,
    alpha_out_of_range,
    nonpositive_eta,
    k_out_of_range,
    empty_dataset,
    wrong_regime,
    empty_delta_interval,
    config_mismatch,
    bad_dimensions,
    parse_error,
    non_increasing_indices,
    empty_file,
    io_error,
    insufficient_data,
    nonpositive_gap,
    invalid_config,
    divergence,
};

constexpr std::string_view to_string(ErrorKind k) noexcept
{
    switch (k) {
    case ErrorKind::dimension_mismatch: return "DimensionMismatch";
    case ErrorKind::not_square: return "NotSquare";
    case ErrorKind::not_symmetric: return "NotSymmetric";
    case ErrorKind::not_psd_quadratic_form: return "NotPositiveSemidefiniteQuadraticForm";
    case ErrorKind::non_finite: return "NonFinite";
    case ErrorKind::negative_threshold: return "NegativeThreshold";
    case ErrorKind::invalid_partition: return "InvalidPartition";
    case ErrorKind::nonpositive_scale: return "NonpositiveScale";
    case ErrorKind::unsupported_theta1: return "UnsupportedTheta1";
    case ErrorKind::subproblem_unsolvable: return "SubproblemUnsolvable";
    case ErrorKind::alpha_out_of_range: return "AlphaOutOfRange";
    case ErrorKind::nonpositive_eta: return "NonpositiveEta";
    case ErrorKind::k_out_of_range: return "KOutOfRange";
    case ErrorKind::empty_dataset: return "EmptyDataset";
    case ErrorKind::wrong_regime: return "WrongRegime";
    case ErrorKind::empty_delta_interval: return "EmptyDeltaInterval";
    case ErrorKind::config_mismatch: return "ConfigMismatch";
    case ErrorKind::bad_dimensions: return "BadDimensions";
    case ErrorKind::parse_error: return "ParseError";
    case ErrorKind::non_increasing_indices: return "NonIncreasingIndices";
    case ErrorKind::empty_file: return "EmptyFile";
    case ErrorKind::io_error: return "IoError";
    case ErrorKind::insufficient_data: return "InsufficientData";
    case ErrorKind::nonpositive_gap: return "NonpositiveGap";
    case ErrorKind::invalid_config: return "InvalidConfig";
    case ErrorKind::divergence: return "Divergence";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (and tests) can dispatch on it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, what);
}

} // namespace splitkit
