#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace mfdr {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    ConstantColumn,
    ParseError,
    MissingColumn,
    NonNumericCell,
    InvalidResponse,
    FamilyMismatch,
    EmptyPenalizedSet,
    DegenerateNull,
    SaturatedModel,
    ZeroResidual,
    DegenerateWeight,
    TooFewStatistics,
    NonFinite,
    EmptySelection,
    FoldTooSmall,
    EmptyEventFold,
    RequiresReplicates,
    NoSelections,
    IoError,
};

const char* to_string(ErrorCode code) noexcept;

// All library failures are reported through this type. `index` carries the
// offending feature / grid index where one applies, `row`/`col` the cell
// coordinates of CSV parse failures (1-based data row, 0-based column).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          std::optional<std::size_t> index = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), index_(index) {}

    Error(ErrorCode code, const std::string& message, std::size_t row, std::size_t col)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), row_(row), col_(col) {}

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> index() const noexcept { return index_; }
    std::optional<std::size_t> row() const noexcept { return row_; }
    std::optional<std::size_t> col() const noexcept { return col_; }

    // True for errors caused by malformed input rather than numerics.
    bool is_input_error() const noexcept;

private:
    ErrorCode code_;
    std::optional<std::size_t> index_;
    std::optional<std::size_t> row_;
    std::optional<std::size_t> col_;
};

}  // namespace mfdr
