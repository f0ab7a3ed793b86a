#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace olar {

enum class ErrorCode {
  DimensionMismatch,
  InvalidArgument,
  NonFinite,
  NumericBreakdown,
  NotConverged,
  InvalidProbability,
  BudgetExhausted,
  CapacityOverflow,
  InvalidShape,
  Inconsistency,
  ZeroOptimum,
  RankDeficientPrefix,
  SingularPrefix,
  BadHeader,
  UnexpectedEof,
  RaggedRow,
  NonFiniteEntry,
  MissingColumn,
  NonNumeric,
  Io,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; `code()` says which contract was
/// violated so callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Stream errors that can point at a location in the input.
class DataError : public Error {
 public:
  DataError(ErrorCode code, const std::string& what, std::int64_t row = -1,
            std::int64_t byte_offset = -1)
      : Error(code, what + location(row, byte_offset)), row_(row), byte_offset_(byte_offset) {}

  std::int64_t row() const noexcept { return row_; }
  std::int64_t byte_offset() const noexcept { return byte_offset_; }

 private:
  static std::string location(std::int64_t row, std::int64_t off) {
    std::string s;
    if (row >= 0) s += " (row " + std::to_string(row) + ")";
    if (off >= 0) s += " (byte offset " + std::to_string(off) + ")";
    return s;
  }

  std::int64_t row_;
  std::int64_t byte_offset_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace olar
