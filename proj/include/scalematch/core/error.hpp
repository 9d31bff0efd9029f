#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scalematch {

enum class ErrorKind {
  kParse,
  kIntegrity,
  kConfig,
  kIo,
  kPrecondition,
  kEmptyInput,
  kEmptyMask,
  kDegenerate,
  kFailureBudget,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. `kind()` lets
/// callers (and the CLI's diagnostic prefix) distinguish failure classes
/// without a type ladder.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t byte_offset)
      : Error(ErrorKind::kParse, message), byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

}  // namespace scalematch
