#include "scalematch/core/error.hpp"

namespace scalematch {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kEmptyMask: return "empty-mask";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kFailureBudget: return "failure-budget";
  }
  return "unknown";
}

}  // namespace scalematch
