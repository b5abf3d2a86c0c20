#ifndef SADL_ERROR_HPP_
#define SADL_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace sadl {

enum class ErrorKind {
  kDimensionMismatch,
  kInvalidHyper,
  kNonFiniteUpdate,
  kSingularSystem,
  kTooManyClusters,
  kZeroRow,
  kEmptyTestSet,
  kInvalidBlockSpec,
  kLabelOutOfRange,
  kInvalidDims,
  kClassTooSmall,
  kParseError,
  kMagicMismatch,
  kIoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kInvalidHyper: return "InvalidHyper";
    case ErrorKind::kNonFiniteUpdate: return "NonFiniteUpdate";
    case ErrorKind::kSingularSystem: return "SingularSystem";
    case ErrorKind::kTooManyClusters: return "TooManyClusters";
    case ErrorKind::kZeroRow: return "ZeroRow";
    case ErrorKind::kEmptyTestSet: return "EmptyTestSet";
    case ErrorKind::kInvalidBlockSpec: return "InvalidBlockSpec";
    case ErrorKind::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::kInvalidDims: return "InvalidDims";
    case ErrorKind::kClassTooSmall: return "ClassTooSmall";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kMagicMismatch: return "MagicMismatch";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

//! True for failures of the numerics rather than of the inputs.
constexpr bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::kNonFiniteUpdate || kind == ErrorKind::kSingularSystem ||
         kind == ErrorKind::kZeroRow;
}

//! Every failure raised by the library carries one of the kinds above.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  //! The description without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

//! Error raised inside a distributed worker, tagged with the worker index.
class WorkerError : public Error {
 public:
  WorkerError(int worker, const Error& cause)
      : Error(cause.kind(), "worker " + std::to_string(worker) + ": " + cause.message()),
        worker_(worker) {}

  int worker() const noexcept { return worker_; }

 private:
  int worker_;
};

}  // namespace sadl

#endif  // SADL_ERROR_HPP_
