#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tripath {

enum class ErrorCode {
  // Data and validation failures.
  MalformedLine,
  DuplicateId,
  MissingField,
  InvalidField,
  IoError,
  BlobSizeMismatch,
  UnknownTensorName,
  NonFiniteTensor,
  MissingId,
  DimensionMismatch,
  NonFiniteVector,
  NonFiniteInput,
  EmptyInput,
  TooManyUnits,
  SingleClass,
  LengthMismatch,
  SingleClassDataset,
  NonFiniteLoss,
  MissingVariable,
  UnknownTemplate,
  // Caller misuse.
  InvalidConfig,
  InvalidArgument,
  // LLM endpoint failures.
  EndpointUnreachable,
  EndpointRejected,
  RetriesExhausted,
  EmptyCompletion,
  MalformedResponse,
  UnparseableVerdict,
  JudgeUnreachable,
};

/// Coarse grouping used by the CLI to pick an exit code.
enum class ErrorClass { usage, data, endpoint };

std::string_view to_string(ErrorCode code) noexcept;
ErrorClass error_class(ErrorCode code) noexcept;

/// Single exception type for the library. `subject` names the offending
/// entity (record id, field, tensor, path name, judge id) when there is one;
/// `line` is the 1-based input line for file parsing errors, else 0.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string subject = {},
        std::size_t line = 0);

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::string subject_;
  std::size_t line_;
};

}  // namespace tripath
