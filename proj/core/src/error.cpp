#include "tripath/error.hpp"

namespace tripath {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BlobSizeMismatch: return "BlobSizeMismatch";
    case ErrorCode::UnknownTensorName: return "UnknownTensorName";
    case ErrorCode::NonFiniteTensor: return "NonFiniteTensor";
    case ErrorCode::MissingId: return "MissingId";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteVector: return "NonFiniteVector";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TooManyUnits: return "TooManyUnits";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MissingVariable: return "MissingVariable";
    case ErrorCode::UnknownTemplate: return "UnknownTemplate";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::EndpointRejected: return "EndpointRejected";
    case ErrorCode::RetriesExhausted: return "RetriesExhausted";
    case ErrorCode::EmptyCompletion: return "EmptyCompletion";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::JudgeUnreachable: return "JudgeUnreachable";
  }
  return "Unknown";
}

ErrorClass error_class(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
      return ErrorClass::usage;
    case ErrorCode::EndpointUnreachable:
    case ErrorCode::EndpointRejected:
    case ErrorCode::RetriesExhausted:
    case ErrorCode::EmptyCompletion:
    case ErrorCode::MalformedResponse:
    case ErrorCode::UnparseableVerdict:
    case ErrorCode::JudgeUnreachable:
      return ErrorClass::endpoint;
    default:
      return ErrorClass::data;
  }
}

Error::Error(ErrorCode code, const std::string& message, std::string subject,
             std::size_t line)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      subject_(std::move(subject)),
      line_(line) {}

}  // namespace tripath
