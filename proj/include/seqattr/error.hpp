#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace seqattr {

enum class ErrorCode {
  kMissingFile,
  kParseError,
  kSchemaMismatch,
  kValueOutOfRange,
  kVersionUnsupported,
  kIoFailure,
  kFeatureAttentionMissing,
  kLengthMismatch,
  kEmptyInput,
  kKOutOfRange,
  kTooFewInstances,
  kFeatureMismatch,
  kUnknownSession,
  kUnknownFeature,
  kInvalidParams,
  kNotReady,
  kCancelled,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kFeatureAttentionMissing: return "FeatureAttentionMissing";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kKOutOfRange: return "KOutOfRange";
    case ErrorCode::kTooFewInstances: return "TooFewInstances";
    case ErrorCode::kFeatureMismatch: return "FeatureMismatch";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kUnknownFeature: return "UnknownFeature";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kNotReady: return "NotReady";
    case ErrorCode::kCancelled: return "Cancelled";
  }
  return "Unknown";
}

// Location of a parse or schema problem inside an input file.
struct ErrorLocation {
  std::string file;
  std::optional<std::size_t> record;
  std::string field;
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Error(ErrorCode code, const std::string& message, ErrorLocation where)
      : std::runtime_error(format(code, message, where)), code_(code), where_(std::move(where)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::optional<ErrorLocation>& where() const noexcept { return where_; }

 private:
  static std::string format(ErrorCode code, const std::string& message, const ErrorLocation& w) {
    std::string out(to_string(code));
    out += ": ";
    out += message;
    out += " [file=" + w.file;
    if (w.record) out += ", record=" + std::to_string(*w.record);
    if (!w.field.empty()) out += ", field=" + w.field;
    out += "]";
    return out;
  }

  ErrorCode code_;
  std::optional<ErrorLocation> where_;
};

}  // namespace seqattr
