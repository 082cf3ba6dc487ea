#include "mhtc/error.hpp"

namespace mhtc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnmappedLabel: return "UnmappedLabel";
    case ErrorCode::DegenerateClass: return "DegenerateClass";
    case ErrorCode::MissingDataset: return "MissingDataset";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnknownCategoryId: return "UnknownCategoryId";
    case ErrorCode::EmptyLexicon: return "EmptyLexicon";
    case ErrorCode::InsufficientRows: return "InsufficientRows";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::CorruptCacheEntry: return "CorruptCacheEntry";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnknownTrueLabel: return "UnknownTrueLabel";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::InconsistentClassLists: return "InconsistentClassLists";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnwritableOutput: return "UnwritableOutput";
    case ErrorCode::SplitMismatch: return "SplitMismatch";
    case ErrorCode::InsufficientReports: return "InsufficientReports";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::MissingDataset:
    case ErrorCode::UnwritableOutput:
      return ErrorCategory::Config;
    case ErrorCode::ProviderUnavailable:
      return ErrorCategory::Provider;
    default:
      return ErrorCategory::Data;
  }
}

namespace {

std::string compose(ErrorCode code, const std::string& message, const std::string& stage) {
  std::string out;
  if (!stage.empty()) out += "[" + stage + "] ";
  out += std::string(to_string(code));
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::string stage)
    : std::runtime_error(compose(code, message, stage)),
      code_(code),
      stage_(std::move(stage)),
      detail_(message) {}

Error Error::with_stage(const std::string& stage) const {
  return Error(code_, detail_, stage);
}

}  // namespace mhtc
