#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mhtc {

enum class ErrorCode {
  // corpus
  UnreadableFile,
  MissingColumn,
  UnmappedLabel,
  DegenerateClass,
  MissingDataset,
  // lexicon
  MalformedHeader,
  UnknownCategoryId,
  EmptyLexicon,
  InsufficientRows,
  // shared numeric / shape errors
  DimensionMismatch,
  NonFiniteInput,
  SingleClass,
  // providers and caches
  ProviderUnavailable,
  EmptyText,
  CorruptCacheEntry,
  // eval
  LengthMismatch,
  UnknownTrueLabel,
  EmptyMatrix,
  InconsistentClassLists,
  // pipeline
  InvalidConfig,
  UnwritableOutput,
  SplitMismatch,
  InsufficientReports,
};

std::string_view to_string(ErrorCode code);

/// Broad failure class used by the CLI to pick an exit status.
enum class ErrorCategory { Config, Data, Provider };

ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Returns a copy of this error tagged with the pipeline stage it escaped from.
  Error with_stage(const std::string& stage) const;

 private:
  ErrorCode code_;
  std::string stage_;
  std::string detail_;
};

}  // namespace mhtc
