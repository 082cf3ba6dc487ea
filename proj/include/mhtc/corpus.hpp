#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mhtc {

/// The six source datasets a corpus may be assembled from.
inline constexpr std::string_view kKnownSources[] = {"MHB",  "CAMS",          "HelaDepDet",
                                                     "RMHD", "DepressionEmo", "AITA"};

bool is_known_source(std::string_view source);

struct Post {
  std::string id;
  std::string text;
  std::string source;
  std::string raw_label;
};

enum class TaskKind { Binary, Severity, Differential };

std::string_view to_string(TaskKind task);
/// Accepts "binary", "severity", "differential" (case-insensitive).
TaskKind parse_task(std::string_view name);

/// Ordered label names of a task. The index of a name is its label value;
/// for Severity the index is the ordinal (Minimum = 0 ... Severe = 3).
const std::vector<std::string>& task_labels(TaskKind task);

namespace label {
inline constexpr std::size_t kDepression = 0;
inline constexpr std::size_t kNonDepression = 1;
inline constexpr std::size_t kMinimum = 0;
inline constexpr std::size_t kMild = 1;
inline constexpr std::size_t kModerate = 2;
inline constexpr std::size_t kSevere = 3;
inline constexpr std::size_t kAnxiety = 1;
inline constexpr std::size_t kPtsd = 2;
}  // namespace label

struct LabeledExample {
  Post post;
  TaskKind task = TaskKind::Binary;
  std::size_t label = 0;
};

struct SplitCorpus {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

enum class FileFormat { Delimited, JsonLines };

/// Where the text and label live in a source file.
struct ColumnSchema {
  std::string text_column = "text";
  std::string label_column = "label";
  std::optional<std::string> id_column;
  FileFormat format = FileFormat::Delimited;
  char delimiter = ',';
};

/// Parses an RFC 4180 style table (quoted fields, doubled quotes, embedded newlines).
std::vector<std::vector<std::string>> parse_delimited(std::string_view content, char delimiter);

std::vector<Post> load_dataset(const std::filesystem::path& path, std::string_view source,
                               const ColumnSchema& schema);

std::vector<Post> dedupe(std::span<const Post> posts);

/// Nearest-rank percentile of an unsorted sample; p in (0, 100].
std::size_t nearest_rank_percentile(std::vector<std::size_t> values, double p);

std::size_t word_count(std::string_view text);

std::vector<Post> length_filter(std::span<const Post> posts);

struct LabelMapping {
  std::vector<LabeledExample> examples;
  /// Posts deliberately left out of the task (anxiety/PTSD posts in Binary).
  std::size_t excluded = 0;
};

/// Maps raw dataset labels into `task`'s label space. Throws UnmappedLabel
/// listing the offending records when any (source, raw_label) pair is unknown.
LabelMapping map_labels(std::span<const Post> posts, TaskKind task);

SplitCorpus split(std::span<const LabeledExample> examples, std::uint64_t seed,
                  double train_fraction = 0.7);

/// Sources that must be present to assemble each task.
std::vector<std::string> required_sources(TaskKind task);

struct StageCounts {
  std::size_t loaded = 0;
  std::size_t deduped = 0;
  std::size_t filtered = 0;
  std::size_t mapped = 0;
  std::size_t excluded = 0;
};

struct AssembledTask {
  std::vector<LabeledExample> examples;
  /// Per-source counts, keyed by source name.
  std::map<std::string, StageCounts> counts;
};

AssembledTask assemble_task_detailed(TaskKind task,
                                     const std::map<std::string, std::vector<Post>>& datasets);

std::vector<LabeledExample> assemble_task(TaskKind task,
                                          const std::map<std::string, std::vector<Post>>& datasets);

/// Canonical corpus file: one JSON record per line with {id, source, text, label, split}.
std::string serialize_split(const SplitCorpus& corpus);

}  // namespace mhtc
