#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mhtc/corpus.hpp"
#include "mhtc/embeddings.hpp"
#include "mhtc/error.hpp"
#include "mhtc/eval.hpp"
#include "mhtc/llm.hpp"
#include "mhtc/models.hpp"

namespace mhtc {

inline constexpr int kConfigSchemaVersion = 1;

enum class FeatureMode { TextLiwc, LlmSummary };
enum class Method { ZeroShot, LogisticRegression, LinearSvm, RandomForest };

std::string_view to_string(FeatureMode mode);
std::string_view to_string(Method method);
FeatureMode parse_feature_mode(std::string_view name);
/// Accepts zero_shot, logreg, svm, forest.
Method parse_method(std::string_view name);

struct DatasetSpec {
  std::filesystem::path path;
  ColumnSchema schema;
};

struct RunConfig {
  TaskKind task = TaskKind::Binary;
  std::map<std::string, DatasetSpec> datasets;
  FeatureMode features = FeatureMode::TextLiwc;
  Method method = Method::LogisticRegression;
  std::filesystem::path lexicon;
  EmbeddingProviderConfig embeddings;
  std::optional<ChatProviderConfig> llm;
  std::uint64_t seed = 42;
  double train_fraction = 0.7;
  TrainConfig training;
  std::filesystem::path output_dir = "run";
  std::filesystem::path cache_dir = "cache";
  /// Stub and mock providers only; any configured network provider is an error.
  bool offline = false;
};

/// Relative paths in the document resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const RunConfig& config);
/// Throws InvalidConfig when the combination of settings cannot run.
void validate(const RunConfig& config);

struct RunManifest {
  nlohmann::ordered_json config;
  std::map<std::string, StageCounts> source_counts;
  std::size_t mapped = 0;
  std::size_t train = 0;
  std::size_t test = 0;
  std::map<std::string, std::size_t> train_label_counts;
  std::map<std::string, std::size_t> test_label_counts;
  std::map<std::string, std::uint64_t> seeds;
  EmbedStats embedding_stats;
  std::size_t embedding_truncated = 0;
  LlmStats llm_stats;
  std::size_t unparseable = 0;
  std::size_t dropped_train_rows = 0;
  std::string split_fingerprint;
  std::string train_fingerprint;
  std::string test_fingerprint;
  /// Hash of the sorted ids of every row the standardizer and model were fitted on.
  std::string fit_fingerprint;
  std::size_t fit_rows = 0;
  std::vector<std::string> warnings;
  std::map<std::string, double> timing_ms;

  nlohmann::ordered_json to_json() const;
};

struct RunResult {
  std::string model_name;
  MetricsReport report;
  RunManifest manifest;
  /// Serialized trained model; empty for zero-shot runs.
  std::string model_json;
  SplitCorpus corpus;
};

/// Order-independent fingerprint of a set of post ids.
std::string id_fingerprint(std::vector<std::string> ids);
std::string split_fingerprint(const SplitCorpus& corpus);

/// Loads and assembles the task corpus and splits it.
SplitCorpus build_corpus(const RunConfig& config, RunManifest* manifest = nullptr);

RunResult run_experiment(const RunConfig& config);

/// Cache files inside RunConfig::cache_dir.
inline constexpr const char* kEmbeddingCacheFile = "embeddings.jsonl";
inline constexpr const char* kResponseCacheFile = "llm_responses.jsonl";

/// File names written by emit_report.
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kConfusionFile = "confusion.csv";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kF1TableFile = "per_class_f1.csv";

/// metrics.json additionally carries the model tag, task and split fingerprint
/// so `compare` can work from report files alone.
void emit_report(const RunResult& result, const std::filesystem::path& dir);

struct TaggedReport {
  std::string model;
  MetricsReport report;
  std::string split_fingerprint;
};

TaggedReport load_tagged_report(const std::filesystem::path& metrics_json);

struct RankingTable {
  std::vector<std::string> classes;
  struct Row {
    std::string model;
    double accuracy = 0.0;
    double weighted_f1 = 0.0;
    std::vector<double> class_f1;
  };
  std::vector<Row> rows;
};

/// Sorted by accuracy, highest first; ties keep input order.
RankingTable compare_models(const std::vector<TaggedReport>& reports);
std::string ranking_csv(const RankingTable& table);

/// CLI exit status for an error: 2 config, 3 data, 4 provider.
int exit_code_for(const Error& error);

}  // namespace mhtc
