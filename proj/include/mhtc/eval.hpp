#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mhtc {

/// A prediction is a class index, or nullopt for an unparseable LLM outcome.
using Prediction = std::optional<std::size_t>;

struct ConfusionMatrix {
  std::vector<std::string> classes;
  /// counts[true][predicted]
  std::vector<std::vector<std::size_t>> counts;
  std::size_t unparseable_count = 0;
  /// Unparseable outcomes by true class; they count as misses for that class.
  std::vector<std::size_t> unparseable_by_class;

  std::size_t parsed_total() const;
  std::size_t total() const { return parsed_total() + unparseable_count; }
};

ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const Prediction> y_pred,
                          const std::vector<std::string>& classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct AveragedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  /// In class order.
  std::vector<ClassMetrics> per_class;
  double macro_f1 = 0.0;
  AveragedMetrics macro;
  AveragedMetrics weighted;
  ConfusionMatrix confusion;
};

/// Empty denominators yield 0 for precision, recall and F1.
MetricsReport metrics(const ConfusionMatrix& cm);

/// Every cell divided by the grand total of parsed predictions.
std::vector<std::vector<double>> normalize_confusion(const ConfusionMatrix& cm);

struct F1Table {
  std::vector<std::string> classes;
  std::vector<std::string> models;
  /// cells[model][class]
  std::vector<std::vector<double>> cells;
};

F1Table per_class_f1_table(const std::map<std::string, MetricsReport>& reports);

/// Stable key order; a rounded display block plus a full-precision block.
nlohmann::ordered_json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

/// Header row of predicted classes; one row per true class. With
/// `normalized`, cells are fractions of all parsed predictions.
std::string confusion_csv(const ConfusionMatrix& cm, bool normalized = false);
std::string f1_table_csv(const F1Table& table);

}  // namespace mhtc
