#include "mhtc/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mhtc/error.hpp"

namespace mhtc {

std::size_t ConfusionMatrix::parsed_total() const {
  std::size_t total = 0;
  for (const auto& row : counts) {
    for (auto c : row) total += c;
  }
  return total;
}

ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const Prediction> y_pred,
                          const std::vector<std::string>& classes) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(y_true.size()) + " true labels vs " +
                                               std::to_string(y_pred.size()) + " predictions");
  }
  const std::size_t k = classes.size();
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(k, std::vector<std::size_t>(k, 0));
  cm.unparseable_by_class.assign(k, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= k) {
      throw Error(ErrorCode::UnknownTrueLabel, "true label index " + std::to_string(y_true[i]));
    }
    if (!y_pred[i]) {
      ++cm.unparseable_count;
      ++cm.unparseable_by_class[y_true[i]];
      continue;
    }
    if (*y_pred[i] >= k) {
      throw Error(ErrorCode::UnknownTrueLabel,
                  "predicted label index " + std::to_string(*y_pred[i]) + " outside class list");
    }
    ++cm.counts[y_true[i]][*y_pred[i]];
  }
  return cm;
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

MetricsReport metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0 || cm.classes.empty()) {
    throw Error(ErrorCode::EmptyMatrix, "no evaluated examples");
  }
  const std::size_t k = cm.classes.size();
  MetricsReport r;
  r.confusion = cm;

  std::size_t trace = 0;
  for (std::size_t i = 0; i < k; ++i) trace += cm.counts[i][i];
  r.accuracy = static_cast<double>(trace) / static_cast<double>(total);

  r.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t i = 0; i < k; ++i) {
      predicted += cm.counts[i][c];
      actual += cm.counts[c][i];
    }
    if (c < cm.unparseable_by_class.size()) actual += cm.unparseable_by_class[c];
    auto& m = r.per_class[c];
    m.support = actual;
    const auto tp = static_cast<double>(cm.counts[c][c]);
    m.precision = ratio(tp, static_cast<double>(predicted));
    m.recall = ratio(tp, static_cast<double>(actual));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  }

  std::size_t support_total = 0;
  for (const auto& m : r.per_class) support_total += m.support;
  for (const auto& m : r.per_class) {
    r.macro.precision += m.precision / static_cast<double>(k);
    r.macro.recall += m.recall / static_cast<double>(k);
    r.macro.f1 += m.f1 / static_cast<double>(k);
    const double w = ratio(static_cast<double>(m.support), static_cast<double>(support_total));
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
  }
  r.macro_f1 = r.macro.f1;
  return r;
}

std::vector<std::vector<double>> normalize_confusion(const ConfusionMatrix& cm) {
  const std::size_t total = cm.parsed_total();
  if (total == 0) throw Error(ErrorCode::EmptyMatrix, "no parsed predictions to normalize");
  std::vector<std::vector<double>> out(cm.counts.size());
  for (std::size_t i = 0; i < cm.counts.size(); ++i) {
    for (auto c : cm.counts[i]) {
      out[i].push_back(static_cast<double>(c) / static_cast<double>(total));
    }
  }
  return out;
}

F1Table per_class_f1_table(const std::map<std::string, MetricsReport>& reports) {
  F1Table table;
  bool first = true;
  for (const auto& [name, report] : reports) {
    if (first) {
      table.classes = report.confusion.classes;
      first = false;
    } else if (report.confusion.classes != table.classes) {
      throw Error(ErrorCode::InconsistentClassLists,
                  "report '" + name + "' uses a different class list");
    }
    table.models.push_back(name);
    std::vector<double> row;
    for (const auto& m : report.per_class) row.push_back(m.f1);
    row.resize(table.classes.size(), 0.0);
    table.cells.push_back(std::move(row));
  }
  return table;
}

namespace {

double round4(double v) { return std::round(v * 1e4) / 1e4; }

nlohmann::ordered_json metric_block(const MetricsReport& r, bool rounded) {
  auto f = [rounded](double v) { return rounded ? round4(v) : v; };
  nlohmann::ordered_json j;
  j["accuracy"] = f(r.accuracy);
  j["macro_f1"] = f(r.macro_f1);
  j["macro"] = {{"precision", f(r.macro.precision)},
                {"recall", f(r.macro.recall)},
                {"f1", f(r.macro.f1)}};
  j["weighted"] = {{"precision", f(r.weighted.precision)},
                   {"recall", f(r.weighted.recall)},
                   {"f1", f(r.weighted.f1)}};
  nlohmann::ordered_json per_class;
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    per_class[r.confusion.classes[c]] = {{"precision", f(m.precision)},
                                         {"recall", f(m.recall)},
                                         {"f1", f(m.f1)},
                                         {"support", m.support}};
  }
  j["per_class"] = per_class;
  if (r.per_class.size() == 2) {
    const auto& pos = r.per_class[0];
    j["positive_class"] = {{"label", r.confusion.classes[0]},
                           {"precision", f(pos.precision)},
                           {"recall", f(pos.recall)},
                           {"f1", f(pos.f1)}};
  }
  return j;
}

}  // namespace

nlohmann::ordered_json report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["classes"] = report.confusion.classes;
  j["total"] = report.confusion.total();
  j["unparseable"] = report.confusion.unparseable_count;
  j["unparseable_by_class"] = report.confusion.unparseable_by_class;
  j["display"] = metric_block(report, true);
  j["full_precision"] = metric_block(report, false);
  j["confusion"] = {{"counts", report.confusion.counts},
                    {"normalized", report.confusion.parsed_total() > 0
                                       ? nlohmann::ordered_json(normalize_confusion(report.confusion))
                                       : nlohmann::ordered_json::array()}};
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  ConfusionMatrix cm;
  cm.classes = j.at("classes").get<std::vector<std::string>>();
  cm.counts = j.at("confusion").at("counts").get<std::vector<std::vector<std::size_t>>>();
  cm.unparseable_count = j.at("unparseable").get<std::size_t>();
  cm.unparseable_by_class = j.value("unparseable_by_class", std::vector<std::size_t>{});
  return metrics(cm);
}

namespace {

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string confusion_csv(const ConfusionMatrix& cm, bool normalized) {
  std::ostringstream out;
  out << "true\\predicted";
  for (const auto& c : cm.classes) out << ',' << csv_cell(c);
  out << '\n';
  const auto norm = normalized ? normalize_confusion(cm) : std::vector<std::vector<double>>{};
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    out << csv_cell(cm.classes[i]);
    for (std::size_t j = 0; j < cm.classes.size(); ++j) {
      out << ',';
      if (normalized) out << fmt_double(norm[i][j]);
      else out << cm.counts[i][j];
    }
    out << '\n';
  }
  return out.str();
}

std::string f1_table_csv(const F1Table& table) {
  std::ostringstream out;
  out << "model";
  for (const auto& c : table.classes) out << ',' << csv_cell(c);
  out << '\n';
  for (std::size_t m = 0; m < table.models.size(); ++m) {
    out << csv_cell(table.models[m]);
    for (double v : table.cells[m]) out << ',' << fmt_double(v);
    out << '\n';
  }
  return out.str();
}

}  // namespace mhtc
