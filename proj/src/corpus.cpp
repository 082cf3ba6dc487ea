#include "mhtc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mhtc/error.hpp"
#include "mhtc/util.hpp"

namespace mhtc {

bool is_known_source(std::string_view source) {
  return std::find(std::begin(kKnownSources), std::end(kKnownSources), source) !=
         std::end(kKnownSources);
}

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Binary: return "binary";
    case TaskKind::Severity: return "severity";
    case TaskKind::Differential: return "differential";
  }
  return "binary";
}

TaskKind parse_task(std::string_view name) {
  const auto lower = ascii_lower(name);
  if (lower == "binary") return TaskKind::Binary;
  if (lower == "severity") return TaskKind::Severity;
  if (lower == "differential") return TaskKind::Differential;
  throw Error(ErrorCode::InvalidConfig, "unknown task '" + std::string(name) + "'");
}

const std::vector<std::string>& task_labels(TaskKind task) {
  static const std::vector<std::string> binary{"Depression", "Non-depression"};
  static const std::vector<std::string> severity{"Minimum", "Mild", "Moderate", "Severe"};
  static const std::vector<std::string> differential{"Depression", "Anxiety", "PTSD"};
  switch (task) {
    case TaskKind::Binary: return binary;
    case TaskKind::Severity: return severity;
    case TaskKind::Differential: return differential;
  }
  return binary;
}

std::vector<std::vector<std::string>> parse_delimited(std::string_view content, char delimiter) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    // Blank lines carry no record.
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };

  std::size_t i = 0;
  if (content.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  for (; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      if (i + 1 < content.size() && content[i + 1] == '\n') ++i;
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

namespace {

struct RawRecord {
  std::string text;
  std::string label;
  std::optional<std::string> id;
};

std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::filesystem::path& path) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  throw Error(ErrorCode::MissingColumn,
              "column '" + name + "' not found in header of " + path.string());
}

std::vector<RawRecord> read_delimited(const std::string& content, const ColumnSchema& schema,
                                      const std::filesystem::path& path) {
  auto rows = parse_delimited(content, schema.delimiter);
  if (rows.empty()) throw Error(ErrorCode::MissingColumn, "no header row in " + path.string());
  const auto& header = rows.front();
  const auto text_idx = column_index(header, schema.text_column, path);
  const auto label_idx = column_index(header, schema.label_column, path);
  std::optional<std::size_t> id_idx;
  if (schema.id_column) id_idx = column_index(header, *schema.id_column, path);

  std::vector<RawRecord> out;
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto cell = [&](std::size_t idx) { return idx < row.size() ? row[idx] : std::string{}; };
    RawRecord rec{cell(text_idx), cell(label_idx), std::nullopt};
    if (id_idx) rec.id = cell(*id_idx);
    out.push_back(std::move(rec));
  }
  return out;
}

std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return {};
  return v.dump();
}

std::vector<RawRecord> read_json_lines(const std::string& content, const ColumnSchema& schema,
                                       const std::filesystem::path& path) {
  std::vector<RawRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string::npos) nl = content.size();
    std::string line = trim(std::string_view(content).substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::UnreadableFile,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object()) {
      throw Error(ErrorCode::UnreadableFile,
                  path.string() + ":" + std::to_string(line_no) + ": record is not an object");
    }
    auto field = [&](const std::string& name) -> std::string {
      auto it = rec.find(name);
      if (it == rec.end()) {
        throw Error(ErrorCode::MissingColumn, "field '" + name + "' missing at " + path.string() +
                                                  ":" + std::to_string(line_no));
      }
      return json_scalar(*it);
    };
    RawRecord r{field(schema.text_column), field(schema.label_column), std::nullopt};
    if (schema.id_column) r.id = field(*schema.id_column);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<Post> load_dataset(const std::filesystem::path& path, std::string_view source,
                               const ColumnSchema& schema) {
  if (!is_known_source(source)) {
    throw Error(ErrorCode::InvalidConfig, "unknown dataset source '" + std::string(source) + "'");
  }
  const std::string content = read_file(path);
  const auto records = schema.format == FileFormat::Delimited
                           ? read_delimited(content, schema, path)
                           : read_json_lines(content, schema, path);

  std::vector<Post> posts;
  posts.reserve(records.size());
  const std::string prefix = std::string(source) + ":";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (collapse_whitespace(r.text).empty()) continue;
    Post p;
    p.id = prefix + (r.id && !r.id->empty() ? *r.id : std::to_string(i));
    p.text = r.text;
    p.source = std::string(source);
    p.raw_label = trim(r.label);
    posts.push_back(std::move(p));
  }
  return posts;
}

std::vector<Post> dedupe(std::span<const Post> posts) {
  std::unordered_set<std::string> seen;
  std::vector<Post> out;
  out.reserve(posts.size());
  for (const auto& p : posts) {
    if (seen.insert(collapse_whitespace(p.text)).second) out.push_back(p);
  }
  return out;
}

std::size_t nearest_rank_percentile(std::vector<std::size_t> values, double p) {
  if (values.empty()) throw Error(ErrorCode::InsufficientRows, "percentile of empty sample");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

std::size_t word_count(std::string_view text) { return split_whitespace(text).size(); }

std::vector<Post> length_filter(std::span<const Post> posts) {
  if (posts.empty()) return {};
  std::vector<std::size_t> lengths;
  lengths.reserve(posts.size());
  for (const auto& p : posts) lengths.push_back(word_count(p.text));
  const auto lo = nearest_rank_percentile(lengths, 10.0);
  const auto hi = nearest_rank_percentile(lengths, 90.0);
  std::vector<Post> out;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (lengths[i] >= lo && lengths[i] <= hi) out.push_back(posts[i]);
  }
  return out;
}

namespace {

enum class MapResult { Mapped, Excluded, Unmapped };

MapResult map_one(const Post& post, TaskKind task, std::size_t& label_out) {
  const std::string raw = ascii_lower(collapse_whitespace(post.raw_label));
  const std::string& src = post.source;
  switch (task) {
    case TaskKind::Binary: {
      if (src == "AITA") {
        label_out = label::kNonDepression;
        return MapResult::Mapped;
      }
      // Single-condition corpora: every post is a depression post whatever
      // its per-post annotation (cause, emotion, ...).
      if (src == "CAMS" || src == "DepressionEmo") {
        label_out = label::kDepression;
        return MapResult::Mapped;
      }
      if (src == "HelaDepDet") {
        if (raw == "depression" || raw == "minimum" || raw == "mild" || raw == "moderate" ||
            raw == "severe") {
          label_out = label::kDepression;
          return MapResult::Mapped;
        }
        return MapResult::Unmapped;
      }
      if (src == "MHB" || src == "RMHD") {
        if (raw == "depression") {
          label_out = label::kDepression;
          return MapResult::Mapped;
        }
        if (raw == "anxiety" || raw == "ptsd") return MapResult::Excluded;
      }
      return MapResult::Unmapped;
    }
    case TaskKind::Severity: {
      if (src != "HelaDepDet") return MapResult::Unmapped;
      const auto& labels = task_labels(TaskKind::Severity);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (raw == ascii_lower(labels[i])) {
          label_out = i;
          return MapResult::Mapped;
        }
      }
      return MapResult::Unmapped;
    }
    case TaskKind::Differential: {
      if (src != "MHB" && src != "RMHD") return MapResult::Unmapped;
      if (raw == "depression") label_out = label::kDepression;
      else if (raw == "anxiety") label_out = label::kAnxiety;
      else if (raw == "ptsd") label_out = label::kPtsd;
      else return MapResult::Unmapped;
      return MapResult::Mapped;
    }
  }
  return MapResult::Unmapped;
}

}  // namespace

LabelMapping map_labels(std::span<const Post> posts, TaskKind task) {
  LabelMapping out;
  std::vector<const Post*> unmapped;
  for (const auto& p : posts) {
    std::size_t label = 0;
    switch (map_one(p, task, label)) {
      case MapResult::Mapped: out.examples.push_back({p, task, label}); break;
      case MapResult::Excluded: ++out.excluded; break;
      case MapResult::Unmapped: unmapped.push_back(&p); break;
    }
  }
  if (!unmapped.empty()) {
    std::string msg = std::to_string(unmapped.size()) + " record(s) have no " +
                      std::string(to_string(task)) + " mapping:";
    const std::size_t shown = std::min<std::size_t>(unmapped.size(), 5);
    for (std::size_t i = 0; i < shown; ++i) {
      msg += " " + unmapped[i]->id + "='" + unmapped[i]->raw_label + "'";
    }
    if (shown < unmapped.size()) msg += " ...";
    throw Error(ErrorCode::UnmappedLabel, msg);
  }
  return out;
}

SplitCorpus split(std::span<const LabeledExample> examples, std::uint64_t seed,
                  double train_fraction) {
  if (examples.size() < 2) {
    throw Error(ErrorCode::InsufficientRows, "split needs at least 2 examples");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "train fraction must lie in (0, 1)");
  }

  std::size_t n_labels = 0;
  for (const auto& e : examples) n_labels = std::max(n_labels, e.label + 1);
  std::vector<std::vector<std::size_t>> groups(n_labels);
  for (std::size_t i = 0; i < examples.size(); ++i) groups[examples[i].label].push_back(i);

  SplitCorpus out;
  out.seed = seed;
  SeededRng rng(seed);
  std::vector<bool> in_train(examples.size(), false);

  // Train quotas: a singleton group goes wholly to train; the other groups
  // share round(fraction * their total) by largest remainder, ties to the
  // lower label, so the train size matches the unstratified target.
  std::vector<std::size_t> take(groups.size(), 0);
  std::vector<double> remainder(groups.size(), -1.0);
  std::size_t pooled = 0, allocated = 0;
  for (std::size_t label = 0; label < groups.size(); ++label) {
    const auto n = groups[label].size();
    if (n == 0) continue;
    if (n == 1) {
      out.warnings.push_back(std::string(to_string(ErrorCode::DegenerateClass)) + ": label " +
                             std::to_string(label) + " has a single example; placed in train");
      take[label] = 1;
      continue;
    }
    const double quota = train_fraction * static_cast<double>(n);
    take[label] = std::min(n, static_cast<std::size_t>(std::floor(quota)));
    remainder[label] = quota - static_cast<double>(take[label]);
    pooled += n;
    allocated += take[label];
  }
  const auto target =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(pooled)));
  while (allocated < target) {
    std::size_t best = groups.size();
    for (std::size_t label = 0; label < groups.size(); ++label) {
      if (remainder[label] < 0.0 || take[label] >= groups[label].size()) continue;
      if (best == groups.size() || remainder[label] > remainder[best]) best = label;
    }
    if (best == groups.size()) break;
    ++take[best];
    remainder[best] = -1.0;
    ++allocated;
  }

  for (std::size_t label = 0; label < groups.size(); ++label) {
    auto& group = groups[label];
    rng.shuffle(group);
    for (std::size_t k = 0; k < take[label]; ++k) in_train[group[k]] = true;
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    (in_train[i] ? out.train : out.test).push_back(examples[i]);
  }
  return out;
}

std::vector<std::string> required_sources(TaskKind task) {
  switch (task) {
    case TaskKind::Binary: return {kKnownSources, std::end(kKnownSources)};
    case TaskKind::Severity: return {"HelaDepDet"};
    case TaskKind::Differential: return {"MHB", "RMHD"};
  }
  return {};
}

AssembledTask assemble_task_detailed(TaskKind task,
                                     const std::map<std::string, std::vector<Post>>& datasets) {
  const auto required = required_sources(task);
  std::vector<std::string> missing;
  for (const auto& s : required) {
    if (!datasets.contains(s)) missing.push_back(s);
  }
  if (!missing.empty()) {
    std::string msg = std::string(to_string(task)) + " task requires";
    for (const auto& s : missing) msg += " " + s;
    throw Error(ErrorCode::MissingDataset, msg);
  }

  AssembledTask out;
  // Declared source order keeps concatenation deterministic.
  for (const auto& source : required) {
    const auto& posts = datasets.at(source);
    StageCounts counts;
    counts.loaded = posts.size();
    auto unique = dedupe(posts);
    counts.deduped = unique.size();
    auto kept = length_filter(unique);
    counts.filtered = kept.size();
    auto mapped = map_labels(kept, task);
    counts.mapped = mapped.examples.size();
    counts.excluded = mapped.excluded;
    out.counts[source] = counts;
    for (auto& e : mapped.examples) out.examples.push_back(std::move(e));
  }
  return out;
}

std::vector<LabeledExample> assemble_task(
    TaskKind task, const std::map<std::string, std::vector<Post>>& datasets) {
  return assemble_task_detailed(task, datasets).examples;
}

std::string serialize_split(const SplitCorpus& corpus) {
  std::string out;
  auto emit = [&](const std::vector<LabeledExample>& part, const char* name) {
    for (const auto& e : part) {
      nlohmann::ordered_json rec;
      rec["id"] = e.post.id;
      rec["source"] = e.post.source;
      rec["text"] = e.post.text;
      rec["label"] = task_labels(e.task).at(e.label);
      rec["split"] = name;
      out += rec.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
      out += '\n';
    }
  };
  emit(corpus.train, "train");
  emit(corpus.test, "test");
  return out;
}

}  // namespace mhtc
