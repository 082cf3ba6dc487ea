#include "mhtc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

#include "mhtc/lexicon.hpp"
#include "mhtc/util.hpp"

namespace mhtc {

std::string_view to_string(FeatureMode mode) {
  return mode == FeatureMode::TextLiwc ? "text_liwc" : "llm_summary";
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::ZeroShot: return "zero_shot";
    case Method::LogisticRegression: return "logreg";
    case Method::LinearSvm: return "svm";
    case Method::RandomForest: return "forest";
  }
  return "logreg";
}

FeatureMode parse_feature_mode(std::string_view name) {
  const auto lower = ascii_lower(name);
  if (lower == "text_liwc") return FeatureMode::TextLiwc;
  if (lower == "llm_summary") return FeatureMode::LlmSummary;
  throw Error(ErrorCode::InvalidConfig, "unknown feature mode '" + std::string(name) + "'");
}

Method parse_method(std::string_view name) {
  const auto lower = ascii_lower(name);
  if (lower == "zero_shot") return Method::ZeroShot;
  if (lower == "logreg" || lower == "logistic_regression") return Method::LogisticRegression;
  if (lower == "svm" || lower == "linear_svm") return Method::LinearSvm;
  if (lower == "forest" || lower == "random_forest") return Method::RandomForest;
  throw Error(ErrorCode::InvalidConfig, "unknown method '" + std::string(name) + "'");
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::InvalidConfig, std::string("config key '") + key + "' has wrong type");
  }
}

RetryPolicy parse_retry(const nlohmann::json& j) {
  RetryPolicy r;
  r.max_attempts = get_or(j, "max_attempts", r.max_attempts);
  r.base_delay = std::chrono::milliseconds(
      get_or<long long>(j, "retry_base_delay_ms", r.base_delay.count()));
  return r;
}

std::chrono::milliseconds seconds_to_ms(double s) {
  return std::chrono::milliseconds(static_cast<long long>(s * 1000.0));
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be an object");
  const int version = get_or(doc, "schema_version", kConfigSchemaVersion);
  if (version != kConfigSchemaVersion) {
    throw Error(ErrorCode::InvalidConfig,
                "unsupported config schema_version " + std::to_string(version));
  }
  RunConfig c;
  c.task = parse_task(get_or<std::string>(doc, "task", "binary"));
  c.method = parse_method(get_or<std::string>(doc, "method", "logreg"));
  c.features = parse_feature_mode(get_or<std::string>(doc, "features", "text_liwc"));
  c.seed = get_or<std::uint64_t>(doc, "seed", c.seed);
  c.train_fraction = get_or(doc, "train_fraction", c.train_fraction);
  c.offline = get_or(doc, "offline", false);
  if (auto lex = get_or<std::string>(doc, "lexicon", ""); !lex.empty()) {
    c.lexicon = resolve(base_dir, lex);
  }
  c.output_dir = resolve(base_dir, get_or<std::string>(doc, "output_dir", "run"));
  c.cache_dir = resolve(base_dir, get_or<std::string>(doc, "cache_dir", "cache"));

  if (auto it = doc.find("datasets"); it != doc.end()) {
    if (!it->is_object()) throw Error(ErrorCode::InvalidConfig, "'datasets' must be an object");
    for (const auto& [source, spec] : it->items()) {
      if (!is_known_source(source)) {
        throw Error(ErrorCode::InvalidConfig, "unknown dataset source '" + source + "'");
      }
      DatasetSpec ds;
      const auto path = get_or<std::string>(spec, "path", "");
      if (path.empty()) throw Error(ErrorCode::InvalidConfig, source + ": missing 'path'");
      ds.path = resolve(base_dir, path);
      const auto format = ascii_lower(get_or<std::string>(spec, "format", "csv"));
      if (format == "csv" || format == "tsv" || format == "delimited") {
        ds.schema.format = FileFormat::Delimited;
        ds.schema.delimiter = format == "tsv" ? '\t' : ',';
      } else if (format == "jsonl") {
        ds.schema.format = FileFormat::JsonLines;
      } else {
        throw Error(ErrorCode::InvalidConfig, source + ": unknown format '" + format + "'");
      }
      const auto delim = get_or<std::string>(spec, "delimiter", "");
      if (delim.size() == 1) ds.schema.delimiter = delim[0];
      else if (delim == "\\t") ds.schema.delimiter = '\t';
      else if (!delim.empty()) {
        throw Error(ErrorCode::InvalidConfig, source + ": delimiter must be one character");
      }
      ds.schema.text_column = get_or<std::string>(spec, "text_column", "text");
      ds.schema.label_column = get_or<std::string>(spec, "label_column", "label");
      if (auto id = get_or<std::string>(spec, "id_column", ""); !id.empty()) {
        ds.schema.id_column = id;
      }
      c.datasets[source] = std::move(ds);
    }
  }

  const auto emb = doc.value("embeddings", nlohmann::json::object());
  const auto emb_kind = ascii_lower(get_or<std::string>(emb, "provider", "stub"));
  if (emb_kind == "stub") c.embeddings.kind = EmbeddingProviderConfig::Kind::Stub;
  else if (emb_kind == "remote") c.embeddings.kind = EmbeddingProviderConfig::Kind::Remote;
  else throw Error(ErrorCode::InvalidConfig, "unknown embeddings provider '" + emb_kind + "'");
  c.embeddings.base_url = get_or<std::string>(emb, "base_url", "");
  c.embeddings.model_name = get_or<std::string>(
      emb, "model", c.embeddings.kind == EmbeddingProviderConfig::Kind::Stub
                        ? "stub"
                        : c.embeddings.model_name);
  c.embeddings.dimension = get_or<std::size_t>(emb, "dimension", c.embeddings.dimension);
  c.embeddings.max_batch = get_or<std::size_t>(emb, "max_batch", c.embeddings.max_batch);
  c.embeddings.concurrency = get_or<std::size_t>(emb, "concurrency", c.embeddings.concurrency);
  c.embeddings.timeout = seconds_to_ms(get_or(emb, "timeout_seconds", 30.0));
  c.embeddings.retry = parse_retry(emb);

  if (auto it = doc.find("llm"); it != doc.end() && !it->is_null()) {
    ChatProviderConfig llm;
    const auto kind = ascii_lower(get_or<std::string>(*it, "provider", "mock"));
    if (kind == "mock") llm.kind = ChatProviderConfig::Kind::Mock;
    else if (kind == "remote") llm.kind = ChatProviderConfig::Kind::Remote;
    else throw Error(ErrorCode::InvalidConfig, "unknown llm provider '" + kind + "'");
    llm.base_url = get_or<std::string>(*it, "base_url", "");
    llm.model_name = get_or<std::string>(*it, "model", llm.model_name);
    if (auto f = get_or<std::string>(*it, "fixture", ""); !f.empty()) {
      llm.mock_fixture = resolve(base_dir, f);
    }
    llm.concurrency = get_or<std::size_t>(*it, "concurrency", llm.concurrency);
    llm.timeout = seconds_to_ms(get_or(*it, "timeout_seconds", 60.0));
    llm.retry = parse_retry(*it);
    c.llm = std::move(llm);
  }

  const auto train = doc.value("training", nlohmann::json::object());
  c.training.C = get_or(train, "C", c.training.C);
  c.training.max_iter = get_or<std::size_t>(train, "max_iter", c.training.max_iter);
  c.training.tol = get_or(train, "tol", c.training.tol);
  c.training.n_trees = get_or<std::size_t>(train, "n_trees", c.training.n_trees);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.detail());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["task"] = to_string(c.task);
  j["method"] = to_string(c.method);
  j["features"] = to_string(c.features);
  j["seed"] = c.seed;
  j["train_fraction"] = c.train_fraction;
  j["offline"] = c.offline;
  j["lexicon"] = c.lexicon.generic_string();
  nlohmann::ordered_json ds = nlohmann::ordered_json::object();
  for (const auto& [source, spec] : c.datasets) {
    nlohmann::ordered_json s;
    s["path"] = spec.path.generic_string();
    s["format"] = spec.schema.format == FileFormat::Delimited ? "csv" : "jsonl";
    s["delimiter"] = std::string(1, spec.schema.delimiter);
    s["text_column"] = spec.schema.text_column;
    s["label_column"] = spec.schema.label_column;
    s["id_column"] = spec.schema.id_column ? nlohmann::ordered_json(*spec.schema.id_column)
                                           : nlohmann::ordered_json(nullptr);
    ds[source] = std::move(s);
  }
  j["datasets"] = std::move(ds);
  const auto& e = c.embeddings;
  j["embeddings"] = {
      {"provider", e.kind == EmbeddingProviderConfig::Kind::Stub ? "stub" : "remote"},
      {"base_url", e.base_url},
      {"model", e.model_name},
      {"dimension", e.dimension},
      {"max_batch", e.max_batch},
      {"concurrency", e.concurrency},
      {"timeout_seconds", static_cast<double>(e.timeout.count()) / 1000.0},
      {"max_attempts", e.retry.max_attempts},
      {"retry_base_delay_ms", e.retry.base_delay.count()}};
  if (c.llm) {
    const auto& l = *c.llm;
    j["llm"] = {{"provider", l.kind == ChatProviderConfig::Kind::Mock ? "mock" : "remote"},
                {"base_url", l.base_url},
                {"model", l.model_name},
                {"fixture", l.mock_fixture.generic_string()},
                {"concurrency", l.concurrency},
                {"timeout_seconds", static_cast<double>(l.timeout.count()) / 1000.0},
                {"max_attempts", l.retry.max_attempts},
                {"retry_base_delay_ms", l.retry.base_delay.count()},
                {"temperature", 0},
                {"message_layout", "single user message"}};
  } else {
    j["llm"] = nullptr;
  }
  j["training"] = {{"C", c.training.C},
                   {"max_iter", c.training.max_iter},
                   {"tol", c.training.tol},
                   {"n_trees", c.training.n_trees}};
  j["output_dir"] = c.output_dir.generic_string();
  j["cache_dir"] = c.cache_dir.generic_string();
  return j;
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (c.datasets.empty()) fail("no datasets configured");
  const bool needs_llm = c.method == Method::ZeroShot || c.features == FeatureMode::LlmSummary;
  if (needs_llm && !c.llm) {
    fail(c.method == Method::ZeroShot ? "zero_shot needs an llm provider"
                                      : "llm_summary features need an llm provider");
  }
  if (c.method != Method::ZeroShot && c.features == FeatureMode::TextLiwc && c.lexicon.empty()) {
    fail("text_liwc features need a lexicon path");
  }
  if (c.llm && c.llm->kind == ChatProviderConfig::Kind::Mock && needs_llm &&
      c.llm->mock_fixture.empty()) {
    fail("mock llm provider needs a fixture path");
  }
  if (c.embeddings.dimension == 0) fail("embeddings.dimension must be >= 1");
  if (c.embeddings.max_batch == 0) fail("embeddings.max_batch must be >= 1");
  if (!(c.training.C > 0.0)) fail("training.C must be positive");
  if (c.training.max_iter == 0) fail("training.max_iter must be positive");
  if (!(c.training.tol > 0.0)) fail("training.tol must be positive");
  if (c.training.n_trees == 0) fail("training.n_trees must be positive");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) fail("train_fraction must be in (0,1)");
  if (c.offline) {
    const bool uses_embeddings = c.method != Method::ZeroShot;
    if (uses_embeddings && c.embeddings.kind == EmbeddingProviderConfig::Kind::Remote) {
      fail("offline mode cannot use the remote embeddings provider");
    }
    if (needs_llm && c.llm->kind == ChatProviderConfig::Kind::Remote) {
      fail("offline mode cannot use the remote llm provider");
    }
  }
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = config;
  nlohmann::ordered_json sources = nlohmann::ordered_json::object();
  for (const auto& [source, c] : source_counts) {
    sources[source] = {{"loaded", c.loaded},
                       {"deduped", c.deduped},
                       {"filtered", c.filtered},
                       {"mapped", c.mapped},
                       {"excluded", c.excluded}};
  }
  j["corpus"] = {{"sources", sources},
                 {"mapped", mapped},
                 {"train", train},
                 {"test", test},
                 {"train_labels", train_label_counts},
                 {"test_labels", test_label_counts},
                 {"stratified", true}};
  j["seeds"] = seeds;
  j["providers"] = {{"embeddings",
                     {{"texts_requested", embedding_stats.texts_requested},
                      {"cache_hits", embedding_stats.cache_hits},
                      {"provider_calls", embedding_stats.texts_fetched},
                      {"requests", embedding_stats.provider_requests},
                      {"truncated", embedding_truncated}}},
                    {"llm",
                     {{"requested", llm_stats.requested},
                      {"cache_hits", llm_stats.cache_hits},
                      {"provider_calls", llm_stats.provider_calls},
                      {"failures", llm_stats.failures},
                      {"unparseable", llm_stats.unparseable}}}};
  j["unparseable"] = unparseable;
  j["dropped_train_rows"] = dropped_train_rows;
  j["fingerprints"] = {{"split", split_fingerprint},
                       {"train", train_fingerprint},
                       {"test", test_fingerprint},
                       {"fit", fit_fingerprint},
                       {"fit_rows", fit_rows}};
  j["warnings"] = warnings;
  j["timing_ms"] = timing_ms;
  return j;
}

std::string id_fingerprint(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  std::string joined;
  for (const auto& id : ids) {
    joined += id;
    joined.push_back('\n');
  }
  return hash_hex(joined);
}

namespace {

std::vector<std::string> ids_of(const std::vector<LabeledExample>& part) {
  std::vector<std::string> ids;
  ids.reserve(part.size());
  for (const auto& e : part) ids.push_back(e.post.id);
  return ids;
}

}  // namespace

std::string split_fingerprint(const SplitCorpus& corpus) {
  return hash_fields({id_fingerprint(ids_of(corpus.train)), id_fingerprint(ids_of(corpus.test))});
}

namespace {

class StageTimer {
 public:
  StageTimer(RunManifest& manifest, std::string name)
      : manifest_(manifest), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    manifest_.timing_ms[name_] +=
        std::chrono::duration<double, std::milli>(elapsed).count();
  }

 private:
  RunManifest& manifest_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

// Runs fn, timing it and tagging any escaping error with the stage name.
template <typename Fn>
auto stage(RunManifest& manifest, const std::string& name, Fn&& fn) {
  StageTimer timer(manifest, name);
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(name);
  }
}

std::map<std::string, std::size_t> label_histogram(const std::vector<LabeledExample>& part,
                                                   TaskKind task) {
  std::map<std::string, std::size_t> h;
  for (const auto& l : task_labels(task)) h[l] = 0;
  for (const auto& e : part) ++h[task_labels(task).at(e.label)];
  return h;
}

}  // namespace

SplitCorpus build_corpus(const RunConfig& config, RunManifest* manifest) {
  RunManifest scratch;
  RunManifest& m = manifest ? *manifest : scratch;

  auto datasets = stage(m, "load", [&] {
    std::map<std::string, std::vector<Post>> loaded;
    for (const auto& [source, spec] : config.datasets) {
      loaded[source] = load_dataset(spec.path, source, spec.schema);
    }
    return loaded;
  });
  auto assembled =
      stage(m, "assemble", [&] { return assemble_task_detailed(config.task, datasets); });
  m.source_counts = assembled.counts;
  m.mapped = assembled.examples.size();

  const auto split_seed = derive_seed(config.seed, "split");
  m.seeds["root"] = config.seed;
  m.seeds["split"] = split_seed;
  auto corpus = stage(m, "split", [&] {
    return split(assembled.examples, split_seed, config.train_fraction);
  });
  m.train = corpus.train.size();
  m.test = corpus.test.size();
  m.train_label_counts = label_histogram(corpus.train, config.task);
  m.test_label_counts = label_histogram(corpus.test, config.task);
  m.split_fingerprint = split_fingerprint(corpus);
  m.train_fingerprint = id_fingerprint(ids_of(corpus.train));
  m.test_fingerprint = id_fingerprint(ids_of(corpus.test));
  m.warnings.insert(m.warnings.end(), corpus.warnings.begin(), corpus.warnings.end());
  return corpus;
}

namespace {

std::string family_name(Method method) {
  switch (method) {
    case Method::ZeroShot: return "zero_shot";
    case Method::LogisticRegression: return "logistic_regression";
    case Method::LinearSvm: return "linear_svm";
    case Method::RandomForest: return "random_forest";
  }
  return "unknown";
}

struct TrainedModel {
  std::optional<LinearModel> linear;
  std::optional<ForestModel> forest;

  std::vector<std::size_t> predict(const FeatureMatrix& X) const {
    return linear ? mhtc::predict(*linear, X) : mhtc::predict(*forest, X);
  }
  std::string serialize() const {
    return linear ? serialize_model(*linear) : serialize_model(*forest);
  }
};

TrainedModel train_model(Method method, const FeatureMatrix& X, std::span<const std::size_t> y,
                         TrainConfig cfg) {
  TrainedModel m;
  switch (method) {
    case Method::LogisticRegression: m.linear = train_logreg(X, y, cfg); break;
    case Method::LinearSvm: m.linear = train_linear_svm(X, y, cfg); break;
    case Method::RandomForest: m.forest = train_random_forest(X, y, cfg); break;
    case Method::ZeroShot: throw Error(ErrorCode::InvalidConfig, "zero_shot has no trainer");
  }
  return m;
}

std::vector<Post> posts_of(const std::vector<LabeledExample>& part) {
  std::vector<Post> posts;
  posts.reserve(part.size());
  for (const auto& e : part) posts.push_back(e.post);
  return posts;
}

std::vector<std::size_t> labels_of(const std::vector<LabeledExample>& part) {
  std::vector<std::size_t> y;
  y.reserve(part.size());
  for (const auto& e : part) y.push_back(e.label);
  return y;
}

void fail_on_llm_failures(const std::vector<LlmOutcome>& outcomes) {
  std::size_t failures = 0;
  std::string first;
  for (const auto& o : outcomes) {
    if (o.status != LlmOutcome::Status::Failed) continue;
    if (failures++ == 0) first = o.post_id + ": " + o.error;
  }
  if (failures > 0) {
    throw Error(ErrorCode::ProviderUnavailable,
                std::to_string(failures) + " of " + std::to_string(outcomes.size()) +
                    " requests failed (completed responses are cached; rerun to resume). First: " +
                    first);
  }
}

}  // namespace

RunResult run_experiment(const RunConfig& config) {
  validate(config);
  RunResult result;
  RunManifest& manifest = result.manifest;
  manifest.config = config_to_json(config);

  result.corpus = build_corpus(config, &manifest);
  const auto& corpus = result.corpus;
  const auto& classes = task_labels(config.task);
  const auto y_test = labels_of(corpus.test);
  std::vector<Prediction> predictions(corpus.test.size());

  if (config.method == Method::ZeroShot) {
    result.model_name = "zero_shot (" + config.llm->model_name + ")";
    auto provider = stage(manifest, "llm", [&] { return make_chat_provider(*config.llm); });
    ResponseCache cache(config.cache_dir / kResponseCacheFile);
    LlmRunner runner(*provider, &cache, config.llm->concurrency);
    const auto test_posts = posts_of(corpus.test);
    auto outcomes = stage(manifest, "zero_shot", [&] {
      auto out = runner.classify_zero_shot(config.task, test_posts);
      fail_on_llm_failures(out);
      return out;
    });
    manifest.llm_stats = runner.stats();
    for (std::size_t i = 0; i < outcomes.size(); ++i) predictions[i] = outcomes[i].label;
    // The LLM sees no training rows.
    manifest.fit_fingerprint = id_fingerprint({});
    manifest.fit_rows = 0;
  } else {
    result.model_name = family_name(config.method) + " (" +
                        std::string(to_string(config.features)) + ")";
    auto embed_provider =
        stage(manifest, "embed", [&] { return make_embedding_provider(config.embeddings); });
    EmbeddingCache embed_cache(config.cache_dir / kEmbeddingCacheFile);
    Embedder embedder(*embed_provider, &embed_cache, config.embeddings.max_batch,
                      config.embeddings.concurrency);

    std::vector<std::vector<double>> train_rows, test_rows;
    std::vector<std::string> train_ids, test_ids;
    std::vector<std::size_t> y_train;
    std::vector<bool> test_usable(corpus.test.size(), true);

    if (config.features == FeatureMode::TextLiwc) {
      const auto lexicon = stage(manifest, "lexicon", [&] { return load_lexicon(config.lexicon.string()); });
      std::vector<std::string> texts;
      for (const auto& e : corpus.train) texts.push_back(e.post.text);
      for (const auto& e : corpus.test) texts.push_back(e.post.text);
      const auto vectors = stage(manifest, "embed", [&] { return embedder.embed_batch(texts); });

      stage(manifest, "lexicon", [&] {
        std::vector<std::vector<double>> train_lex, test_lex;
        for (const auto& e : corpus.train) train_lex.push_back(extract_features(lexicon, e.post.text));
        for (const auto& e : corpus.test) test_lex.push_back(extract_features(lexicon, e.post.text));
        // Fitted on training rows only.
        const auto standardizer = fit_standardizer(train_lex);
        for (std::size_t i = 0; i < corpus.train.size(); ++i) {
          train_rows.push_back(
              concat_features(vectors[i], apply_standardizer(standardizer, train_lex[i])));
          train_ids.push_back(corpus.train[i].post.id);
        }
        for (std::size_t i = 0; i < corpus.test.size(); ++i) {
          test_rows.push_back(concat_features(vectors[corpus.train.size() + i],
                                              apply_standardizer(standardizer, test_lex[i])));
          test_ids.push_back(corpus.test[i].post.id);
        }
        return 0;
      });
      y_train = labels_of(corpus.train);
    } else {
      auto chat = stage(manifest, "llm", [&] { return make_chat_provider(*config.llm); });
      ResponseCache cache(config.cache_dir / kResponseCacheFile);
      LlmRunner runner(*chat, &cache, config.llm->concurrency);
      auto all_posts = posts_of(corpus.train);
      for (const auto& e : corpus.test) all_posts.push_back(e.post);
      const auto outcomes = stage(manifest, "summarize", [&] {
        auto out = runner.summarize(all_posts);
        fail_on_llm_failures(out);
        return out;
      });
      manifest.llm_stats = runner.stats();

      std::vector<std::string> texts;
      std::vector<std::size_t> owner;  // index into all_posts
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].status != LlmOutcome::Status::Summary) continue;
        texts.push_back(outcomes[i].summary);
        owner.push_back(i);
      }
      const auto vectors = stage(manifest, "embed", [&] {
        return texts.empty() ? std::vector<EmbeddingVector>{} : embedder.embed_batch(texts);
      });
      std::vector<const EmbeddingVector*> by_post(all_posts.size(), nullptr);
      for (std::size_t k = 0; k < owner.size(); ++k) by_post[owner[k]] = &vectors[k];

      for (std::size_t i = 0; i < corpus.train.size(); ++i) {
        if (!by_post[i]) {
          ++manifest.dropped_train_rows;
          continue;
        }
        train_rows.push_back(*by_post[i]);
        train_ids.push_back(corpus.train[i].post.id);
        y_train.push_back(corpus.train[i].label);
      }
      const std::size_t dim = embed_provider->dimension();
      for (std::size_t i = 0; i < corpus.test.size(); ++i) {
        const auto* v = by_post[corpus.train.size() + i];
        test_usable[i] = v != nullptr;
        test_rows.push_back(v ? *v : EmbeddingVector(dim, 0.0));
        test_ids.push_back(corpus.test[i].post.id);
      }
    }
    manifest.embedding_stats = embedder.stats();
    manifest.embedding_truncated = embed_provider->truncated_inputs();

    auto cfg = config.training;
    cfg.seed = derive_seed(config.seed, "forest");
    if (config.method == Method::RandomForest) manifest.seeds["forest"] = cfg.seed;
    manifest.fit_fingerprint = id_fingerprint(train_ids);
    manifest.fit_rows = train_ids.size();

    const auto model = stage(manifest, "train", [&] {
      const auto X = FeatureMatrix::from_rows(train_rows, train_ids);
      return train_model(config.method, X, y_train, cfg);
    });
    result.model_json = model.serialize();
    const auto predicted = stage(manifest, "predict", [&] {
      return model.predict(FeatureMatrix::from_rows(test_rows, test_ids));
    });
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      if (test_usable[i]) predictions[i] = predicted[i];
    }
  }

  result.report = stage(manifest, "evaluate", [&] {
    return metrics(confusion(y_test, predictions, classes));
  });
  manifest.unparseable = result.report.confusion.unparseable_count;
  return result;
}

void emit_report(const RunResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::UnwritableOutput, "cannot create output directory " + dir.string());
  }
  nlohmann::ordered_json metrics_doc;
  metrics_doc["model"] = result.model_name;
  metrics_doc["task"] = result.manifest.config.value("task", "");
  metrics_doc["split_fingerprint"] = result.manifest.split_fingerprint;
  const auto report_doc = report_to_json(result.report);
  for (const auto& [k, v] : report_doc.items()) metrics_doc[k] = v;

  std::map<std::string, MetricsReport> single{{result.model_name, result.report}};
  write_file_atomic(dir / kMetricsFile, metrics_doc.dump(2) + "\n");
  write_file_atomic(dir / kConfusionFile, confusion_csv(result.report.confusion));
  write_file_atomic(dir / kManifestFile, result.manifest.to_json().dump(2) + "\n");
  write_file_atomic(dir / kF1TableFile, f1_table_csv(per_class_f1_table(single)));
}

TaggedReport load_tagged_report(const std::filesystem::path& metrics_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(metrics_json));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnreadableFile, metrics_json.string() + ": " + e.what());
  }
  try {
    return {j.at("model").get<std::string>(), report_from_json(j),
            j.at("split_fingerprint").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnreadableFile, metrics_json.string() + ": " + e.what());
  }
}

RankingTable compare_models(const std::vector<TaggedReport>& reports) {
  if (reports.size() < 2) {
    throw Error(ErrorCode::InsufficientReports, "ranking needs at least two reports");
  }
  for (const auto& r : reports) {
    if (r.split_fingerprint != reports.front().split_fingerprint) {
      throw Error(ErrorCode::SplitMismatch, "'" + r.model + "' was evaluated on a different split");
    }
  }
  std::map<std::string, MetricsReport> by_name;
  for (const auto& r : reports) by_name.emplace(r.model, r.report);
  const auto f1 = per_class_f1_table(by_name);

  RankingTable table;
  table.classes = f1.classes;
  for (const auto& r : reports) {
    RankingTable::Row row;
    row.model = r.model;
    row.accuracy = r.report.accuracy;
    row.weighted_f1 = r.report.weighted.f1;
    for (const auto& m : r.report.per_class) row.class_f1.push_back(m.f1);
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const auto& a, const auto& b) { return a.accuracy > b.accuracy; });
  return table;
}

std::string ranking_csv(const RankingTable& table) {
  std::ostringstream out;
  out.precision(4);
  out << std::fixed;
  out << "rank,model,accuracy,weighted_f1";
  for (const auto& c : table.classes) out << ",f1_" << c;
  out << '\n';
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    out << i + 1 << ",\"" << r.model << "\"," << r.accuracy << ',' << r.weighted_f1;
    for (double v : r.class_f1) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

int exit_code_for(const Error& error) {
  switch (category_of(error.code())) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Provider: return 4;
  }
  return 3;
}

}  // namespace mhtc
