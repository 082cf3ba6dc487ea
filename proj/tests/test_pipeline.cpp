#include <doctest.h>

#include <filesystem>

#include "mhtc/pipeline.hpp"
#include "mhtc/util.hpp"
#include "support/error_code.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"

using namespace mhtc;
using testing::code_of;

namespace {

TaggedReport tagged(const std::string& model, double accuracy, const std::string& fingerprint) {
  TaggedReport t;
  t.model = model;
  t.report.accuracy = accuracy;
  t.report.confusion.classes = {"Depression", "Non-depression"};
  t.report.per_class.resize(2);
  t.split_fingerprint = fingerprint;
  return t;
}

/// Manifest with the wall-clock block removed.
nlohmann::json stable_manifest(const std::filesystem::path& dir) {
  auto j = nlohmann::json::parse(read_file(dir / kManifestFile));
  j.erase("timing_ms");
  return j;
}

}  // namespace

TEST_CASE("method and feature names") {
  CHECK(parse_method("zero_shot") == Method::ZeroShot);
  CHECK(parse_method("logreg") == Method::LogisticRegression);
  CHECK(parse_method("svm") == Method::LinearSvm);
  CHECK(parse_method("forest") == Method::RandomForest);
  CHECK(parse_feature_mode("llm_summary") == FeatureMode::LlmSummary);
  CHECK(code_of([] { parse_method("boosting"); }) == ErrorCode::InvalidConfig);
  for (auto m : {Method::ZeroShot, Method::LogisticRegression, Method::LinearSvm, Method::RandomForest})
    CHECK(parse_method(to_string(m)) == m);
}

TEST_CASE("config validation") {
  testing::TempDir dir;
  auto fx = testing::write_binary_fixture(dir.path(), 10);
  auto ok = testing::save_config(fx);
  CHECK_NOTHROW(validate(ok));
  CHECK(ok.datasets.size() == 6);
  CHECK(ok.output_dir == dir.path() / "run");

  auto no_llm = ok;
  no_llm.llm.reset();
  no_llm.features = FeatureMode::LlmSummary;
  CHECK(code_of([&] { validate(no_llm); }) == ErrorCode::InvalidConfig);
  no_llm.features = FeatureMode::TextLiwc;
  no_llm.method = Method::ZeroShot;
  CHECK(code_of([&] { validate(no_llm); }) == ErrorCode::InvalidConfig);

  auto no_lex = ok;
  no_lex.lexicon.clear();
  CHECK(code_of([&] { validate(no_lex); }) == ErrorCode::InvalidConfig);

  auto online = ok;
  online.embeddings.kind = EmbeddingProviderConfig::Kind::Remote;
  CHECK(code_of([&] { validate(online); }) == ErrorCode::InvalidConfig);
  online.offline = false;
  CHECK_NOTHROW(validate(online));

  CHECK(code_of([&] { parse_run_config({{"schema_version", 2}}, dir.path()); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { parse_run_config({{"datasets", {{"Twitter", {{"path", "x"}}}}}}, dir.path()); }) ==
        ErrorCode::InvalidConfig);
  CHECK(code_of([&] { load_run_config(dir / "absent.json"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("supervised text_liwc run: accuracy, reconciliation, leakage guard") {
  testing::TempDir dir;
  auto fx = testing::write_binary_fixture(dir.path());
  auto config = testing::save_config(fx);
  auto result = run_experiment(config);
  const auto& m = result.manifest;

  CHECK(result.report.accuracy >= 0.95);
  std::size_t loaded = 0, mapped = 0;
  for (const auto& [source, c] : m.source_counts) {
    loaded += c.loaded;
    mapped += c.mapped;
  }
  CHECK(loaded == fx.posts);
  CHECK(m.mapped == mapped);
  CHECK(m.mapped == m.train + m.test);
  CHECK(result.report.confusion.total() == m.test);
  const auto& es = m.embedding_stats;
  CHECK(es.texts_fetched + es.cache_hits == es.texts_requested);
  CHECK(es.texts_requested == m.mapped);
  for (const auto& [source, c] : m.source_counts) {
    CHECK(c.deduped <= c.loaded);
    CHECK(c.filtered <= c.deduped);
    CHECK(c.mapped + c.excluded == c.filtered);
  }
  CHECK(m.fit_fingerprint == m.train_fingerprint);
  CHECK(m.fit_fingerprint != m.test_fingerprint);
  CHECK(m.fit_rows == m.train);
  CHECK(m.seeds.at("split") == derive_seed(42, "split"));
  CHECK_FALSE(result.model_json.empty());

  std::vector<std::string> train_ids, test_ids;
  for (const auto& ex : result.corpus.train) train_ids.push_back(ex.post.id);
  for (const auto& ex : result.corpus.test) test_ids.push_back(ex.post.id);
  CHECK(id_fingerprint(train_ids) == m.fit_fingerprint);
  CHECK(id_fingerprint(test_ids) == m.test_fingerprint);

  // A warm second run fetches nothing and reproduces the metrics.
  auto again = run_experiment(config);
  CHECK(again.manifest.embedding_stats.texts_fetched == 0);
  CHECK(again.manifest.embedding_stats.cache_hits == m.mapped);
  CHECK(report_to_json(again.report).dump() == report_to_json(result.report).dump());
}

TEST_CASE("zero-shot run scores the test split only") {
  testing::TempDir dir;
  auto fx = testing::write_binary_fixture(dir.path(), 40);
  fx.config["method"] = "zero_shot";
  auto config = testing::save_config(fx);
  auto result = run_experiment(config);
  CHECK(result.report.accuracy == 1.0);
  CHECK(result.manifest.llm_stats.requested == result.manifest.test);
  CHECK(result.manifest.llm_stats.provider_calls + result.manifest.llm_stats.cache_hits ==
        result.manifest.llm_stats.requested);
  CHECK(result.model_json.empty());
}

TEST_CASE("llm_summary run embeds summaries") {
  testing::TempDir dir;
  auto fx = testing::write_binary_fixture(dir.path(), 40);
  fx.config["features"] = "llm_summary";
  fx.config["method"] = "svm";
  auto config = testing::save_config(fx);
  auto result = run_experiment(config);
  CHECK(result.manifest.llm_stats.requested == result.manifest.mapped);
  CHECK(result.manifest.dropped_train_rows == 0);
  CHECK(result.report.confusion.total() == result.manifest.test);
  // Two distinct summaries in the fixture: only two texts reach the provider.
  CHECK(result.manifest.embedding_stats.texts_fetched == 2);
}

TEST_CASE("emit_report writes four parseable files atomically") {
  testing::TempDir dir;
  auto fx = testing::write_binary_fixture(dir.path(), 20);
  auto config = testing::save_config(fx);
  auto result = run_experiment(config);
  emit_report(result, config.output_dir);
  for (const char* f : {kMetricsFile, kManifestFile}) {
    CHECK(nlohmann::json::parse(read_file(config.output_dir / f)).is_object());
  }
  CHECK(read_file(config.output_dir / kConfusionFile).find("true\\predicted") == 0);
  CHECK(read_file(config.output_dir / kF1TableFile).find("model,") == 0);
  emit_report(result, config.output_dir);
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(config.output_dir)) ++entries;
  CHECK(entries == 4);

  auto blocker = dir.write("blocker", "not a directory");
  CHECK(code_of([&] { emit_report(result, blocker / "out"); }) == ErrorCode::UnwritableOutput);

  auto loaded = load_tagged_report(config.output_dir / kMetricsFile);
  CHECK(loaded.model == result.model_name);
  CHECK(loaded.split_fingerprint == result.manifest.split_fingerprint);
  CHECK(loaded.report.accuracy == result.report.accuracy);
}

TEST_CASE("same config and seed give byte-identical reports") {
  testing::TempDir dir;
  auto fx = testing::write_binary_fixture(dir.path(), 30);
  auto config = testing::save_config(fx);
  auto first = run_experiment(config);
  emit_report(first, dir / "a");
  std::filesystem::remove_all(config.cache_dir);
  auto second = run_experiment(config);
  emit_report(second, dir / "b");
  for (const char* f : {kMetricsFile, kConfusionFile, kF1TableFile}) {
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
  CHECK(stable_manifest(dir / "a") == stable_manifest(dir / "b"));
  CHECK(first.model_json == second.model_json);
}

TEST_CASE("errors carry their stage") {
  testing::TempDir dir;
  auto fx = testing::write_binary_fixture(dir.path(), 10);
  fx.config["datasets"]["AITA"]["path"] = "data/missing.csv";
  auto config = testing::save_config(fx);
  try {
    run_experiment(config);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnreadableFile);
    CHECK(e.stage() == "load");
    CHECK(exit_code_for(e) == 3);
  }
  fx.config["datasets"].erase("AITA");
  auto missing = testing::save_config(fx);
  CHECK(code_of([&] { run_experiment(missing); }) == ErrorCode::MissingDataset);
}

TEST_CASE("exit codes by error category") {
  CHECK(exit_code_for(Error(ErrorCode::InvalidConfig, "x")) == 2);
  CHECK(exit_code_for(Error(ErrorCode::UnmappedLabel, "x")) == 3);
  CHECK(exit_code_for(Error(ErrorCode::ProviderUnavailable, "x")) == 4);
}

TEST_CASE("compare_models ranks by accuracy") {
  std::vector<TaggedReport> reports{tagged("forest", 0.89, "f"), tagged("zero_shot", 0.96, "f"),
                                    tagged("logreg", 0.91, "f")};
  auto table = compare_models(reports);
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0].model == "zero_shot");
  CHECK(table.rows[1].model == "logreg");
  CHECK(table.rows[2].model == "forest");
  CHECK(ranking_csv(table).rfind("rank,model,accuracy", 0) == 0);

  std::vector<TaggedReport> mixed{tagged("a", 0.5, "f1"), tagged("b", 0.6, "f2")};
  CHECK(code_of([&] { compare_models(mixed); }) == ErrorCode::SplitMismatch);
  std::vector<TaggedReport> single{tagged("a", 0.5, "f")};
  CHECK(code_of([&] { compare_models(single); }) == ErrorCode::InsufficientReports);
}
