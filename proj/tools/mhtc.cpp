// Command-line front end: ingest, run, compare, cache inspect/clear.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mhtc/embeddings.hpp"
#include "mhtc/llm.hpp"
#include "mhtc/pipeline.hpp"
#include "mhtc/util.hpp"

namespace fs = std::filesystem;
using namespace mhtc;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> task;
  std::optional<std::string> method;
  std::optional<std::string> features;
  std::optional<std::uint64_t> seed;
  bool offline = false;
  std::optional<std::string> output;
};

void add_config_flags(CLI::App* cmd, Overrides& o, bool run_flags) {
  cmd->add_option("--config", o.config, "Run config (JSON)")->required();
  cmd->add_option("--task", o.task, "binary | severity | differential");
  cmd->add_option("--seed", o.seed, "Root seed");
  if (run_flags) {
    cmd->add_option("--method", o.method, "zero_shot | logreg | svm | forest");
    cmd->add_option("--features", o.features, "text_liwc | llm_summary");
    cmd->add_flag("--offline", o.offline, "Stub/mock providers only; fail on any network need");
  }
  cmd->add_option("--output", o.output, "Output directory (overrides output_dir)");
}

RunConfig resolve_config(const Overrides& o) {
  auto config = load_run_config(o.config);
  if (o.task) config.task = parse_task(*o.task);
  if (o.method) config.method = parse_method(*o.method);
  if (o.features) config.features = parse_feature_mode(*o.features);
  if (o.seed) config.seed = *o.seed;
  if (o.offline) config.offline = true;
  if (o.output) config.output_dir = *o.output;
  return config;
}

int cmd_ingest(const Overrides& o) {
  auto config = resolve_config(o);
  if (config.datasets.empty()) throw Error(ErrorCode::InvalidConfig, "no datasets configured");
  RunManifest manifest;
  const auto corpus = build_corpus(config, &manifest);
  fs::create_directories(config.output_dir);
  const auto path = config.output_dir / "corpus.jsonl";
  write_file_atomic(path, serialize_split(corpus));
  for (const auto& [source, c] : manifest.source_counts) {
    std::printf("%-14s loaded %zu  deduped %zu  filtered %zu  mapped %zu  excluded %zu\n",
                source.c_str(), c.loaded, c.deduped, c.filtered, c.mapped, c.excluded);
  }
  std::printf("train %zu  test %zu  split %s\n", manifest.train, manifest.test,
              manifest.split_fingerprint.c_str());
  for (const auto& w : manifest.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

int cmd_run(const Overrides& o) {
  auto config = resolve_config(o);
  validate(config);
  const auto result = run_experiment(config);
  emit_report(result, config.output_dir);
  if (!result.model_json.empty()) write_file_atomic(config.output_dir / "model.json", result.model_json);
  const auto& r = result.report;
  std::printf("%s on %s: accuracy %.4f  weighted F1 %.4f  macro F1 %.4f  unparseable %zu\n",
              result.model_name.c_str(), std::string(to_string(config.task)).c_str(), r.accuracy,
              r.weighted.f1, r.macro_f1, r.confusion.unparseable_count);
  for (const auto& w : result.manifest.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("reports in %s\n", config.output_dir.string().c_str());
  return 0;
}

int cmd_compare(const std::vector<std::string>& inputs, const std::optional<std::string>& out) {
  std::vector<TaggedReport> reports;
  for (const auto& in : inputs) {
    fs::path p = in;
    if (fs::is_directory(p)) p /= kMetricsFile;
    reports.push_back(load_tagged_report(p));
  }
  const auto csv = ranking_csv(compare_models(reports));
  if (out) write_file_atomic(*out, csv);
  std::cout << csv;
  return 0;
}

fs::path cache_dir_of(const std::optional<std::string>& config, const std::optional<std::string>& dir) {
  if (dir) return *dir;
  if (config) return load_run_config(*config).cache_dir;
  throw Error(ErrorCode::InvalidConfig, "give --config or --cache-dir");
}

int cmd_cache_inspect(const fs::path& dir) {
  const auto emb = dir / kEmbeddingCacheFile;
  const auto llm = dir / kResponseCacheFile;
  if (fs::exists(emb)) {
    EmbeddingCache cache(emb);
    std::printf("%s: %zu vectors, %zu corrupt lines evicted, %ju bytes\n", emb.string().c_str(),
                cache.size(), cache.evicted_on_open(), static_cast<std::uintmax_t>(fs::file_size(emb)));
  } else {
    std::printf("%s: absent\n", emb.string().c_str());
  }
  if (fs::exists(llm)) {
    ResponseCache cache(llm);
    std::printf("%s: %zu responses, %zu corrupt lines evicted, %ju bytes\n", llm.string().c_str(),
                cache.size(), cache.evicted_on_open(), static_cast<std::uintmax_t>(fs::file_size(llm)));
  } else {
    std::printf("%s: absent\n", llm.string().c_str());
  }
  return 0;
}

int cmd_cache_clear(const fs::path& dir) {
  std::size_t removed = 0;
  for (const char* name : {kEmbeddingCacheFile, kResponseCacheFile}) {
    std::error_code ec;
    if (fs::remove(dir / name, ec)) ++removed;
    if (ec) throw Error(ErrorCode::UnwritableOutput, "cannot remove " + (dir / name).string());
  }
  std::printf("removed %zu cache file(s) from %s\n", removed, dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mental-health text classification experiments"};
  app.require_subcommand(1);

  Overrides ingest_opts, run_opts;
  auto* ingest = app.add_subcommand("ingest", "Load, clean, map and split the corpus");
  add_config_flags(ingest, ingest_opts, false);
  auto* run = app.add_subcommand("run", "Run one experiment and write its reports");
  add_config_flags(run, run_opts, true);

  std::vector<std::string> compare_inputs;
  std::optional<std::string> compare_out;
  auto* compare = app.add_subcommand("compare", "Rank finished runs by accuracy");
  compare->add_option("reports", compare_inputs, "metrics.json files or run directories")
      ->required()
      ->expected(1, -1);
  compare->add_option("--out", compare_out, "Also write the ranking CSV here");

  std::optional<std::string> cache_config, cache_dir;
  auto* cache = app.add_subcommand("cache", "Inspect or clear provider caches");
  cache->require_subcommand(1);
  auto* inspect = cache->add_subcommand("inspect", "Show cache sizes");
  auto* clear = cache->add_subcommand("clear", "Delete cache files");
  for (auto* sub : {inspect, clear}) {
    sub->add_option("--config", cache_config, "Run config naming the cache directory");
    sub->add_option("--cache-dir", cache_dir, "Cache directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_opts);
    if (*run) return cmd_run(run_opts);
    if (*compare) return cmd_compare(compare_inputs, compare_out);
    if (*inspect) return cmd_cache_inspect(cache_dir_of(cache_config, cache_dir));
    if (*clear) return cmd_cache_clear(cache_dir_of(cache_config, cache_dir));
  } catch (const Error& e) {
    std::fprintf(stderr, "error%s%s: %s\n", e.stage().empty() ? "" : " in ", e.stage().c_str(), e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
