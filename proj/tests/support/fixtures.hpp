#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "mhtc/corpus.hpp"
#include "mhtc/pipeline.hpp"

namespace testing {

/// Files of the synthetic binary corpus written by write_binary_fixture.
struct BinaryFixture {
  std::filesystem::path root;
  std::filesystem::path config_path;
  /// Parsed form of the config file, ready to adjust and run.
  nlohmann::json config;
  std::size_t posts = 0;
};

/// Writes a six-source binary corpus of `posts_per_class` depression posts
/// (spread over the five mental-health sources) and as many AITA posts.
/// Each class draws its lexicon words from its own disjoint marker list.
/// Also writes a mock LLM fixture answering every zero-shot prompt with the
/// true label and every summary prompt with a class-typical sentence, plus a
/// config.json (stub embeddings, mock LLM, logistic regression, offline).
BinaryFixture write_binary_fixture(const std::filesystem::path& root,
                                   std::size_t posts_per_class = 100, std::uint64_t seed = 2024);

/// Rewrites config.json from `fixture.config` and returns the parsed RunConfig.
mhtc::RunConfig save_config(const BinaryFixture& fixture);

}  // namespace testing
