#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mhtc/http.hpp"

namespace mhtc {

using EmbeddingVector = std::vector<double>;

struct EmbeddingProviderConfig {
  enum class Kind { Remote, Stub };
  Kind kind = Kind::Stub;
  std::string base_url;
  std::string model_name = "all-mpnet-base-v2";
  std::size_t dimension = 768;
  std::size_t max_batch = 64;
  std::chrono::milliseconds timeout{30000};
  std::size_t concurrency = 4;
  RetryPolicy retry;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// One vector per text, order-aligned. Must be safe to call concurrently.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
  virtual const std::string& model_name() const = 0;
  virtual std::size_t dimension() const = 0;
  /// Inputs the provider reported as truncated to fit its context window.
  virtual std::size_t truncated_inputs() const { return 0; }
};

/// Deterministic unit-norm pseudo-random vector seeded by the FNV-1a hash of the text.
EmbeddingVector stub_embed(std::string_view text, std::size_t dimension);

class StubEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit StubEmbeddingProvider(std::size_t dimension, std::string model_name = "stub");
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  const std::string& model_name() const override { return model_name_; }
  std::size_t dimension() const override { return dimension_; }

 private:
  std::size_t dimension_;
  std::string model_name_;
};

/// Client for the common JSON embeddings endpoint:
/// POST {base}/embeddings {model, input: [..]} -> {data: [{index, embedding}]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(EmbeddingProviderConfig config, std::string api_key);
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
  const std::string& model_name() const override { return config_.model_name; }
  std::size_t dimension() const override { return config_.dimension; }
  std::size_t truncated_inputs() const override { return truncated_.load(); }

 private:
  EmbeddingProviderConfig config_;
  HttpEndpoint endpoint_;
  std::atomic<std::size_t> truncated_{0};
};

/// Builds a provider from config; remote providers read EMBEDDINGS_API_KEY and,
/// when the config has no base URL, EMBEDDINGS_BASE_URL.
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& config);

std::string embedding_cache_key(std::string_view model_name, std::string_view text);

struct CacheRecord {
  std::string key;
  std::string model;
  EmbeddingVector values;
};

std::string encode_cache_record(const CacheRecord& record);
/// Throws CorruptCacheEntry on truncated, unparsable or checksum-mismatched lines.
CacheRecord decode_cache_record(std::string_view line);

/// Append-only line-delimited vector store. Corrupt lines found on open are
/// evicted by rewriting the file without them.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path path);

  std::optional<EmbeddingVector> get(const std::string& key) const;
  void put(const std::string& key, const std::string& model, const EmbeddingVector& values);

  std::size_t size() const;
  std::size_t evicted_on_open() const { return evicted_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> entries_;
  std::size_t evicted_ = 0;
};

/// Writes the vector through the cache file and reads it back from disk.
EmbeddingVector cache_roundtrip(EmbeddingCache& store, const std::string& key,
                                const EmbeddingVector& vector);

struct EmbedStats {
  std::size_t texts_requested = 0;
  std::size_t cache_hits = 0;
  std::size_t texts_fetched = 0;
  std::size_t provider_requests = 0;
};

/// Cache-aware batching front end over a provider.
class Embedder {
 public:
  Embedder(EmbeddingProvider& provider, EmbeddingCache* cache, std::size_t max_batch = 64,
           std::size_t concurrency = 4);

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);

  const EmbedStats& stats() const { return stats_; }
  const EmbeddingProvider& provider() const { return provider_; }

 private:
  EmbeddingProvider& provider_;
  EmbeddingCache* cache_;
  std::size_t max_batch_;
  std::size_t concurrency_;
  EmbedStats stats_;
};

}  // namespace mhtc
