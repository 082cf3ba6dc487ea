#include "mhtc/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mhtc/error.hpp"
#include "mhtc/parallel.hpp"
#include "mhtc/util.hpp"

namespace mhtc {

EmbeddingVector stub_embed(std::string_view text, std::size_t dimension) {
  if (dimension == 0) throw Error(ErrorCode::InvalidConfig, "embedding dimension must be >= 1");
  SeededRng rng(fnv1a64(text));
  EmbeddingVector v(dimension);
  double norm2 = 0.0;
  for (auto& x : v) {
    x = rng.standard_normal();
    norm2 += x * x;
  }
  const double norm = std::sqrt(norm2);
  for (auto& x : v) x /= norm;
  return v;
}

StubEmbeddingProvider::StubEmbeddingProvider(std::size_t dimension, std::string model_name)
    : dimension_(dimension), model_name_(std::move(model_name)) {
  if (dimension_ == 0) throw Error(ErrorCode::InvalidConfig, "embedding dimension must be >= 1");
}

std::vector<EmbeddingVector> StubEmbeddingProvider::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(stub_embed(t, dimension_));
  return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(EmbeddingProviderConfig config,
                                                 std::string api_key)
    : config_(std::move(config)) {
  endpoint_.base_url = config_.base_url;
  endpoint_.api_key = std::move(api_key);
  endpoint_.timeout = config_.timeout;
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed(std::span<const std::string> texts) {
  nlohmann::json body;
  body["model"] = config_.model_name;
  body["input"] = nlohmann::json::array();
  for (const auto& t : texts) body["input"].push_back(t);

  const auto response = post_json(endpoint_, "/embeddings", body, config_.retry);
  const auto data = response.find("data");
  if (data == response.end() || !data->is_array() || data->size() != texts.size()) {
    throw Error(ErrorCode::ProviderUnavailable,
                "embeddings response does not hold one entry per input");
  }
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<bool> filled(texts.size(), false);
  for (std::size_t i = 0; i < data->size(); ++i) {
    const auto& item = (*data)[i];
    const std::size_t index = item.value("index", i);
    if (index >= texts.size() || filled[index]) {
      throw Error(ErrorCode::ProviderUnavailable, "embeddings response has a bad index");
    }
    if (item.value("truncated", false)) ++truncated_;
    out[index] = item.at("embedding").get<EmbeddingVector>();
    filled[index] = true;
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& config) {
  if (config.kind == EmbeddingProviderConfig::Kind::Stub) {
    return std::make_unique<StubEmbeddingProvider>(config.dimension, config.model_name);
  }
  auto resolved = config;
  if (resolved.base_url.empty()) resolved.base_url = env_or_empty("EMBEDDINGS_BASE_URL");
  if (resolved.base_url.empty()) {
    throw Error(ErrorCode::InvalidConfig,
                "remote embeddings need a base_url or EMBEDDINGS_BASE_URL");
  }
  return std::make_unique<RemoteEmbeddingProvider>(resolved, env_or_empty("EMBEDDINGS_API_KEY"));
}

std::string embedding_cache_key(std::string_view model_name, std::string_view text) {
  return hash_fields({model_name, text});
}

namespace {

std::string dump_values(const EmbeddingVector& values) {
  return nlohmann::json(values).dump();
}

}  // namespace

std::string encode_cache_record(const CacheRecord& record) {
  nlohmann::ordered_json j;
  j["key"] = record.key;
  j["model"] = record.model;
  j["dimension"] = record.values.size();
  j["checksum"] = hash_hex(dump_values(record.values));
  j["values"] = record.values;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

CacheRecord decode_cache_record(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::CorruptCacheEntry, std::string("unparsable cache line: ") + e.what());
  }
  try {
    CacheRecord rec;
    rec.key = j.at("key").get<std::string>();
    rec.model = j.at("model").get<std::string>();
    rec.values = j.at("values").get<EmbeddingVector>();
    const auto dim = j.at("dimension").get<std::size_t>();
    const auto checksum = j.at("checksum").get<std::string>();
    if (dim != rec.values.size() || checksum != hash_hex(dump_values(rec.values))) {
      throw Error(ErrorCode::CorruptCacheEntry, "checksum mismatch for key " + rec.key);
    }
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCacheEntry, std::string("malformed cache record: ") + e.what());
  }
}

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  const std::string content = read_file(path_);
  std::string kept;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string::npos) nl = content.size();
    const auto line = std::string_view(content).substr(pos, nl - pos);
    pos = nl + 1;
    if (trim(line).empty()) continue;
    try {
      auto rec = decode_cache_record(line);
      entries_[rec.key] = std::move(rec.values);
      kept.append(line);
      kept.push_back('\n');
    } catch (const Error&) {
      ++evicted_;
    }
  }
  if (evicted_ > 0) write_file_atomic(path_, kept);
}

std::optional<EmbeddingVector> EmbeddingCache::get(const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const std::string& key, const std::string& model,
                         const EmbeddingVector& values) {
  const auto line = encode_cache_record({key, model, values});
  std::unique_lock lock(mutex_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::UnwritableOutput, "cannot append to " + path_.string());
  out << line << '\n';
  entries_[key] = values;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

EmbeddingVector cache_roundtrip(EmbeddingCache& store, const std::string& key,
                                const EmbeddingVector& vector) {
  store.put(key, "roundtrip", vector);
  EmbeddingCache reread(store.path());
  auto found = reread.get(key);
  if (!found) throw Error(ErrorCode::CorruptCacheEntry, "entry " + key + " did not survive reload");
  return *found;
}

Embedder::Embedder(EmbeddingProvider& provider, EmbeddingCache* cache, std::size_t max_batch,
                   std::size_t concurrency)
    : provider_(provider),
      cache_(cache),
      max_batch_(std::max<std::size_t>(1, max_batch)),
      concurrency_(std::max<std::size_t>(1, concurrency)) {}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (collapse_whitespace(texts[i]).empty()) {
      throw Error(ErrorCode::EmptyText, "text " + std::to_string(i) + " is empty");
    }
  }
  stats_.texts_requested += texts.size();
  const auto& model = provider_.model_name();
  const auto dim = provider_.dimension();

  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::string> keys(texts.size());
  // Unique uncached texts, each fetched once; duplicates resolve from the fetched result.
  std::vector<std::size_t> to_fetch;
  std::unordered_map<std::string, std::size_t> first_index;
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    keys[i] = embedding_cache_key(model, texts[i]);
    if (cache_) {
      if (auto hit = cache_->get(keys[i]); hit && hit->size() == dim) {
        out[i] = std::move(*hit);
        ++stats_.cache_hits;
        continue;
      }
    }
    if (first_index.emplace(keys[i], i).second) {
      to_fetch.push_back(i);
    } else {
      pending.push_back(i);
      ++stats_.cache_hits;
    }
  }

  const std::size_t n_chunks = (to_fetch.size() + max_batch_ - 1) / max_batch_;
  std::atomic<std::size_t> requests{0};
  parallel_for(n_chunks, concurrency_, [&](std::size_t c) {
    const std::size_t begin = c * max_batch_;
    const std::size_t end = std::min(to_fetch.size(), begin + max_batch_);
    std::vector<std::string> batch;
    batch.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) batch.push_back(texts[to_fetch[k]]);
    ++requests;
    auto vectors = provider_.embed(batch);
    if (vectors.size() != batch.size()) {
      throw Error(ErrorCode::ProviderUnavailable, "provider returned " +
                                                      std::to_string(vectors.size()) +
                                                      " vectors for " +
                                                      std::to_string(batch.size()) + " texts");
    }
    for (std::size_t k = begin; k < end; ++k) {
      auto& v = vectors[k - begin];
      if (v.size() != dim) {
        throw Error(ErrorCode::DimensionMismatch, "provider returned " +
                                                      std::to_string(v.size()) +
                                                      "-dim vector, expected " +
                                                      std::to_string(dim));
      }
      for (double x : v) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "non-finite embedding value");
      }
      const std::size_t i = to_fetch[k];
      if (cache_) cache_->put(keys[i], model, v);
      out[i] = std::move(v);
    }
  });
  stats_.provider_requests += requests.load();
  stats_.texts_fetched += to_fetch.size();

  for (std::size_t i : pending) out[i] = out[first_index.at(keys[i])];
  return out;
}

}  // namespace mhtc
