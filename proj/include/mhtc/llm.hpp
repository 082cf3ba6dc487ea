#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mhtc/corpus.hpp"
#include "mhtc/http.hpp"

namespace mhtc {

struct PromptTemplate {
  /// Empty for the summary template.
  std::optional<TaskKind> task;
  std::string system_preamble;
  std::vector<std::string> label_list;
};

PromptTemplate zero_shot_template(TaskKind task);
PromptTemplate summary_template();

std::string build_zero_shot_prompt(TaskKind task, const Post& post);
std::string build_summary_prompt(const Post& post);

/// Lowercases, turns punctuation into spaces and collapses whitespace.
std::string normalize_response(std::string_view text);

/// Maps a free-text response onto one of `labels` (returning its index), or
/// nullopt when zero or several distinct labels occur. Longer labels are
/// matched first so "Non-depression" never also counts as "Depression".
std::optional<std::size_t> parse_label(std::string_view response,
                                       std::span<const std::string> labels);

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// Returns the first completion's content. Throws ProviderUnavailable on failure.
  /// Must be safe to call concurrently.
  virtual std::string complete(const std::string& prompt) = 0;
  virtual const std::string& model_name() const = 0;
};

struct ChatProviderConfig {
  enum class Kind { Remote, Mock };
  Kind kind = Kind::Mock;
  std::string base_url;
  std::string model_name = "gpt-4o";
  std::filesystem::path mock_fixture;
  std::chrono::milliseconds timeout{60000};
  std::size_t concurrency = 4;
  RetryPolicy retry;
};

/// POST {base}/chat/completions with a single user message at temperature 0.
class RemoteChatProvider final : public ChatProvider {
 public:
  RemoteChatProvider(ChatProviderConfig config, std::string api_key);
  std::string complete(const std::string& prompt) override;
  const std::string& model_name() const override { return config_.model_name; }

 private:
  ChatProviderConfig config_;
  HttpEndpoint endpoint_;
};

/// Key used by mock fixtures to look up a canned response.
std::string prompt_hash(std::string_view prompt);

/// Canned responses keyed by prompt hash. Fixture file:
/// {"model": "...", "default": "...", "responses": {"<prompt hash>": "..."}}
class MockChatProvider final : public ChatProvider {
 public:
  explicit MockChatProvider(std::map<std::string, std::string> responses,
                            std::optional<std::string> fallback = std::nullopt,
                            std::string model_name = "mock");
  static MockChatProvider from_file(const std::filesystem::path& path);

  std::string complete(const std::string& prompt) override;
  const std::string& model_name() const override { return model_name_; }

 private:
  std::map<std::string, std::string> responses_;
  std::optional<std::string> fallback_;
  std::string model_name_;
};

/// Serializes a fixture in the format MockChatProvider::from_file reads.
std::string serialize_mock_fixture(const std::map<std::string, std::string>& responses,
                                   const std::optional<std::string>& fallback,
                                   const std::string& model_name = "mock");

/// Adapts a callable; used for scripted providers in tests and tools.
class FunctionChatProvider final : public ChatProvider {
 public:
  FunctionChatProvider(std::function<std::string(const std::string&)> fn,
                       std::string model_name = "function");
  std::string complete(const std::string& prompt) override { return fn_(prompt); }
  const std::string& model_name() const override { return model_name_; }

 private:
  std::function<std::string(const std::string&)> fn_;
  std::string model_name_;
};

/// Remote providers read LLM_API_KEY and, without a configured base URL, LLM_BASE_URL.
std::unique_ptr<ChatProvider> make_chat_provider(const ChatProviderConfig& config);

/// Append-only response store keyed by hash(model, prompt); same line
/// discipline as the embedding cache.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path path);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& model, const std::string& response);
  std::size_t size() const;
  std::size_t evicted_on_open() const { return evicted_; }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;
  std::size_t evicted_ = 0;
};

std::string response_cache_key(std::string_view model, std::string_view prompt);

struct LlmOutcome {
  enum class Status { Label, Summary, Unparseable, Failed };
  std::string post_id;
  std::string raw_response;
  Status status = Status::Unparseable;
  std::optional<std::size_t> label;
  std::string summary;
  std::string error;
};

struct LlmStats {
  std::size_t requested = 0;
  std::size_t cache_hits = 0;
  std::size_t provider_calls = 0;
  std::size_t failures = 0;
  std::size_t unparseable = 0;
};

class LlmRunner {
 public:
  LlmRunner(ChatProvider& provider, ResponseCache* cache, std::size_t concurrency = 4);

  /// One outcome per post, order-aligned. Provider failures become Failed
  /// outcomes; successful responses are cached as they arrive.
  std::vector<LlmOutcome> classify_zero_shot(TaskKind task, std::span<const Post> posts);
  std::vector<LlmOutcome> summarize(std::span<const Post> posts);

  const LlmStats& stats() const { return stats_; }

 private:
  std::vector<LlmOutcome> run(std::span<const Post> posts,
                              const std::function<std::string(const Post&)>& build,
                              const std::function<void(LlmOutcome&)>& parse);

  ChatProvider& provider_;
  ResponseCache* cache_;
  std::size_t concurrency_;
  LlmStats stats_;
};

}  // namespace mhtc
