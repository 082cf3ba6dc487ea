#include "mhtc/llm.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>

#include <nlohmann/json.hpp>

#include "mhtc/error.hpp"
#include "mhtc/parallel.hpp"
#include "mhtc/util.hpp"

namespace mhtc {

namespace {

constexpr std::string_view kZeroShotPreamble =
    "You are a mental health expert. Read the following social media post and determine the "
    "user's mental health condition.";

constexpr std::string_view kSummaryPreamble =
    "You are a mental health expert. Read the following social media post and describe the "
    "user\xE2\x80\x99s mental state in one or two sentences. Focus on emotional tone, cognitive "
    "state, and any signs of mental health conditions. Avoid quoting the post verbatim.";

std::string join(std::span<const std::string> items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

PromptTemplate zero_shot_template(TaskKind task) {
  return {task, std::string(kZeroShotPreamble), task_labels(task)};
}

PromptTemplate summary_template() { return {std::nullopt, std::string(kSummaryPreamble), {}}; }

std::string build_zero_shot_prompt(TaskKind task, const Post& post) {
  const auto tmpl = zero_shot_template(task);
  return tmpl.system_preamble + " Choose from the following labels: " +
         join(tmpl.label_list, ", ") + ".\n\nPost: " + post.text;
}

std::string build_summary_prompt(const Post& post) {
  return summary_template().system_preamble + "\n\nPost: " + post.text;
}

std::string normalize_response(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool keep = c >= 0x80 || std::isalnum(c);
    out.push_back(keep ? static_cast<char>(std::tolower(c)) : ' ');
  }
  return collapse_whitespace(out);
}

std::optional<std::size_t> parse_label(std::string_view response,
                                       std::span<const std::string> labels) {
  if (labels.empty()) throw Error(ErrorCode::InvalidConfig, "parse_label needs a label list");
  const auto norm = normalize_response(response);

  std::vector<std::string> norm_labels;
  norm_labels.reserve(labels.size());
  for (const auto& l : labels) norm_labels.push_back(normalize_response(l));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!norm_labels[i].empty() && norm == norm_labels[i]) return i;
  }

  const auto words = split_whitespace(norm);
  std::vector<bool> consumed(words.size(), false);

  // Each label may match as its word sequence or, for multi-word labels, the
  // words run together ("non depression" / "nondepression").
  struct Pattern {
    std::size_t label;
    std::vector<std::string> words;
  };
  std::vector<Pattern> patterns;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto w = split_whitespace(norm_labels[i]);
    if (w.empty()) continue;
    if (w.size() > 1) {
      std::string glued;
      for (const auto& part : w) glued += part;
      patterns.push_back({i, {glued}});
    }
    patterns.push_back({i, std::move(w)});
  }
  std::stable_sort(patterns.begin(), patterns.end(), [&](const Pattern& a, const Pattern& b) {
    const auto la = norm_labels[a.label].size();
    const auto lb = norm_labels[b.label].size();
    if (la != lb) return la > lb;
    return a.words.size() > b.words.size();
  });

  std::set<std::size_t> found;
  for (const auto& p : patterns) {
    const auto n = p.words.size();
    for (std::size_t start = 0; start + n <= words.size(); ++start) {
      bool match = true;
      for (std::size_t k = 0; k < n && match; ++k) {
        match = !consumed[start + k] && words[start + k] == p.words[k];
      }
      if (!match) continue;
      for (std::size_t k = 0; k < n; ++k) consumed[start + k] = true;
      found.insert(p.label);
    }
  }
  if (found.size() == 1) return *found.begin();
  return std::nullopt;
}

RemoteChatProvider::RemoteChatProvider(ChatProviderConfig config, std::string api_key)
    : config_(std::move(config)) {
  endpoint_.base_url = config_.base_url;
  endpoint_.api_key = std::move(api_key);
  endpoint_.timeout = config_.timeout;
}

std::string RemoteChatProvider::complete(const std::string& prompt) {
  nlohmann::json body;
  body["model"] = config_.model_name;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = 0;
  const auto response = post_json(endpoint_, "/chat/completions", body, config_.retry);
  try {
    const auto& content = response.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string{};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable,
                std::string("chat response missing choices[0].message.content: ") + e.what());
  }
}

std::string prompt_hash(std::string_view prompt) { return hash_hex(prompt); }

MockChatProvider::MockChatProvider(std::map<std::string, std::string> responses,
                                   std::optional<std::string> fallback, std::string model_name)
    : responses_(std::move(responses)),
      fallback_(std::move(fallback)),
      model_name_(std::move(model_name)) {}

MockChatProvider MockChatProvider::from_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::InvalidConfig, "mock fixture " + path.string() + " not found");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig,
                "mock fixture " + path.string() + " is not valid JSON: " + e.what());
  }
  std::map<std::string, std::string> responses;
  if (auto it = j.find("responses"); it != j.end()) {
    responses = it->get<std::map<std::string, std::string>>();
  }
  std::optional<std::string> fallback;
  if (auto it = j.find("default"); it != j.end() && it->is_string()) {
    fallback = it->get<std::string>();
  }
  return MockChatProvider(std::move(responses), std::move(fallback),
                          j.value("model", std::string("mock")));
}

std::string MockChatProvider::complete(const std::string& prompt) {
  if (auto it = responses_.find(prompt_hash(prompt)); it != responses_.end()) return it->second;
  if (fallback_) return *fallback_;
  throw Error(ErrorCode::ProviderUnavailable,
              "mock fixture has no response for prompt " + prompt_hash(prompt));
}

std::string serialize_mock_fixture(const std::map<std::string, std::string>& responses,
                                   const std::optional<std::string>& fallback,
                                   const std::string& model_name) {
  nlohmann::ordered_json j;
  j["model"] = model_name;
  if (fallback) j["default"] = *fallback;
  j["responses"] = responses;
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

FunctionChatProvider::FunctionChatProvider(std::function<std::string(const std::string&)> fn,
                                           std::string model_name)
    : fn_(std::move(fn)), model_name_(std::move(model_name)) {}

std::unique_ptr<ChatProvider> make_chat_provider(const ChatProviderConfig& config) {
  if (config.kind == ChatProviderConfig::Kind::Mock) {
    return std::make_unique<MockChatProvider>(MockChatProvider::from_file(config.mock_fixture));
  }
  auto resolved = config;
  if (resolved.base_url.empty()) resolved.base_url = env_or_empty("LLM_BASE_URL");
  if (resolved.base_url.empty()) {
    throw Error(ErrorCode::InvalidConfig, "remote LLM needs a base_url or LLM_BASE_URL");
  }
  return std::make_unique<RemoteChatProvider>(resolved, env_or_empty("LLM_API_KEY"));
}

std::string response_cache_key(std::string_view model, std::string_view prompt) {
  return hash_fields({model, prompt});
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
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
      const auto j = nlohmann::json::parse(line);
      const auto key = j.at("key").get<std::string>();
      const auto response = j.at("response").get<std::string>();
      if (j.at("checksum").get<std::string>() != hash_hex(response)) {
        throw Error(ErrorCode::CorruptCacheEntry, "checksum mismatch");
      }
      entries_[key] = response;
      kept.append(line);
      kept.push_back('\n');
    } catch (const std::exception&) {
      ++evicted_;
    }
  }
  if (evicted_ > 0) write_file_atomic(path_, kept);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const std::string& key, const std::string& model,
                        const std::string& response) {
  nlohmann::ordered_json j;
  j["key"] = key;
  j["model"] = model;
  j["checksum"] = hash_hex(response);
  j["response"] = response;
  const auto line = j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::unique_lock lock(mutex_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::UnwritableOutput, "cannot append to " + path_.string());
  out << line << '\n';
  entries_[key] = response;
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

LlmRunner::LlmRunner(ChatProvider& provider, ResponseCache* cache, std::size_t concurrency)
    : provider_(provider), cache_(cache), concurrency_(std::max<std::size_t>(1, concurrency)) {}

std::vector<LlmOutcome> LlmRunner::run(std::span<const Post> posts,
                                       const std::function<std::string(const Post&)>& build,
                                       const std::function<void(LlmOutcome&)>& parse) {
  std::vector<LlmOutcome> out(posts.size());
  std::atomic<std::size_t> hits{0}, calls{0}, failures{0};
  const auto& model = provider_.model_name();

  parallel_for(posts.size(), concurrency_, [&](std::size_t i) {
    auto& outcome = out[i];
    outcome.post_id = posts[i].id;
    const auto prompt = build(posts[i]);
    const auto key = response_cache_key(model, prompt);
    if (cache_) {
      if (auto cached = cache_->get(key)) {
        ++hits;
        outcome.raw_response = std::move(*cached);
        parse(outcome);
        return;
      }
    }
    ++calls;
    try {
      outcome.raw_response = provider_.complete(prompt);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ProviderUnavailable) throw;
      ++failures;
      outcome.status = LlmOutcome::Status::Failed;
      outcome.error = e.what();
      return;
    }
    if (cache_) cache_->put(key, model, outcome.raw_response);
    parse(outcome);
  });

  stats_.requested += posts.size();
  stats_.cache_hits += hits.load();
  stats_.provider_calls += calls.load();
  stats_.failures += failures.load();
  for (const auto& o : out) {
    if (o.status == LlmOutcome::Status::Unparseable) ++stats_.unparseable;
  }
  return out;
}

std::vector<LlmOutcome> LlmRunner::classify_zero_shot(TaskKind task, std::span<const Post> posts) {
  const auto& labels = task_labels(task);
  return run(
      posts, [task](const Post& p) { return build_zero_shot_prompt(task, p); },
      [&labels](LlmOutcome& o) {
        o.label = parse_label(o.raw_response, labels);
        o.status = o.label ? LlmOutcome::Status::Label : LlmOutcome::Status::Unparseable;
      });
}

std::vector<LlmOutcome> LlmRunner::summarize(std::span<const Post> posts) {
  return run(
      posts, [](const Post& p) { return build_summary_prompt(p); },
      [](LlmOutcome& o) {
        if (collapse_whitespace(o.raw_response).empty()) {
          o.status = LlmOutcome::Status::Unparseable;
        } else {
          o.status = LlmOutcome::Status::Summary;
          o.summary = o.raw_response;
        }
      });
}

}  // namespace mhtc
