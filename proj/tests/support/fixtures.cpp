#include "fixtures.hpp"

#include <map>
#include <string>
#include <vector>

#include "mhtc/llm.hpp"
#include "mhtc/util.hpp"

namespace testing {

namespace {

const std::vector<std::string> kDepressionMarkers{
    "i",     "me",       "my",       "myself",  "sad",     "hopeless", "empty",     "tired",
    "numb",  "worthless", "lonely",  "crying",  "exhausted", "insomnia", "guilty", "miserable"};
const std::vector<std::string> kControlMarkers{
    "we",   "our",   "us",     "friends", "family", "happy", "fun",   "great",
    "proud", "laugh", "told",  "said",    "people", "they",  "good",  "nice"};
const std::vector<std::string> kFiller{"the",  "a",     "and",  "today", "was",   "then", "at",
                                       "work", "home",  "week", "about", "after", "when", "on"};

struct SourcePlan {
  std::string source;
  std::string raw_label;
};

// Letters only, so the code word never matches a lexicon entry or a digit rule.
std::string code_word(std::size_t n) {
  std::string s = "zq";
  do {
    s += static_cast<char>('a' + n % 26);
    n /= 26;
  } while (n);
  return s;
}

std::string make_text(mhtc::SeededRng& rng, const std::vector<std::string>& markers,
                      std::size_t serial) {
  const std::size_t length = 12 + rng.uniform_index(5);
  const std::size_t n_markers = 5 + rng.uniform_index(3);
  std::vector<std::string> words;
  for (std::size_t k = 0; k < n_markers; ++k) words.push_back(markers[rng.uniform_index(markers.size())]);
  while (words.size() + 1 < length) words.push_back(kFiller[rng.uniform_index(kFiller.size())]);
  words.push_back(code_word(serial));
  rng.shuffle(words);
  std::string text;
  for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
  return text;
}

std::string csv_field(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

BinaryFixture write_binary_fixture(const std::filesystem::path& root, std::size_t posts_per_class,
                                   std::uint64_t seed) {
  std::filesystem::create_directories(root / "data");
  const std::vector<SourcePlan> depression_sources{{"MHB", "depression"},
                                                   {"CAMS", "jobs and career"},
                                                   {"HelaDepDet", "moderate"},
                                                   {"RMHD", "depression"},
                                                   {"DepressionEmo", "sadness"}};
  mhtc::SeededRng rng(seed);
  std::map<std::string, std::string> files;
  std::map<std::string, std::string> responses;
  std::size_t serial = 0;

  auto add_post = [&](const std::string& source, const std::string& raw, bool depressed,
                      std::size_t row) {
    auto text = make_text(rng, depressed ? kDepressionMarkers : kControlMarkers, serial++);
    auto& file = files[source];
    if (file.empty()) file = "text,label\n";
    file += csv_field(text) + "," + csv_field(raw) + "\n";
    mhtc::Post post{source + ":" + std::to_string(row), text, source, raw};
    responses[mhtc::prompt_hash(mhtc::build_zero_shot_prompt(mhtc::TaskKind::Binary, post))] =
        depressed ? "Depression" : "Non-depression";
    responses[mhtc::prompt_hash(mhtc::build_summary_prompt(post))] =
        depressed ? "The user feels sad, hopeless and exhausted, with a lonely and numb tone."
                  : "The user sounds happy and proud, talking about friends and family in a good mood.";
  };

  for (std::size_t i = 0; i < posts_per_class; ++i) {
    const auto& plan = depression_sources[i % depression_sources.size()];
    add_post(plan.source, plan.raw_label, true, i / depression_sources.size());
  }
  for (std::size_t i = 0; i < posts_per_class; ++i) add_post("AITA", "NTA", false, i);

  nlohmann::json datasets = nlohmann::json::object();
  for (const auto& [source, content] : files) {
    const auto rel = "data/" + source + ".csv";
    mhtc::write_file_atomic(root / rel, content);
    datasets[source] = {{"path", rel}, {"format", "csv"}};
  }
  mhtc::write_file_atomic(root / "mock_llm.json",
                          mhtc::serialize_mock_fixture(responses, std::nullopt, "gpt-4o"));

  BinaryFixture fx;
  fx.root = root;
  fx.config_path = root / "config.json";
  fx.posts = 2 * posts_per_class;
  fx.config = {
      {"schema_version", 1},
      {"task", "binary"},
      {"method", "logreg"},
      {"features", "text_liwc"},
      {"seed", 42},
      {"offline", true},
      {"lexicon", (std::filesystem::path(MHTC_SOURCE_DIR) / "data/lexicon/open_affect.dic").string()},
      {"output_dir", "run"},
      {"cache_dir", "cache"},
      {"datasets", datasets},
      {"embeddings", {{"provider", "stub"}, {"dimension", 768}}},
      {"llm", {{"provider", "mock"}, {"model", "gpt-4o"}, {"fixture", "mock_llm.json"}}}};
  save_config(fx);
  return fx;
}

mhtc::RunConfig save_config(const BinaryFixture& fixture) {
  mhtc::write_file_atomic(fixture.config_path, fixture.config.dump(2) + "\n");
  return mhtc::load_run_config(fixture.config_path);
}

}  // namespace testing
