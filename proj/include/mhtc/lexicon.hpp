#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mhtc {

/// A LIWC-style dictionary: declared categories plus word and stem entries.
///
/// Category declaration order fixes the feature-vector dimension order.
/// Stems are stored without their trailing `*`.
struct Lexicon {
  struct Category {
    int id = 0;
    std::string name;
    bool operator==(const Category&) const = default;
  };

  std::vector<Category> categories;
  std::map<std::string, std::set<int>> exact_entries;
  std::map<std::string, std::set<int>> stem_entries;

  std::size_t dimension() const { return categories.size(); }
  std::vector<std::string> category_names() const;
  /// Position of a category id in the feature vector; throws UnknownCategoryId.
  std::size_t index_of(int id) const;

  bool operator==(const Lexicon&) const = default;
};

/// Parses the `%`-delimited header format:
///
///     %
///     1<TAB>negemo
///     2<TAB>cogproc
///     %
///     sad<TAB>1
///     cry*<TAB>1
///
/// Duplicate word lines merge their category sets.
Lexicon parse_lexicon(std::string_view content);
Lexicon load_lexicon(const std::string& path);
std::string serialize_lexicon(const Lexicon& lex);

/// Lowercased runs of letters with internal apostrophes. Digits and punctuation split tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Per-category fraction of tokens matched; all zeros for a token-free text.
std::vector<double> extract_features(const Lexicon& lex, std::string_view text);

/// Category names as header, one row per post id.
std::string features_csv(const Lexicon& lex, std::span<const std::string> row_ids,
                         std::span<const std::vector<double>> rows);

/// Per-dimension z-score parameters using the population standard deviation.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;
  std::size_t fitted_on = 0;
};

Standardizer fit_standardizer(std::span<const std::vector<double>> rows);

/// (x - mean) / std per dimension; zero-variance dimensions map to 0.
std::vector<double> apply_standardizer(const Standardizer& s, std::span<const double> x);

}  // namespace mhtc
