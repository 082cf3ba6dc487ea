#include "mhtc/lexicon.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "mhtc/error.hpp"
#include "mhtc/util.hpp"

namespace mhtc {

std::vector<std::string> Lexicon::category_names() const {
  std::vector<std::string> out;
  out.reserve(categories.size());
  for (const auto& c : categories) out.push_back(c.name);
  return out;
}

std::size_t Lexicon::index_of(int id) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i].id == id) return i;
  }
  throw Error(ErrorCode::UnknownCategoryId, "category " + std::to_string(id));
}

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    auto piece = trim(line.substr(start, tab == std::string_view::npos ? line.npos : tab - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

bool parse_int(std::string_view s, int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Lexicon parse_lexicon(std::string_view content) {
  Lexicon lex;
  std::vector<std::string> lines;
  {
    std::size_t pos = 0;
    while (pos <= content.size()) {
      auto nl = content.find('\n', pos);
      if (nl == std::string_view::npos) nl = content.size();
      auto line = content.substr(pos, nl - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.emplace_back(line);
      pos = nl + 1;
    }
  }

  std::size_t i = 0;
  while (i < lines.size() && trim(lines[i]).empty()) ++i;
  if (i == lines.size()) throw Error(ErrorCode::EmptyLexicon, "no content");
  if (trim(lines[i]) != "%") throw Error(ErrorCode::MalformedHeader, "expected opening '%' line");
  ++i;

  bool closed = false;
  for (; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line == "%") {
      closed = true;
      ++i;
      break;
    }
    if (line.empty()) continue;
    auto fields = split_tabs(lines[i]);
    int id = 0;
    if (fields.size() != 2 || !parse_int(fields[0], id)) {
      throw Error(ErrorCode::MalformedHeader, "bad category line '" + line + "'");
    }
    for (const auto& c : lex.categories) {
      if (c.id == id) throw Error(ErrorCode::MalformedHeader, "duplicate category id " + fields[0]);
    }
    lex.categories.push_back({id, fields[1]});
  }
  if (!closed) throw Error(ErrorCode::MalformedHeader, "header is not closed by '%'");
  if (lex.categories.empty()) throw Error(ErrorCode::EmptyLexicon, "no categories declared");

  for (; i < lines.size(); ++i) {
    auto fields = split_tabs(lines[i]);
    if (fields.empty()) continue;
    if (fields.size() < 2) {
      throw Error(ErrorCode::MalformedHeader, "entry without categories: '" + lines[i] + "'");
    }
    std::string word = ascii_lower(fields[0]);
    const bool is_stem = word.size() > 1 && word.back() == '*';
    if (is_stem) word.pop_back();
    auto& target = is_stem ? lex.stem_entries[word] : lex.exact_entries[word];
    for (std::size_t f = 1; f < fields.size(); ++f) {
      int id = 0;
      if (!parse_int(fields[f], id)) {
        throw Error(ErrorCode::UnknownCategoryId, "non-numeric id '" + fields[f] + "'");
      }
      lex.index_of(id);
      target.insert(id);
    }
  }
  if (lex.exact_entries.empty() && lex.stem_entries.empty()) {
    throw Error(ErrorCode::EmptyLexicon, "no word entries");
  }
  return lex;
}

Lexicon load_lexicon(const std::string& path) { return parse_lexicon(read_file(path)); }

std::string serialize_lexicon(const Lexicon& lex) {
  std::ostringstream out;
  out << "%\n";
  for (const auto& c : lex.categories) out << c.id << '\t' << c.name << '\n';
  out << "%\n";
  auto emit = [&](const std::map<std::string, std::set<int>>& entries, bool stem) {
    for (const auto& [word, ids] : entries) {
      out << word << (stem ? "*" : "");
      for (int id : ids) out << '\t' << id;
      out << '\n';
    }
  };
  emit(lex.exact_entries, false);
  emit(lex.stem_entries, true);
  return out.str();
}

namespace {

enum class CharClass { Letter, Apostrophe, Separator };

// Classifies the code point starting at text[i] and reports its byte length.
CharClass classify(std::string_view text, std::size_t i, std::size_t& len) {
  const auto c = static_cast<unsigned char>(text[i]);
  len = 1;
  if (c < 0x80) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return CharClass::Letter;
    if (c == '\'') return CharClass::Apostrophe;
    return CharClass::Separator;
  }
  if ((c & 0xE0) == 0xC0) len = 2;
  else if ((c & 0xF0) == 0xE0) len = 3;
  else if ((c & 0xF8) == 0xF0) len = 4;
  len = std::min(len, text.size() - i);
  const auto cp = text.substr(i, len);
  if (cp == "\xE2\x80\x99" || cp == "\xE2\x80\x98") return CharClass::Apostrophe;
  // Typographic quotes, dashes, ellipsis, no-break space.
  if (cp == "\xE2\x80\x9C" || cp == "\xE2\x80\x9D" || cp == "\xE2\x80\x93" ||
      cp == "\xE2\x80\x94" || cp == "\xE2\x80\xA6" || cp == "\xC2\xA0") {
    return CharClass::Separator;
  }
  return CharClass::Letter;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  bool pending_apostrophe = false;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
    pending_apostrophe = false;
  };
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = 1;
    switch (classify(text, i, len)) {
      case CharClass::Letter:
        if (pending_apostrophe) current.push_back('\'');
        pending_apostrophe = false;
        current += ascii_lower(text.substr(i, len));
        break;
      case CharClass::Apostrophe:
        // Only kept when it sits between two letters.
        if (current.empty() || pending_apostrophe) flush();
        else pending_apostrophe = true;
        break;
      case CharClass::Separator:
        flush();
        break;
    }
    i += len;
  }
  flush();
  return tokens;
}

std::vector<double> extract_features(const Lexicon& lex, std::string_view text) {
  if (lex.categories.empty()) throw Error(ErrorCode::EmptyLexicon, "lexicon has no categories");
  std::vector<double> counts(lex.dimension(), 0.0);
  const auto tokens = tokenize(text);
  if (tokens.empty()) return counts;

  std::set<int> hit;
  for (const auto& tok : tokens) {
    hit.clear();
    if (auto it = lex.exact_entries.find(tok); it != lex.exact_entries.end()) {
      hit.insert(it->second.begin(), it->second.end());
    }
    // Longest stem that prefixes the token.
    for (std::size_t len = tok.size(); len > 0; --len) {
      auto it = lex.stem_entries.find(tok.substr(0, len));
      if (it != lex.stem_entries.end()) {
        hit.insert(it->second.begin(), it->second.end());
        break;
      }
    }
    for (int id : hit) counts[lex.index_of(id)] += 1.0;
  }
  const double total = static_cast<double>(tokens.size());
  for (auto& v : counts) v /= total;
  return counts;
}

std::string features_csv(const Lexicon& lex, std::span<const std::string> row_ids,
                         std::span<const std::vector<double>> rows) {
  if (row_ids.size() != rows.size()) {
    throw Error(ErrorCode::LengthMismatch, "row ids and feature rows differ in length");
  }
  std::ostringstream out;
  out.precision(17);
  out << "id";
  for (const auto& c : lex.categories) out << ',' << c.name;
  out << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != lex.dimension()) {
      throw Error(ErrorCode::DimensionMismatch, "feature row width differs from lexicon");
    }
    out << '"' << row_ids[r] << '"';
    for (double v : rows[r]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

Standardizer fit_standardizer(std::span<const std::vector<double>> rows) {
  if (rows.size() < 2) {
    throw Error(ErrorCode::InsufficientRows, "standardizer needs at least 2 rows");
  }
  const std::size_t d = rows.front().size();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.std.assign(d, 0.0);
  s.fitted_on = rows.size();
  for (const auto& row : rows) {
    if (row.size() != d) throw Error(ErrorCode::DimensionMismatch, "ragged feature rows");
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j];
  }
  const double n = static_cast<double>(rows.size());
  for (auto& m : s.mean) m /= n;
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - s.mean[j];
      s.std[j] += diff * diff;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const bool constant = std::all_of(rows.begin(), rows.end(),
                                      [&](const auto& row) { return row[j] == rows.front()[j]; });
    if (constant) {
      s.mean[j] = rows.front()[j];
      s.std[j] = 0.0;
    } else {
      s.std[j] = std::sqrt(s.std[j] / n);
    }
  }
  return s;
}

std::vector<double> apply_standardizer(const Standardizer& s, std::span<const double> x) {
  if (x.size() != s.mean.size()) {
    throw Error(ErrorCode::DimensionMismatch, "standardizer has " + std::to_string(s.mean.size()) +
                                                  " dimensions, input has " +
                                                  std::to_string(x.size()));
  }
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (s.std[j] > 0.0) out[j] = (x[j] - s.mean[j]) / s.std[j];
  }
  return out;
}

}  // namespace mhtc
