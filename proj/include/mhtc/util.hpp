#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace mhtc {

// 64-bit FNV-1a. Stable across processes and platforms; used for cache keys,
// stub-embedding seeds, checksums and split fingerprints.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
std::string hash_hex(std::string_view data);

/// Hash of several fields joined with a NUL separator so ("ab","c") != ("a","bc").
std::string hash_fields(std::initializer_list<std::string_view> fields);

/// Seeded generator whose every derived draw is platform independent.
/// std::mt19937_64 output is fully specified; the std distributions are not,
/// so integer and normal draws are implemented here.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Uniform real in [0, 1) with 53 random bits.
  double uniform01();
  /// Standard normal via the Box-Muller transform.
  double standard_normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives a named sub-seed from a root seed (e.g. "split", "forest", "stub").
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

std::string trim(std::string_view s);
/// Trims and collapses internal whitespace runs to single spaces.
std::string collapse_whitespace(std::string_view s);
std::string ascii_lower(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);

std::string read_file(const std::filesystem::path& path);
/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace mhtc
