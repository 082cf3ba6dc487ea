// Writes the synthetic six-source binary corpus, mock LLM fixture and
// config.json used by the test suites into a directory.
//
//   mhtc_make_fixture <dir> [posts-per-class]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "support/fixtures.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <dir> [posts-per-class]\n", argv[0]);
    return 2;
  }
  const std::size_t per_class = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 100;
  const auto fx = testing::write_binary_fixture(argv[1], per_class);
  std::printf("wrote %zu posts and %s\n", fx.posts, fx.config_path.string().c_str());
  return 0;
}
