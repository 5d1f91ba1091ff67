// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TERMFORGE_TESTS_TEST_SUPPORT_HPP_
#define TERMFORGE_TESTS_TEST_SUPPORT_HPP_

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "termforge/types.hpp"
#include "termforge/util.hpp"

namespace ts {

// Deterministic generator for property tests.  All draws go through
// bounded_rand so results do not depend on the standard library's
// distribution implementations.
struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}

  std::uint64_t below(std::uint64_t bound) { return termforge::util::bounded_rand(eng, bound); }
  std::size_t index(std::size_t size) { return static_cast<std::size_t>(below(size)); }
  int range(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }
  bool coin(double p = 0.5) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53 < p;
  }
  double real() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[index(v.size())];
  }
};

// Fresh scratch directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("termforge_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  return termforge::util::read_file(path);
}

inline termforge::Sentence sent(std::initializer_list<const char*> words) {
  termforge::Sentence s;
  for (const char* w : words) s.emplace_back(w);
  return s;
}

// Random lowercase word over a small alphabet; short enough to collide often.
inline std::string random_word(Rng& rng, int alphabet = 6, int max_len = 5) {
  int len = rng.range(1, max_len);
  std::string w;
  for (int i = 0; i < len; ++i) w.push_back(static_cast<char>('a' + rng.index(alphabet)));
  return w;
}

inline termforge::Sentence random_sentence(Rng& rng, int max_words = 8, int alphabet = 6,
                                           int max_word_len = 5) {
  int n = rng.range(1, max_words);
  termforge::Sentence s;
  for (int i = 0; i < n; ++i) s.push_back(random_word(rng, alphabet, max_word_len));
  return s;
}

}  // namespace ts

#endif  // TERMFORGE_TESTS_TEST_SUPPORT_HPP_
