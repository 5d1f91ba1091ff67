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

#ifndef TERMFORGE_UTIL_HPP_
#define TERMFORGE_UTIL_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "termforge/types.hpp"

namespace termforge::util {

// 64-bit FNV-1a; used for content fingerprints and seed derivation.
std::uint64_t fnv1a(std::string_view data);

// splitmix64 step, for deriving independent sub-seeds from one seed.
std::uint64_t splitmix64(std::uint64_t& state);

// Unbiased bounded draw from a raw 64-bit generator (Lemire's method with
// rejection); avoids std::uniform_int_distribution, which is not portable
// across standard library implementations.
template <typename Rng>
std::uint64_t bounded_rand(Rng& rng, std::uint64_t bound) {
  if (bound == 0) return 0;
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

std::string read_file(const std::string& path);
std::vector<std::string> read_lines(const std::string& path);

// Writes to <path>.tmp then renames, so readers never observe partial files.
void atomic_write_file(const std::string& path, const std::string& content);
void atomic_write_lines(const std::string& path, const std::vector<std::string>& lines);

std::uint64_t file_fingerprint(const std::string& path);

std::vector<std::string> split_tsv(const std::string& line);
std::string join(const std::vector<std::string>& parts, const std::string& sep);

Sentence split_tokens(const std::string& line);
std::string join_tokens(const Sentence& tokens);

// Shortest-exact decimal form of a double (%.17g); round-trips bit-for-bit.
std::string format_double(double x);
double parse_double(const std::string& s);

// Number of occurrences of each phrase as a contiguous token subsequence of
// the corpus (overlapping occurrences all count).
std::map<Sentence, std::uint64_t> count_phrase_occurrences(
    const std::vector<Sentence>& corpus, const std::vector<Sentence>& phrases);

}  // namespace termforge::util

#endif  // TERMFORGE_UTIL_HPP_
