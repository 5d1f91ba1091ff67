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

#ifndef TERMFORGE_TEXTPROC_HPP_
#define TERMFORGE_TEXTPROC_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "termforge/types.hpp"

namespace termforge::textproc {

// Canonicalizes raw text: composes combining accents over Latin base letters
// (NFC on the range the toolkit's corpora can contain), folds typographic
// quotes/dashes/ellipses to ASCII per a fixed table, collapses whitespace
// runs to single spaces and trims. Throws uni::Utf8Error on malformed input.
std::string normalize(const std::string& text);

// Whitespace split, then punctuation characters become separate tokens.
// Exceptions: '-' flanked by word characters (hyphenated names stay whole)
// and '.'/',' flanked by digits (decimals stay whole).
Sentence tokenize(const std::string& text);

// Joins tokens with spaces, reattaching punctuation (no space before closing
// or clause punctuation, none after opening brackets, apostrophes bind both
// sides). tokenize of the result yields the same token list back.
std::string detokenize(const Sentence& tokens);

class TruecaseModel {
 public:
  // Returns true and fills *cased when the lowercased form is known.
  bool lookup(const std::string& lower, std::string* cased) const;
  std::size_t size() const { return map_.size(); }
  const std::map<std::string, std::pair<std::string, std::uint64_t>>& entries() const {
    return map_;
  }

  void save(const std::string& path) const;  // TSV: lower TAB cased TAB count
  static TruecaseModel load(const std::string& path);

  void set(const std::string& lower, const std::string& cased, std::uint64_t count);

 private:
  std::map<std::string, std::pair<std::string, std::uint64_t>> map_;
};

// Learns the preferred casing of each lowercased form from non-sentence-
// initial occurrences only; ties go to the lexicographically smallest form.
TruecaseModel truecase_train(const std::vector<Sentence>& corpus);

// Recases only the sentence-initial token, when its lowercased form is known.
Sentence truecase_apply(const TruecaseModel& model, const Sentence& sentence);

inline constexpr const char* kBpeMarker = "</w>";

struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;
  std::string end_of_word_marker = kBpeMarker;

  void save(const std::string& path) const;  // "#bpe-v1" header, "left right" per line
  static BpeModel load(const std::string& path);
};

std::map<std::string, std::uint64_t> word_frequencies(const std::vector<Sentence>& corpus);

// Greedy pair merging over character sequences with a terminal end-of-word
// marker symbol. Most frequent adjacent pair wins, ties broken by
// lexicographically smallest pair, stop once the best count drops below 2.
BpeModel bpe_learn(const std::map<std::string, std::uint64_t>& word_freqs,
                   std::size_t n_merges);

// Splits each token into code points plus the marker, then applies merges in
// rank order (each application is one left-to-right non-overlapping pass).
Sentence bpe_apply(const BpeModel& model, const Sentence& sentence);

// Inverse of bpe_apply: concatenates subword units and splits at markers.
Sentence bpe_decode(const Sentence& tokens);

}  // namespace termforge::textproc

#endif  // TERMFORGE_TEXTPROC_HPP_
