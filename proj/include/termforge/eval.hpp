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

#ifndef TERMFORGE_EVAL_HPP_
#define TERMFORGE_EVAL_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "termforge/constraints.hpp"
#include "termforge/types.hpp"

namespace termforge::eval {

enum class Tokenization { k13a, kNone };

// The 13a scheme: split ASCII punctuation except apostrophe and hyphen,
// detach period/comma only next to non-digits, detach hyphen after a digit.
// Latin-1 punctuation passes through untouched, as in the reference scheme.
Sentence tokenize_13a(const std::string& line);

struct BleuScore {
  double score = 0.0;                  // 0..100
  std::array<double, 4> precisions{};  // percentages, clipped n-gram matches
  double brevity_penalty = 0.0;
  std::uint64_t hyp_len = 0;
  std::uint64_t ref_len = 0;
};

// Corpus-level 4-gram BLEU with clipped counts and exponential brevity
// penalty; no smoothing, so a zero match count at any order gives score 0.
BleuScore bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
               Tokenization tok = Tokenization::k13a);

// `BLEU = s (p1/p2/p3/p4, BP=b, ratio=r)`
std::string format_bleu(const BleuScore& s);

struct TermRecall {
  double recall = 1.0;
  std::uint64_t applied = 0;
  std::uint64_t satisfied = 0;
  bool vacuous = false;  // no constraints were applied anywhere
  // "source<TAB>target" -> (satisfied, applied)
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> per_constraint;
};

// Fraction of applied constraints whose target phrase occurs contiguously in
// the corresponding hypothesis.
TermRecall term_recall(const std::vector<Sentence>& hyps,
                       const std::vector<std::vector<constraints::Constraint>>& applied);

// True when `phrase` occurs as a contiguous subsequence of `tokens`.
bool contains_phrase(const Sentence& tokens, const Sentence& phrase);

}  // namespace termforge::eval

#endif  // TERMFORGE_EVAL_HPP_
