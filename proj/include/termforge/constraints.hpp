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

#ifndef TERMFORGE_CONSTRAINTS_HPP_
#define TERMFORGE_CONSTRAINTS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "termforge/types.hpp"

namespace termforge::constraints {

enum class Mode { kAlways, kNeGated };

std::string mode_name(Mode mode);
Mode parse_mode(const std::string& name);

struct Constraint {
  Sentence source;
  Sentence target;
  Mode mode = Mode::kAlways;

  bool operator==(const Constraint&) const = default;
};

class ConstraintSet {
 public:
  const std::vector<Constraint>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  // TSV `source TAB target TAB mode`; exact duplicate rows collapse to the
  // first occurrence; malformed rows report their 1-based line number.
  static ConstraintSet load(const std::string& path);
  static ConstraintSet from_lines(const std::vector<std::string>& lines);

  std::vector<std::string> to_lines() const;
  void save(const std::string& path) const;

  void add(Constraint c);  // validates; silently skips exact duplicates

 private:
  std::vector<Constraint> items_;
};

// Token span [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  auto operator<=>(const Span&) const = default;
  bool contains(const Span& other) const {
    return begin <= other.begin && other.end <= end;
  }
};

// One constraint-source occurrence in a sentence.
struct Match {
  std::size_t constraint_index = 0;
  Span span;
};

// Rule-based named-entity tagger: gazetteer longest-match first, then maximal
// runs of capitalized tokens over the remaining positions (sentence-initial
// tokens only match via the gazetteer).
class NeTagger {
 public:
  NeTagger() = default;
  explicit NeTagger(std::vector<Sentence> gazetteer);

  static NeTagger load_gazetteer(const std::string& path);  // one entry per line

  // Disjoint spans, sorted by position.
  std::vector<Span> tag(const Sentence& sentence) const;

 private:
  std::vector<Sentence> gazetteer_;  // longest first, then lexicographic
};

// Every occurrence of an `always` constraint source as a contiguous token
// subsequence; one Match per distinct span, sorted by (span, constraint).
std::vector<Match> match_always(const Sentence& sentence, const ConstraintSet& set);

// `ne_gated` constraints additionally require the match span to lie inside a
// tagged named-entity span.
std::vector<Match> match_ne_gated(const Sentence& sentence, const ConstraintSet& set,
                                  const NeTagger& tagger);

// All applicable constraints of both modes for one sentence.
std::vector<Match> match_all(const Sentence& sentence, const ConstraintSet& set,
                             const NeTagger& tagger);

// Occurrence counts of tagged NE phrases over a corpus.
std::map<Sentence, std::uint64_t> count_ne_phrases(const std::vector<Sentence>& corpus,
                                                   const NeTagger& tagger);

// Copy constraints (p, p, ne_gated) for phrases frequent on both sides.
std::vector<Constraint> extract_copy_candidates(
    const std::map<Sentence, std::uint64_t>& src_counts,
    const std::map<Sentence, std::uint64_t>& tgt_counts, std::uint64_t min_count = 9);

}  // namespace termforge::constraints

#endif  // TERMFORGE_CONSTRAINTS_HPP_
