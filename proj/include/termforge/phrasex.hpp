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

#ifndef TERMFORGE_PHRASEX_HPP_
#define TERMFORGE_PHRASEX_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "termforge/align.hpp"
#include "termforge/ngram_lm.hpp"
#include "termforge/types.hpp"

namespace termforge::phrasex {

struct PhrasePair {
  Sentence source;
  Sentence target;
  std::uint64_t count = 1;
  double prob = 1.0;

  auto key() const { return std::tie(source, target); }
};

// Entries sorted by (source, target). Probabilities are relative frequencies
// p(target|source) at build time; filters keep the pre-filter values.
class PhraseTable {
 public:
  const std::vector<PhrasePair>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Targets stored for one source phrase (empty when absent).
  std::vector<PhrasePair> targets_of(const Sentence& source) const;

  static PhraseTable from_pairs(std::vector<PhrasePair> pairs);  // sorts, rejects dups

  void save(const std::string& path) const;  // TSV: source TAB target TAB count TAB prob
  static PhraseTable load(const std::string& path);

 private:
  std::vector<PhrasePair> entries_;
};

inline constexpr std::size_t kDefaultMaxPhraseLen = 7;

// All alignment-consistent phrase pairs up to max_len tokens per side: every
// link from the source span lands in the target span and vice versa, at least
// one link inside, plus the standard unaligned-target-boundary extensions.
// Returned sorted and deduplicated; count/prob fields are left at 1.
std::vector<PhrasePair> extract_phrases(const Sentence& src, const Sentence& tgt,
                                        const align::Alignment& alignment,
                                        std::size_t max_len = kDefaultMaxPhraseLen);

// Corpus-level counts (one per sentence pair containing the phrase pair) and
// relative-frequency probabilities.
PhraseTable build_phrase_table(const align::Bitext& bitext,
                               const std::vector<align::Alignment>& alignments,
                               std::size_t max_len = kDefaultMaxPhraseLen);

// Keeps pairs with prob strictly greater than the threshold; at 0.5 each
// source retains at most one target.
PhraseTable filter_by_prob(const PhraseTable& table, double threshold = 0.5);

// Keeps the k pairs whose source side scores lowest under Moore-Lewis
// (ties by source then target phrase order). k beyond the table size keeps
// everything and warns on stderr.
PhraseTable filter_by_domain(const PhraseTable& table, const ngram_lm::NGramModel& in_lm,
                             const ngram_lm::NGramModel& out_lm, std::size_t k = 2000);

// Keeps pairs whose target phrase occurs at least min_count times as a
// contiguous token subsequence of the monolingual corpus.
PhraseTable filter_by_occurrence(const PhraseTable& table,
                                 const std::vector<Sentence>& target_mono,
                                 std::uint64_t min_count = 1);

// TSV lines "source TAB target TAB mode" for the constraints module.
std::vector<std::string> to_constraint_lines(const PhraseTable& table,
                                             const std::string& mode);

}  // namespace termforge::phrasex

#endif  // TERMFORGE_PHRASEX_HPP_
