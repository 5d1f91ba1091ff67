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

#ifndef TERMFORGE_DECODER_HPP_
#define TERMFORGE_DECODER_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "termforge/align.hpp"
#include "termforge/ngram_lm.hpp"
#include "termforge/types.hpp"

namespace termforge::decoder {

// Pluggable next-token model. Implementations must be deterministic and
// safely shareable read-only across threads.
class Scorer {
 public:
  virtual ~Scorer() = default;

  // Target vocabulary, fixed for the scorer's lifetime; EOS excluded.
  virtual const std::vector<Token>& vocabulary() const = 0;

  // Log-probabilities over vocabulary() plus EOS at index vocabulary().size().
  // exp of the values must sum to 1 within 1e-6.
  virtual std::vector<double> next_logprobs(const Sentence& source,
                                            const Sentence& prefix) const = 0;
};

// Matching automaton over all constraint token sequences: a trie with
// failure links (longest proper suffix that is again a trie prefix) so
// diverging tokens abort partial matches correctly and overlapping
// constraints are all detected. At most 64 constraints per decode.
struct ConstraintState {
  int node = 0;                      // current partial-match trie node
  std::uint64_t satisfied = 0;       // bitmask over constraint ids
  std::size_t completed_tokens = 0;  // tokens_met: tokens of completed constraints

  bool operator==(const ConstraintState&) const = default;
};

class ConstraintTrie {
 public:
  // Collapses duplicates; rejects empty constraints and sets larger than 64.
  explicit ConstraintTrie(const std::vector<Sentence>& constraints);

  std::size_t constraint_count() const { return constraints_.size(); }
  std::size_t total_tokens() const { return total_tokens_; }
  const std::vector<Sentence>& constraints() const { return constraints_; }

  // Consumes one token: extends or suffix-falls-back the partial match,
  // credits completed constraints exactly once, and drops partial paths that
  // can only re-complete already-satisfied constraints.
  ConstraintState advance(const ConstraintState& state, const Token& token) const;

  bool all_satisfied(const ConstraintState& state) const;
  std::size_t depth(const ConstraintState& state) const;
  // Bank index: tokens of completed constraints plus current partial depth.
  std::size_t bank_tokens(const ConstraintState& state) const;

 private:
  struct Node {
    std::map<Token, int> children;
    int fail = 0;
    std::size_t depth = 0;
    std::vector<std::size_t> outputs;   // constraints completed on entering
    std::uint64_t through_mask = 0;     // constraints whose path uses this node
  };
  std::vector<Node> nodes_;
  std::vector<Sentence> constraints_;
  std::size_t total_tokens_ = 0;
};

struct DecodeResult {
  Sentence tokens;                 // EOS not included
  double score = 0.0;              // cumulative log-prob (EOS step included when finished)
  double normalized_score = 0.0;   // score / max(1, |tokens|)
  bool finished = false;           // false: budget ran out after meeting all constraints
  std::size_t constraints_total = 0;
  std::size_t constraints_satisfied = 0;
};

// Length-capped beam search; returns the finished hypothesis with the best
// length-normalized score (ties by lexicographic token order), else the best
// hypothesis stopped at max_len.
DecodeResult beam_search(const Scorer& scorer, const Sentence& source,
                         std::size_t max_len, std::size_t beam = 5);

// Dynamic-beam-allocation constrained search: candidates are binned by bank
// (constraint tokens satisfied) and the beam is split as evenly as possible
// over non-empty banks, remainder and unfillable slots going to higher banks.
// EOS is pruned until every constraint is satisfied, so every constraint
// appears contiguously in the output. Infeasible budgets raise an error; a
// budget that forces stopping before EOS returns finished=false.
DecodeResult constrained_beam_search(const Scorer& scorer, const Sentence& source,
                                     const std::vector<Sentence>& constraints,
                                     std::size_t max_len, std::size_t beam = 20);

// log[lambda * p_lm(w|prefix) + (1-lambda) * p_lex(w|source)], both mixture
// components renormalized over the scorer vocabulary plus EOS.
class ToyScorer : public Scorer {
 public:
  ToyScorer(align::TranslationTable lexicon, ngram_lm::NGramModel target_lm,
            double lambda);

  const std::vector<Token>& vocabulary() const override { return vocab_; }
  std::vector<double> next_logprobs(const Sentence& source,
                                    const Sentence& prefix) const override;

 private:
  align::TranslationTable lexicon_;
  ngram_lm::NGramModel lm_;
  double lambda_;
  std::vector<Token> vocab_;
};

std::unique_ptr<Scorer> make_toy_scorer(align::TranslationTable lexicon,
                                        ngram_lm::NGramModel target_lm, double lambda);

}  // namespace termforge::decoder

#endif  // TERMFORGE_DECODER_HPP_
