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

#ifndef TERMFORGE_NGRAM_LM_HPP_
#define TERMFORGE_NGRAM_LM_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "termforge/types.hpp"

namespace termforge::ngram_lm {

// Interpolated absolute-discounting n-gram model:
//   p(w|c) = max(count(c,w) - d, 0)/count(c) + lambda(c) * p(w|shorter c)
// bottoming out at a uniform distribution over vocab + {UNK, EOS}. Every
// probability is positive and each context's distribution over
// vocab + {UNK, EOS} sums to 1.
class NGramModel {
 public:
  NGramModel() = default;

  std::size_t order() const { return order_; }
  double discount() const { return discount_; }
  // Seen tokens, sorted; excludes the reserved UNK/BOS/EOS symbols.
  const std::vector<Token>& vocab() const { return vocab_; }

  // Natural-log p(token | last order-1 entries of context). Unseen tokens
  // (and the reserved strings themselves) fold to UNK; kEosToken queries the
  // end-of-sentence event.
  double log_prob(const Sentence& context, const Token& token) const;
  double prob(const Sentence& context, const Token& token) const;

  void save(const std::string& path) const;
  static NGramModel load(const std::string& path);

 private:
  using Ids = std::u32string;  // packed token ids

  static constexpr char32_t kUnkId = 0, kBosId = 1, kEosId = 2;

  char32_t intern(const Token& token) const;  // unseen -> kUnkId
  double score_ids(const Ids& context, char32_t w) const;
  std::string render_ids(const Ids& ids) const;

  std::size_t order_ = 0;
  double discount_ = 0;
  std::vector<Token> vocab_;
  std::unordered_map<Token, char32_t> token_ids_;
  double log_uniform_ = 0;  // ln 1/(|vocab|+2)
  // log_probs_[k]: ln p for stored k-grams, k = 1..order.
  std::vector<std::unordered_map<Ids, double>> log_probs_;
  // log_lambdas_[k]: ln lambda for seen contexts of length k, k = 1..order-1.
  std::vector<std::unordered_map<Ids, double>> log_lambdas_;

  friend NGramModel lm_train(const std::vector<Sentence>&, std::size_t, double);
};

NGramModel lm_train(const std::vector<Sentence>& corpus, std::size_t order = 3,
                    double discount = 0.4);

// Nats per token, EOS transition included: -(1/(|s|+1)) * sum log p.
double cross_entropy(const NGramModel& model, const Sentence& sentence);

// Cross-entropy difference; lower = more in-domain.
double moore_lewis(const NGramModel& in_lm, const NGramModel& out_lm,
                   const Sentence& sentence);

// Indices of the n sentences with smallest Moore-Lewis score (ties by line
// order), ascending. n beyond the corpus size selects everything and warns
// on stderr.
std::vector<std::size_t> select_top_indices(const std::vector<Sentence>& corpus,
                                            const NGramModel& in_lm,
                                            const NGramModel& out_lm, std::size_t n);

// Line-level wrapper over select_top_indices; lines are whitespace-tokenized.
std::vector<std::string> select_top(const std::vector<std::string>& lines,
                                    const NGramModel& in_lm, const NGramModel& out_lm,
                                    std::size_t n);

}  // namespace termforge::ngram_lm

#endif  // TERMFORGE_NGRAM_LM_HPP_
