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

#ifndef TERMFORGE_ALIGN_HPP_
#define TERMFORGE_ALIGN_HPP_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "termforge/types.hpp"

namespace termforge::align {

struct Link {
  std::uint32_t src;
  std::uint32_t tgt;
  auto operator<=>(const Link&) const = default;
};

// Sorted, duplicate-free set of links.
using Alignment = std::vector<Link>;

using Bitext = std::vector<std::pair<Sentence, Sentence>>;

// p(target | source) rows, including a <NULL> source row.
class TranslationTable {
 public:
  double prob(const Token& src, const Token& tgt) const;  // 0 when absent
  const std::map<Token, std::map<Token, double>>& rows() const { return rows_; }
  std::size_t target_vocab_size() const { return target_vocab_.size(); }

  void set(const Token& src, const Token& tgt, double p);

  // p(source | target): transpose with per-target renormalization.
  TranslationTable reversed() const;

  void save(const std::string& path) const;  // TSV: src TAB tgt TAB p
  static TranslationTable load(const std::string& path);

 private:
  std::map<Token, std::map<Token, double>> rows_;
  std::set<Token> target_vocab_;
};

// Fixed prior mass reserved for the NULL source token during EM and Viterbi
// (the value hard-wired by the alignment tool this reimplements).
inline constexpr double kNullProb = 0.08;
inline constexpr double kDefaultTension = 4.0;

struct DiagonalModel {
  TranslationTable table;
  double tension = kDefaultTension;
  double null_prob = kNullProb;
};

// IBM Model 1 EM. Position prior: null_prob for NULL, (1-null_prob)/n shared
// by the n real source positions. iteration_loglik, when given, receives the
// corpus log-likelihood under the parameters entering each iteration
// (non-decreasing).
TranslationTable train_model1(const Bitext& bitext, std::size_t iterations,
                              double null_prob = kNullProb,
                              std::vector<double>* iteration_loglik = nullptr);

// Same EM with the real-position prior reweighted by exp(-tension*|i/n - j/m|)
// (normalized over real positions); tension 0 reduces exactly to Model 1.
DiagonalModel train_diag(const Bitext& bitext, std::size_t iterations, double tension,
                         double null_prob = kNullProb,
                         std::vector<double>* iteration_loglik = nullptr);

// Per target position, link to the posterior-argmax source position. NULL
// wins only when strictly better than every real position; ties among real
// positions keep the smallest index. Source tokens without a table row count
// as uniformly translatable; a target token with zero posterior everywhere
// stays NULL-aligned.
Alignment viterbi_align(const TranslationTable& table, const Sentence& src,
                        const Sentence& tgt, double null_prob = kNullProb);
Alignment viterbi_align(const DiagonalModel& model, const Sentence& src,
                        const Sentence& tgt);

enum class Heuristic { kIntersection, kUnion, kGrowDiagFinalAnd };

Heuristic parse_heuristic(const std::string& name);

// forward = source-to-target Viterbi, reverse = target-to-source links already
// flipped into (src,tgt) indexing.
Alignment symmetrize(const Alignment& forward, const Alignment& reverse, Heuristic h,
                     std::size_t src_len, std::size_t tgt_len);

// Corpus log-likelihood of the bitext under a table with the Model 1 prior.
double log_likelihood(const TranslationTable& table, const Bitext& bitext,
                      double null_prob = kNullProb);

std::string to_pharaoh(const Alignment& alignment);
Alignment parse_pharaoh(const std::string& line);

}  // namespace termforge::align

#endif  // TERMFORGE_ALIGN_HPP_
