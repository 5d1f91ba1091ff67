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

#ifndef TERMFORGE_CORPUSFILTER_HPP_
#define TERMFORGE_CORPUSFILTER_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "termforge/align.hpp"
#include "termforge/ngram_lm.hpp"
#include "termforge/types.hpp"

namespace termforge::corpusfilter {

inline constexpr std::size_t kNumFeatures = 13;

// Fixed feature order; index into FeatureVector.
extern const std::array<const char*, kNumFeatures> kFeatureNames;

using FeatureVector = std::array<double, kNumFeatures>;

// Character n-gram Naive Bayes language profile with add-one smoothing.
class LangIdModel {
 public:
  static LangIdModel train(const std::vector<std::string>& lines, std::size_t n = 3);
  // Mean log-probability per character n-gram; 0 for texts shorter than n.
  double log_prob_per_char(const std::string& text) const;

 private:
  std::size_t n_ = 3;
  std::map<std::u32string, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct FilterResources {
  const ngram_lm::NGramModel* src_lm = nullptr;  // non-owning
  const ngram_lm::NGramModel* tgt_lm = nullptr;  // non-owning
  align::TranslationTable dictionary;            // p(target | source)
  align::TranslationTable reverse_dictionary;    // p(source | target)
  LangIdModel src_langid;
  LangIdModel tgt_langid;
};

FilterResources make_resources(const ngram_lm::NGramModel* src_lm,
                               const ngram_lm::NGramModel* tgt_lm,
                               align::TranslationTable dictionary,
                               const std::vector<std::string>& src_seed_lines,
                               const std::vector<std::string>& tgt_seed_lines);

// All thirteen features, finite on any input including empty sides.
FeatureVector extract_features(const Sentence& src, const Sentence& tgt,
                               const FilterResources& resources);

struct ForestParams {
  std::size_t trees = 100;
  std::size_t max_depth = 8;
  std::size_t feature_subsample = 0;  // 0 -> floor(sqrt(#features))
  std::uint64_t seed = 1;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double positive_fraction = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(const FeatureVector& x) const;
};

class ForestModel {
 public:
  double predict(const FeatureVector& x) const;  // mean leaf fraction, in [0,1]
  const std::vector<Tree>& trees() const { return trees_; }

  void save(const std::string& path) const;
  static ForestModel load(const std::string& path);

  explicit ForestModel(std::vector<Tree> trees = {}) : trees_(std::move(trees)) {}

 private:
  std::vector<Tree> trees_;
};

// CART with Gini splits on midpoint thresholds, bagging with replacement,
// a random feature subset per split; byte-identical model for a fixed
// (seed, input order).
ForestModel train_forest(const std::vector<FeatureVector>& features,
                         const std::vector<int>& labels, const ForestParams& params);

// Indices of the k pairs scoring closest to 0.5 (uncertainty sampling),
// ordered by closeness then original index; k beyond the pool returns all.
std::vector<std::size_t> feedback_round(const ForestModel& forest,
                                        const std::vector<FeatureVector>& unlabeled,
                                        std::size_t k = 20);

// Indices (ascending) of pairs with score strictly above the threshold.
std::vector<std::size_t> apply_filter(const std::vector<FeatureVector>& features,
                                      const ForestModel& forest, double threshold);

std::vector<std::string> features_to_tsv(const std::vector<FeatureVector>& rows);
std::vector<FeatureVector> features_from_tsv(const std::vector<std::string>& lines);

}  // namespace termforge::corpusfilter

#endif  // TERMFORGE_CORPUSFILTER_HPP_
