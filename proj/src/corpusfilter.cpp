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

#include "termforge/corpusfilter.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "termforge/unicode.hpp"
#include "termforge/util.hpp"

namespace termforge::corpusfilter {

const std::array<const char*, kNumFeatures> kFeatureNames = {
    "total_len", "len_ratio", "avg_tok_len", "upper_cmp", "punct_cmp",
    "num_cmp",   "langid_src", "langid_tgt", "cognate",   "lm_src",
    "lm_tgt",    "zipporah",   "hunalign"};

LangIdModel LangIdModel::train(const std::vector<std::string>& lines, std::size_t n) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  LangIdModel m;
  m.n_ = n;
  for (const auto& line : lines) {
    std::u32string cps = uni::decode_string(line);
    if (cps.size() < n) continue;
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
      ++m.counts_[cps.substr(i, n)];
      ++m.total_;
    }
  }
  return m;
}

double LangIdModel::log_prob_per_char(const std::string& text) const {
  std::u32string cps = uni::decode_string(text);
  if (cps.size() < n_) return 0.0;
  const double denom =
      static_cast<double>(total_) + static_cast<double>(counts_.size()) + 1.0;
  double sum = 0.0;
  std::size_t grams = 0;
  for (std::size_t i = 0; i + n_ <= cps.size(); ++i) {
    auto it = counts_.find(cps.substr(i, n_));
    double c = it == counts_.end() ? 0.0 : static_cast<double>(it->second);
    sum += std::log((c + 1.0) / denom);
    ++grams;
  }
  return sum / static_cast<double>(grams);
}

FilterResources make_resources(const ngram_lm::NGramModel* src_lm,
                               const ngram_lm::NGramModel* tgt_lm,
                               align::TranslationTable dictionary,
                               const std::vector<std::string>& src_seed_lines,
                               const std::vector<std::string>& tgt_seed_lines) {
  FilterResources r;
  r.src_lm = src_lm;
  r.tgt_lm = tgt_lm;
  r.reverse_dictionary = dictionary.reversed();
  r.dictionary = std::move(dictionary);
  r.src_langid = LangIdModel::train(src_seed_lines);
  r.tgt_langid = LangIdModel::train(tgt_seed_lines);
  return r;
}

namespace {

double multiset_jaccard(const std::map<std::string, std::uint64_t>& a,
                        const std::map<std::string, std::uint64_t>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::uint64_t inter = 0, uni = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::map<std::string, std::uint64_t> punct_multiset(const Sentence& s) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& tok : s)
    for (char32_t cp : uni::decode_string(tok))
      if (uni::is_ascii_punct(cp)) ++out[uni::encode_string(std::u32string(1, cp))];
  return out;
}

bool is_number_token(const Token& tok) {
  for (char32_t cp : uni::decode_string(tok))
    if (uni::is_ascii_digit(cp)) return true;
  return false;
}

std::map<std::string, std::uint64_t> number_multiset(const Sentence& s) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& tok : s)
    if (is_number_token(tok)) ++out[tok];
  return out;
}

std::uint64_t upper_count(const Sentence& s) {
  std::uint64_t n = 0;
  for (const auto& tok : s)
    for (char32_t cp : uni::decode_string(tok))
      if (uni::is_upper(cp)) ++n;
  return n;
}

std::size_t common_prefix_cps(const Token& a, const Token& b) {
  std::u32string ua = uni::decode_string(a), ub = uni::decode_string(b);
  std::size_t k = 0;
  while (k < ua.size() && k < ub.size() && ua[k] == ub[k]) ++k;
  return k;
}

// -mean log of the floored bag-of-words translation probabilities of `out`
// tokens given `in` tokens under the row-wise dictionary.
double bow_cross_entropy(const Sentence& in, const Sentence& out,
                         const align::TranslationTable& dict) {
  if (out.empty()) return 0.0;
  constexpr double kFloor = 1e-6;
  double sum = 0.0;
  for (const auto& w : out) {
    double q = 0.0;
    for (const auto& s : in) q += dict.prob(s, w);
    q /= static_cast<double>(std::max<std::size_t>(1, in.size()));
    sum += -std::log(std::max(q, kFloor));
  }
  return sum / static_cast<double>(out.size());
}

double dictionary_coverage(const Sentence& from, const Sentence& to,
                           const align::TranslationTable& dict) {
  if (from.empty()) return 0.0;
  std::size_t covered = 0;
  for (const auto& s : from) {
    for (const auto& w : to) {
      if (dict.prob(s, w) > 0.0) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(from.size());
}

std::string join_for_langid(const Sentence& s) { return util::join_tokens(s); }

}  // namespace

FeatureVector extract_features(const Sentence& src, const Sentence& tgt,
                               const FilterResources& resources) {
  FeatureVector f{};
  const double ns = static_cast<double>(src.size());
  const double nt = static_cast<double>(tgt.size());

  f[0] = ns + nt;
  f[1] = std::max(1.0, ns) / std::max(1.0, nt);

  std::uint64_t chars = 0;
  for (const auto& t : src) chars += uni::decode_string(t).size();
  for (const auto& t : tgt) chars += uni::decode_string(t).size();
  f[2] = (ns + nt) > 0 ? static_cast<double>(chars) / (ns + nt) : 0.0;

  const double us = static_cast<double>(upper_count(src));
  const double ut = static_cast<double>(upper_count(tgt));
  f[3] = std::fabs(us - ut) / std::max(1.0, std::max(us, ut));

  f[4] = multiset_jaccard(punct_multiset(src), punct_multiset(tgt));
  f[5] = multiset_jaccard(number_multiset(src), number_multiset(tgt));

  const std::string src_text = join_for_langid(src), tgt_text = join_for_langid(tgt);
  f[6] = resources.src_langid.log_prob_per_char(src_text) -
         resources.tgt_langid.log_prob_per_char(src_text);
  f[7] = resources.tgt_langid.log_prob_per_char(tgt_text) -
         resources.src_langid.log_prob_per_char(tgt_text);

  std::size_t cognates = 0;
  for (const auto& s : src) {
    for (const auto& t : tgt) {
      if (s == t || common_prefix_cps(s, t) >= 4) {
        ++cognates;
        break;
      }
    }
  }
  f[8] = static_cast<double>(cognates) / std::max(1.0, ns);

  f[9] = resources.src_lm ? ngram_lm::cross_entropy(*resources.src_lm, src) : 0.0;
  f[10] = resources.tgt_lm ? ngram_lm::cross_entropy(*resources.tgt_lm, tgt) : 0.0;

  f[11] = bow_cross_entropy(src, tgt, resources.dictionary) +
          bow_cross_entropy(tgt, src, resources.reverse_dictionary);

  const double cov = (dictionary_coverage(src, tgt, resources.dictionary) +
                      dictionary_coverage(tgt, src, resources.reverse_dictionary)) /
                     2.0;
  const double lr = std::log(f[1]);
  f[12] = cov * std::exp(-(lr * lr) / (2.0 * 0.25));

  for (double v : f)
    if (!std::isfinite(v)) throw std::logic_error("non-finite feature value");
  return f;
}

double Tree::predict(const FeatureVector& x) const {
  const TreeNode* node = &nodes.at(0);
  while (node->feature >= 0)
    node = &nodes.at(x[static_cast<std::size_t>(node->feature)] < node->threshold
                         ? static_cast<std::size_t>(node->left)
                         : static_cast<std::size_t>(node->right));
  return node->positive_fraction;
}

double ForestModel::predict(const FeatureVector& x) const {
  if (trees_.empty()) throw std::runtime_error("empty forest");
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

namespace {

struct TreeBuilder {
  const std::vector<FeatureVector>& xs;
  const std::vector<int>& ys;
  std::size_t max_depth;
  std::size_t features_per_split;
  std::mt19937_64& rng;
  Tree tree;

  static double gini(std::size_t pos, std::size_t n) {
    if (n == 0) return 0.0;
    double p = static_cast<double>(pos) / static_cast<double>(n);
    return 2.0 * p * (1.0 - p);
  }

  std::int32_t build(const std::vector<std::size_t>& idx, std::size_t depth) {
    std::size_t pos = 0;
    for (std::size_t i : idx) pos += static_cast<std::size_t>(ys[i]);
    TreeNode node;
    node.positive_fraction = idx.empty()
                                 ? 0.0
                                 : static_cast<double>(pos) / static_cast<double>(idx.size());
    std::int32_t id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (depth >= max_depth || pos == 0 || pos == idx.size() || idx.size() < 2) return id;

    // random feature subset (partial Fisher-Yates over feature indices)
    std::array<std::size_t, kNumFeatures> feats;
    for (std::size_t i = 0; i < kNumFeatures; ++i) feats[i] = i;
    std::size_t m = std::min(features_per_split, kNumFeatures);
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t j = i + util::bounded_rand(rng, kNumFeatures - i);
      std::swap(feats[i], feats[j]);
    }
    std::array<std::size_t, kNumFeatures> chosen{};
    std::copy(feats.begin(), feats.begin() + static_cast<long>(m), chosen.begin());
    std::sort(chosen.begin(), chosen.begin() + static_cast<long>(m));

    const double parent_impurity = gini(pos, idx.size());
    double best_gain = 1e-12;
    std::size_t best_feature = kNumFeatures;
    double best_threshold = 0.0;

    for (std::size_t fi = 0; fi < m; ++fi) {
      std::size_t f = chosen[fi];
      std::vector<std::pair<double, int>> vals;
      vals.reserve(idx.size());
      for (std::size_t i : idx) vals.emplace_back(xs[i][f], ys[i]);
      std::sort(vals.begin(), vals.end());
      std::size_t left_n = 0, left_pos = 0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        ++left_n;
        left_pos += static_cast<std::size_t>(vals[i].second);
        if (vals[i].first == vals[i + 1].first) continue;
        double threshold = vals[i].first + (vals[i + 1].first - vals[i].first) / 2.0;
        if (!(threshold > vals[i].first)) continue;  // adjacent doubles: no usable midpoint
        std::size_t right_n = vals.size() - left_n;
        std::size_t right_pos = pos - left_pos;
        double gain = parent_impurity -
                      (static_cast<double>(left_n) / static_cast<double>(vals.size())) *
                          gini(left_pos, left_n) -
                      (static_cast<double>(right_n) / static_cast<double>(vals.size())) *
                          gini(right_pos, right_n);
        if (gain > best_gain ||
            (gain == best_gain && f < best_feature) ||
            (gain == best_gain && f == best_feature && threshold < best_threshold)) {
          best_gain = gain;
          best_feature = f;
          best_threshold = threshold;
        }
      }
    }
    if (best_feature == kNumFeatures) return id;

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx)
      (xs[i][best_feature] < best_threshold ? left_idx : right_idx).push_back(i);
    if (left_idx.empty() || right_idx.empty()) return id;

    tree.nodes[static_cast<std::size_t>(id)].feature =
        static_cast<std::int32_t>(best_feature);
    tree.nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    std::int32_t l = build(left_idx, depth + 1);
    std::int32_t r = build(right_idx, depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].left = l;
    tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }
};

}  // namespace

ForestModel train_forest(const std::vector<FeatureVector>& features,
                         const std::vector<int>& labels, const ForestParams& params) {
  if (features.size() != labels.size())
    throw std::invalid_argument("features/labels size mismatch");
  if (features.size() < 2) throw std::invalid_argument("need at least 2 examples");
  bool has0 = false, has1 = false;
  for (int y : labels) {
    if (y == 0) has0 = true;
    else if (y == 1) has1 = true;
    else throw std::invalid_argument("labels must be 0 or 1");
  }
  if (!has0 || !has1) throw std::runtime_error("degenerate labels");
  if (params.trees < 1) throw std::invalid_argument("need at least 1 tree");

  std::size_t per_split = params.feature_subsample
                              ? params.feature_subsample
                              : static_cast<std::size_t>(std::sqrt(double(kNumFeatures)));
  per_split = std::max<std::size_t>(1, std::min(per_split, kNumFeatures));

  std::vector<Tree> trees;
  trees.reserve(params.trees);
  std::uint64_t seed_state = params.seed;
  for (std::size_t t = 0; t < params.trees; ++t) {
    std::uint64_t tree_seed = util::splitmix64(seed_state);
    std::mt19937_64 rng(tree_seed);
    std::vector<std::size_t> bootstrap(features.size());
    for (auto& i : bootstrap) i = util::bounded_rand(rng, features.size());
    std::sort(bootstrap.begin(), bootstrap.end());
    TreeBuilder builder{features, labels, params.max_depth, per_split, rng, {}};
    builder.build(bootstrap, 0);
    trees.push_back(std::move(builder.tree));
  }
  return ForestModel(std::move(trees));
}

std::vector<std::size_t> feedback_round(const ForestModel& forest,
                                        const std::vector<FeatureVector>& unlabeled,
                                        std::size_t k) {
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(unlabeled.size());
  for (std::size_t i = 0; i < unlabeled.size(); ++i)
    ranked.emplace_back(std::fabs(forest.predict(unlabeled[i]) - 0.5), i);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    out.push_back(ranked[i].second);
  return out;
}

std::vector<std::size_t> apply_filter(const std::vector<FeatureVector>& features,
                                      const ForestModel& forest, double threshold) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < features.size(); ++i)
    if (forest.predict(features[i]) > threshold) kept.push_back(i);
  return kept;
}

void ForestModel::save(const std::string& path) const {
  std::vector<std::string> lines;
  lines.push_back("#forest-v1");
  lines.push_back("trees\t" + std::to_string(trees_.size()));
  for (const auto& t : trees_) {
    lines.push_back("tree\t" + std::to_string(t.nodes.size()));
    for (const auto& n : t.nodes)
      lines.push_back(std::to_string(n.feature) + "\t" + util::format_double(n.threshold) +
                      "\t" + std::to_string(n.left) + "\t" + std::to_string(n.right) +
                      "\t" + util::format_double(n.positive_fraction));
  }
  util::atomic_write_lines(path, lines);
}

ForestModel ForestModel::load(const std::string& path) {
  auto lines = util::read_lines(path);
  if (lines.empty() || lines[0] != "#forest-v1")
    throw std::runtime_error("bad forest header in " + path);
  std::size_t i = 1;
  auto fields_of = [&](const std::string& line) { return util::split_tsv(line); };
  auto head = fields_of(lines.at(i++));
  if (head.size() != 2 || head[0] != "trees")
    throw std::runtime_error("bad forest file: " + path);
  std::size_t n_trees = std::stoull(head[1]);
  std::vector<Tree> trees;
  for (std::size_t t = 0; t < n_trees; ++t) {
    auto th = fields_of(lines.at(i++));
    if (th.size() != 2 || th[0] != "tree")
      throw std::runtime_error("bad forest tree header: " + path);
    std::size_t n_nodes = std::stoull(th[1]);
    Tree tree;
    for (std::size_t k = 0; k < n_nodes; ++k) {
      auto f = fields_of(lines.at(i++));
      if (f.size() != 5) throw std::runtime_error("bad forest node line: " + path);
      TreeNode node;
      node.feature = static_cast<std::int32_t>(std::stol(f[0]));
      node.threshold = util::parse_double(f[1]);
      node.left = static_cast<std::int32_t>(std::stol(f[2]));
      node.right = static_cast<std::int32_t>(std::stol(f[3]));
      node.positive_fraction = util::parse_double(f[4]);
      tree.nodes.push_back(node);
    }
    trees.push_back(std::move(tree));
  }
  return ForestModel(std::move(trees));
}

std::vector<std::string> features_to_tsv(const std::vector<FeatureVector>& rows) {
  std::vector<std::string> lines;
  lines.reserve(rows.size() + 1);
  std::vector<std::string> header(kFeatureNames.begin(), kFeatureNames.end());
  lines.push_back(util::join(header, "\t"));
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    cells.reserve(kNumFeatures);
    for (double v : row) cells.push_back(util::format_double(v));
    lines.push_back(util::join(cells, "\t"));
  }
  return lines;
}

std::vector<FeatureVector> features_from_tsv(const std::vector<std::string>& lines) {
  if (lines.empty()) throw std::runtime_error("empty features file");
  std::vector<std::string> header(kFeatureNames.begin(), kFeatureNames.end());
  if (lines[0] != util::join(header, "\t"))
    throw std::runtime_error("bad features header");
  std::vector<FeatureVector> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cells = util::split_tsv(lines[i]);
    if (cells.size() != kNumFeatures)
      throw std::runtime_error("bad features row: " + lines[i]);
    FeatureVector row{};
    for (std::size_t c = 0; c < kNumFeatures; ++c) row[c] = util::parse_double(cells[c]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace termforge::corpusfilter
