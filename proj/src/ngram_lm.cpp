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

#include "termforge/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "termforge/util.hpp"

namespace termforge::ngram_lm {

namespace {

bool is_reserved(const Token& t) {
  return t == kUnkToken || t == kBosToken || t == kEosToken;
}

}  // namespace

char32_t NGramModel::intern(const Token& token) const {
  if (token == kEosToken) return kEosId;
  auto it = token_ids_.find(token);
  return it == token_ids_.end() ? kUnkId : it->second;
}

double NGramModel::score_ids(const Ids& context, char32_t w) const {
  Ids c = context;
  while (!c.empty()) {
    std::size_t k = c.size() + 1;
    Ids g = c;
    g.push_back(w);
    auto hit = log_probs_[k].find(g);
    if (hit != log_probs_[k].end()) return hit->second;
    auto lam = log_lambdas_[c.size()].find(c);
    if (lam != log_lambdas_[c.size()].end())
      return lam->second + score_ids(c.substr(1), w);
    c.erase(c.begin());  // unseen context: defer entirely to the shorter one
  }
  auto hit = log_probs_[1].find(Ids(1, w));
  if (hit != log_probs_[1].end()) return hit->second;
  return log_probs_[1].at(Ids(1, kUnkId));
}

double NGramModel::log_prob(const Sentence& context, const Token& token) const {
  if (order_ == 0) throw std::runtime_error("model not trained");
  Ids c;
  std::size_t start = context.size() > order_ - 1 ? context.size() - (order_ - 1) : 0;
  for (std::size_t i = start; i < context.size(); ++i) {
    if (context[i] == kBosToken)
      c.push_back(kBosId);
    else
      c.push_back(intern(context[i]));
  }
  return score_ids(c, intern(token));
}

double NGramModel::prob(const Sentence& context, const Token& token) const {
  return std::exp(log_prob(context, token));
}

std::string NGramModel::render_ids(const Ids& ids) const {
  std::vector<std::string> parts;
  for (char32_t id : ids) {
    switch (id) {
      case kUnkId: parts.push_back(kUnkToken); break;
      case kBosId: parts.push_back(kBosToken); break;
      case kEosId: parts.push_back(kEosToken); break;
      default: parts.push_back(vocab_.at(id - 3));
    }
  }
  return util::join(parts, " ");
}

NGramModel lm_train(const std::vector<Sentence>& corpus, std::size_t order,
                    double discount) {
  if (corpus.empty()) throw std::runtime_error("empty training corpus");
  if (order < 1) throw std::invalid_argument("order must be >= 1");
  if (!(discount > 0.0 && discount < 1.0))
    throw std::invalid_argument("discount must be in (0,1)");

  NGramModel m;
  m.order_ = order;
  m.discount_ = discount;

  std::set<Token> vocab_set;
  for (const auto& s : corpus)
    for (const auto& t : s)
      if (!is_reserved(t)) vocab_set.insert(t);
  m.vocab_.assign(vocab_set.begin(), vocab_set.end());
  for (std::size_t i = 0; i < m.vocab_.size(); ++i)
    m.token_ids_[m.vocab_[i]] = static_cast<char32_t>(i + 3);
  m.log_uniform_ = -std::log(static_cast<double>(m.vocab_.size()) + 2.0);

  using Ids = NGramModel::Ids;
  // counts[k]: k-gram counts; ctx_counts[k]: counts of length-k contexts.
  std::vector<std::map<Ids, std::uint64_t>> counts(order + 1);
  std::vector<std::map<Ids, std::uint64_t>> ctx_counts(order);
  for (const auto& s : corpus) {
    Ids ids(order - 1, NGramModel::kBosId);
    for (const auto& t : s) ids.push_back(m.intern(t));
    ids.push_back(NGramModel::kEosId);
    for (std::size_t e = order - 1; e < ids.size(); ++e) {
      for (std::size_t k = 1; k <= order; ++k) {
        Ids g = ids.substr(e - k + 1, k);
        ++counts[k][g];
        ++ctx_counts[k - 1][g.substr(0, k - 1)];
      }
    }
  }

  // Distinct continuations per context, for the interpolation weights.
  std::vector<std::map<Ids, std::uint64_t>> ctx_types(order);
  for (std::size_t k = 1; k <= order; ++k)
    for (const auto& [g, c] : counts[k]) ++ctx_types[k - 1][g.substr(0, k - 1)];

  m.log_probs_.assign(order + 1, {});
  m.log_lambdas_.assign(order, {});

  const double d = discount;
  for (std::size_t k = 1; k <= order; ++k) {
    for (const auto& [ctx, ctx_count] : ctx_counts[k - 1]) {
      double lambda = d * static_cast<double>(ctx_types[k - 1][ctx]) /
                      static_cast<double>(ctx_count);
      if (k > 1) m.log_lambdas_[k - 1][ctx] = std::log(lambda);
      // store each continuation's interpolated probability
      auto lo = counts[k].lower_bound(ctx);
      for (auto it = lo; it != counts[k].end(); ++it) {
        const Ids& g = it->first;
        if (g.size() != k || g.compare(0, k - 1, ctx) != 0) break;
        double lower = k == 1 ? std::exp(m.log_uniform_)
                              : std::exp(m.score_ids(ctx.substr(1), g.back()));
        double p = (static_cast<double>(it->second) - d) / static_cast<double>(ctx_count) +
                   lambda * lower;
        m.log_probs_[k][g] = std::log(p);
      }
      if (k == 1) {
        // explicit UNK entry so unseen tokens always resolve; if literal
        // "<unk>" text was counted, the loop above already stored it
        Ids unk(1, NGramModel::kUnkId);
        if (!m.log_probs_[1].count(unk))
          m.log_probs_[1][unk] = std::log(lambda) + m.log_uniform_;
      }
    }
  }
  return m;
}

double cross_entropy(const NGramModel& model, const Sentence& sentence) {
  Sentence context(model.order() > 0 ? model.order() - 1 : 0, kBosToken);
  double total = 0.0;
  for (const auto& t : sentence) {
    total += model.log_prob(context, t);
    context.push_back(t);
    if (!context.empty()) context.erase(context.begin());
  }
  total += model.log_prob(context, kEosToken);
  return -total / (static_cast<double>(sentence.size()) + 1.0);
}

double moore_lewis(const NGramModel& in_lm, const NGramModel& out_lm,
                   const Sentence& sentence) {
  return cross_entropy(in_lm, sentence) - cross_entropy(out_lm, sentence);
}

std::vector<std::size_t> select_top_indices(const std::vector<Sentence>& corpus,
                                            const NGramModel& in_lm,
                                            const NGramModel& out_lm, std::size_t n) {
  if (n > corpus.size()) {
    std::cerr << "select_top: requested " << n << " lines but corpus has only "
              << corpus.size() << "; returning all of them\n";
    n = corpus.size();
  }
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    scored.emplace_back(moore_lewis(in_lm, out_lm, corpus[i]), i);
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first < b.first;
              return a.second < b.second;
            });
  std::vector<std::size_t> keep;
  keep.reserve(n);
  for (std::size_t i = 0; i < n; ++i) keep.push_back(scored[i].second);
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<std::string> select_top(const std::vector<std::string>& lines,
                                    const NGramModel& in_lm, const NGramModel& out_lm,
                                    std::size_t n) {
  std::vector<Sentence> corpus;
  corpus.reserve(lines.size());
  for (const std::string& line : lines) corpus.push_back(util::split_tokens(line));
  std::vector<std::string> out;
  for (std::size_t i : select_top_indices(corpus, in_lm, out_lm, n)) out.push_back(lines[i]);
  return out;
}

void NGramModel::save(const std::string& path) const {
  std::vector<std::string> lines;
  lines.push_back("#lm-v1");
  lines.push_back("order\t" + std::to_string(order_));
  lines.push_back("discount\t" + util::format_double(discount_));
  lines.push_back("vocab\t" + std::to_string(vocab_.size()));
  for (const auto& t : vocab_) lines.push_back(t);
  for (std::size_t k = 1; k <= order_; ++k) {
    lines.push_back("\\" + std::to_string(k) + "-grams:");
    // rows: stored k-grams plus context-only entries of length k
    std::map<std::string, std::pair<const double*, const double*>> rows;
    for (const auto& [g, lp] : log_probs_[k]) rows[render_ids(g)].first = &lp;
    if (k < order_)
      for (const auto& [c, ll] : log_lambdas_[k]) rows[render_ids(c)].second = &ll;
    for (const auto& [text, entry] : rows) {
      std::string line = text;
      line += '\t';
      line += entry.first ? util::format_double(*entry.first) : "-";
      line += '\t';
      line += entry.second ? util::format_double(*entry.second) : "-";
      lines.push_back(std::move(line));
    }
  }
  util::atomic_write_lines(path, lines);
}

NGramModel NGramModel::load(const std::string& path) {
  auto lines = util::read_lines(path);
  if (lines.empty() || lines[0] != "#lm-v1")
    throw std::runtime_error("bad LM header in " + path);
  NGramModel m;
  std::size_t i = 1;
  auto header = [&](const char* key) -> std::string {
    auto fields = util::split_tsv(lines.at(i++));
    if (fields.size() != 2 || fields[0] != key)
      throw std::runtime_error("bad LM header field in " + path);
    return fields[1];
  };
  m.order_ = std::stoull(header("order"));
  m.discount_ = util::parse_double(header("discount"));
  std::size_t vocab_size = std::stoull(header("vocab"));
  for (std::size_t v = 0; v < vocab_size; ++v) m.vocab_.push_back(lines.at(i++));
  for (std::size_t v = 0; v < m.vocab_.size(); ++v)
    m.token_ids_[m.vocab_[v]] = static_cast<char32_t>(v + 3);
  m.log_uniform_ = -std::log(static_cast<double>(m.vocab_.size()) + 2.0);
  m.log_probs_.assign(m.order_ + 1, {});
  m.log_lambdas_.assign(m.order_, {});

  std::size_t k = 0;
  for (; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (line.size() > 1 && line[0] == '\\' && line.back() == ':') {
      k = std::stoull(line.substr(1, line.size() - 8));
      if (k < 1 || k > m.order_) throw std::runtime_error("bad LM section in " + path);
      continue;
    }
    auto fields = util::split_tsv(line);
    if (fields.size() != 3 || k == 0)
      throw std::runtime_error("malformed LM line: " + line);
    Ids ids;
    for (const auto& t : util::split_tokens(fields[0])) {
      if (t == kBosToken)
        ids.push_back(kBosId);
      else if (t == kUnkToken)
        ids.push_back(kUnkId);
      else
        ids.push_back(m.intern(t));
    }
    if (ids.size() != k) throw std::runtime_error("LM ngram length mismatch: " + line);
    if (fields[1] != "-") m.log_probs_[k][ids] = util::parse_double(fields[1]);
    if (fields[2] != "-") {
      if (k >= m.order_) throw std::runtime_error("backoff on highest order: " + line);
      m.log_lambdas_[k][ids] = util::parse_double(fields[2]);
    }
  }
  if (!m.log_probs_[1].count(Ids(1, kUnkId)))
    throw std::runtime_error("LM missing <unk> entry: " + path);
  return m;
}

}  // namespace termforge::ngram_lm
