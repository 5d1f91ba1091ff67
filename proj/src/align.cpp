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

#include "termforge/align.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "termforge/util.hpp"

namespace termforge::align {

double TranslationTable::prob(const Token& src, const Token& tgt) const {
  auto row = rows_.find(src);
  if (row == rows_.end()) return 0.0;
  auto cell = row->second.find(tgt);
  return cell == row->second.end() ? 0.0 : cell->second;
}

void TranslationTable::set(const Token& src, const Token& tgt, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("translation probability must be > 0");
  rows_[src][tgt] = p;
  target_vocab_.insert(tgt);
}

TranslationTable TranslationTable::reversed() const {
  TranslationTable rev;
  std::map<Token, double> totals;
  for (const auto& [s, row] : rows_)
    for (const auto& [t, p] : row) totals[t] += p;
  for (const auto& [s, row] : rows_)
    for (const auto& [t, p] : row) rev.set(t, s, p / totals[t]);
  return rev;
}

void TranslationTable::save(const std::string& path) const {
  std::vector<std::string> lines;
  for (const auto& [s, row] : rows_)
    for (const auto& [t, p] : row)
      lines.push_back(s + "\t" + t + "\t" + util::format_double(p));
  util::atomic_write_lines(path, lines);
}

TranslationTable TranslationTable::load(const std::string& path) {
  TranslationTable table;
  for (const auto& line : util::read_lines(path)) {
    if (line.empty()) continue;
    auto fields = util::split_tsv(line);
    if (fields.size() != 3) throw std::runtime_error("malformed table line: " + line);
    table.set(fields[0], fields[1], util::parse_double(fields[2]));
  }
  return table;
}

namespace {

struct Interned {
  std::vector<std::vector<std::uint32_t>> src, tgt;  // src id 0 = NULL
  std::vector<Token> src_names, tgt_names;           // src_names[0] = <NULL>
};

Interned intern_bitext(const Bitext& bitext) {
  std::set<Token> src_set, tgt_set;
  for (const auto& [s, t] : bitext) {
    src_set.insert(s.begin(), s.end());
    tgt_set.insert(t.begin(), t.end());
  }
  Interned in;
  in.src_names.push_back(kNullToken);
  in.src_names.insert(in.src_names.end(), src_set.begin(), src_set.end());
  in.tgt_names.assign(tgt_set.begin(), tgt_set.end());
  std::map<Token, std::uint32_t> src_ids, tgt_ids;
  for (std::uint32_t i = 0; i < in.src_names.size(); ++i) src_ids[in.src_names[i]] = i;
  for (std::uint32_t i = 0; i < in.tgt_names.size(); ++i) tgt_ids[in.tgt_names[i]] = i;
  for (const auto& [s, t] : bitext) {
    std::vector<std::uint32_t> si, ti;
    for (const auto& tok : s) si.push_back(src_ids[tok]);
    for (const auto& tok : t) ti.push_back(tgt_ids[tok]);
    in.src.push_back(std::move(si));
    in.tgt.push_back(std::move(ti));
  }
  return in;
}

// Real-position priors for one target position; NULL holds null_prob.
std::vector<double> position_priors(std::size_t n, std::size_t j, std::size_t m,
                                    double tension, double null_prob) {
  std::vector<double> prior(n, 0.0);
  if (n == 0) return prior;
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = std::fabs(static_cast<double>(i) / static_cast<double>(n) -
                         static_cast<double>(j) / static_cast<double>(m));
    prior[i] = std::exp(-tension * d);
    z += prior[i];
  }
  for (std::size_t i = 0; i < n; ++i) prior[i] *= (1.0 - null_prob) / z;
  return prior;
}

TranslationTable em_train(const Bitext& bitext, std::size_t iterations, double tension,
                          double null_prob, std::vector<double>* iteration_loglik) {
  if (bitext.empty()) throw std::runtime_error("empty bitext");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (tension < 0.0) throw std::invalid_argument("tension must be >= 0");
  if (!(null_prob > 0.0 && null_prob < 1.0))
    throw std::invalid_argument("null_prob must be in (0,1)");

  Interned in = intern_bitext(bitext);
  const std::size_t ns = in.src_names.size();

  // uniform init over co-occurring pairs; NULL co-occurs with everything
  std::vector<std::map<std::uint32_t, double>> t(ns);
  for (std::size_t p = 0; p < in.src.size(); ++p)
    for (std::uint32_t w : in.tgt[p]) {
      t[0][w] = 1.0;
      for (std::uint32_t s : in.src[p]) t[s][w] = 1.0;
    }
  for (auto& row : t) {
    if (row.empty()) continue;
    double u = 1.0 / static_cast<double>(row.size());
    for (auto& [w, p] : row) p = u;
  }

  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<std::map<std::uint32_t, double>> counts(ns);
    std::vector<double> totals(ns, 0.0);
    double ll = 0.0;
    for (std::size_t p = 0; p < in.src.size(); ++p) {
      const auto& S = in.src[p];
      const auto& T = in.tgt[p];
      const std::size_t n = S.size(), m = T.size();
      for (std::size_t j = 0; j < m; ++j) {
        const std::uint32_t w = T[j];
        std::vector<double> prior = position_priors(n, j, m, tension, null_prob);
        double null_mass = (n == 0 ? 1.0 : null_prob) * t[0][w];
        double denom = null_mass;
        std::vector<double> real_mass(n);
        for (std::size_t i = 0; i < n; ++i) {
          real_mass[i] = prior[i] * t[S[i]][w];
          denom += real_mass[i];
        }
        ll += std::log(denom);
        counts[0][w] += null_mass / denom;
        totals[0] += null_mass / denom;
        for (std::size_t i = 0; i < n; ++i) {
          counts[S[i]][w] += real_mass[i] / denom;
          totals[S[i]] += real_mass[i] / denom;
        }
      }
    }
    if (iteration_loglik) iteration_loglik->push_back(ll);
    for (std::size_t s = 0; s < ns; ++s) {
      if (totals[s] <= 0.0) continue;
      for (auto& [w, c] : counts[s]) t[s][w] = c / totals[s];
    }
  }

  TranslationTable table;
  for (std::size_t s = 0; s < ns; ++s)
    for (const auto& [w, p] : t[s])
      if (p > 0.0) table.set(in.src_names[s], in.tgt_names[w], p);
  return table;
}

}  // namespace

TranslationTable train_model1(const Bitext& bitext, std::size_t iterations,
                              double null_prob, std::vector<double>* iteration_loglik) {
  return em_train(bitext, iterations, 0.0, null_prob, iteration_loglik);
}

DiagonalModel train_diag(const Bitext& bitext, std::size_t iterations, double tension,
                         double null_prob, std::vector<double>* iteration_loglik) {
  DiagonalModel model;
  model.table = em_train(bitext, iterations, tension, null_prob, iteration_loglik);
  model.tension = tension;
  model.null_prob = null_prob;
  return model;
}

double log_likelihood(const TranslationTable& table, const Bitext& bitext,
                      double null_prob) {
  double ll = 0.0;
  for (const auto& [S, T] : bitext) {
    const std::size_t n = S.size(), m = T.size();
    for (std::size_t j = 0; j < m; ++j) {
      double denom = (n == 0 ? 1.0 : null_prob) * table.prob(kNullToken, T[j]);
      for (std::size_t i = 0; i < n; ++i)
        denom += (1.0 - null_prob) / static_cast<double>(n) * table.prob(S[i], T[j]);
      ll += std::log(denom);
    }
  }
  return ll;
}

namespace {

Alignment viterbi_core(const TranslationTable& table, const Sentence& src,
                       const Sentence& tgt, double tension, double null_prob) {
  Alignment out;
  const std::size_t n = src.size(), m = tgt.size();
  const double uniform =
      table.target_vocab_size() ? 1.0 / static_cast<double>(table.target_vocab_size()) : 0.0;
  auto q = [&](const Token& s, const Token& w) {
    if (table.rows().find(s) == table.rows().end()) return uniform;
    return table.prob(s, w);
  };
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> prior = position_priors(n, j, m, tension, null_prob);
    double null_score = null_prob * q(kNullToken, tgt[j]);
    double best = 0.0;
    std::size_t best_i = n;
    for (std::size_t i = 0; i < n; ++i) {
      double s = prior[i] * q(src[i], tgt[j]);
      if (s > best) {
        best = s;
        best_i = i;
      }
    }
    // real links win ties against NULL; all-zero posteriors stay unaligned
    if (best_i < n && best >= null_score)
      out.push_back({static_cast<std::uint32_t>(best_i), static_cast<std::uint32_t>(j)});
  }
  return out;
}

}  // namespace

Alignment viterbi_align(const TranslationTable& table, const Sentence& src,
                        const Sentence& tgt, double null_prob) {
  return viterbi_core(table, src, tgt, 0.0, null_prob);
}

Alignment viterbi_align(const DiagonalModel& model, const Sentence& src,
                        const Sentence& tgt) {
  return viterbi_core(model.table, src, tgt, model.tension, model.null_prob);
}

Heuristic parse_heuristic(const std::string& name) {
  if (name == "intersection") return Heuristic::kIntersection;
  if (name == "union") return Heuristic::kUnion;
  if (name == "grow-diag-final-and") return Heuristic::kGrowDiagFinalAnd;
  throw std::invalid_argument("unknown symmetrization heuristic: " + name);
}

namespace {

void check_bounds(const Alignment& a, std::size_t src_len, std::size_t tgt_len) {
  for (const Link& l : a)
    if (l.src >= src_len || l.tgt >= tgt_len)
      throw std::out_of_range("alignment link " + std::to_string(l.src) + "-" +
                              std::to_string(l.tgt) + " out of bounds");
}

Alignment sorted_unique(Alignment a) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

}  // namespace

Alignment symmetrize(const Alignment& forward, const Alignment& reverse, Heuristic h,
                     std::size_t src_len, std::size_t tgt_len) {
  check_bounds(forward, src_len, tgt_len);
  check_bounds(reverse, src_len, tgt_len);
  Alignment fwd = sorted_unique(forward), rev = sorted_unique(reverse);

  Alignment uni;
  std::set_union(fwd.begin(), fwd.end(), rev.begin(), rev.end(), std::back_inserter(uni));
  if (h == Heuristic::kUnion) return uni;

  Alignment inter;
  std::set_intersection(fwd.begin(), fwd.end(), rev.begin(), rev.end(),
                        std::back_inserter(inter));
  if (h == Heuristic::kIntersection) return inter;

  // grow-diag-final-and, following the published symmetrization pseudocode
  std::set<std::pair<std::uint32_t, std::uint32_t>> in_union;
  for (const Link& l : uni) in_union.insert({l.src, l.tgt});
  std::vector<std::vector<bool>> cell(src_len, std::vector<bool>(tgt_len, false));
  std::vector<bool> src_has(src_len, false), tgt_has(tgt_len, false);
  auto add = [&](std::uint32_t i, std::uint32_t j) {
    cell[i][j] = true;
    src_has[i] = true;
    tgt_has[j] = true;
  };
  for (const Link& l : inter) add(l.src, l.tgt);

  static const int kNeighbors[8][2] = {{-1, 0}, {0, -1}, {1, 0},  {0, 1},
                                       {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t i = 0; i < src_len; ++i) {
      for (std::size_t j = 0; j < tgt_len; ++j) {
        if (!cell[i][j]) continue;
        for (const auto& nb : kNeighbors) {
          long ni = static_cast<long>(i) + nb[0];
          long nj = static_cast<long>(j) + nb[1];
          if (ni < 0 || nj < 0 || ni >= static_cast<long>(src_len) ||
              nj >= static_cast<long>(tgt_len))
            continue;
          auto ui = static_cast<std::uint32_t>(ni);
          auto uj = static_cast<std::uint32_t>(nj);
          if (cell[ui][uj]) continue;
          if (!in_union.count({ui, uj})) continue;
          if (!src_has[ui] || !tgt_has[uj]) {
            add(ui, uj);
            grew = true;
          }
        }
      }
    }
  }
  for (const Alignment* dir : {&fwd, &rev}) {
    for (const Link& l : *dir) {
      if (cell[l.src][l.tgt]) continue;
      if (!src_has[l.src] && !tgt_has[l.tgt]) add(l.src, l.tgt);
    }
  }

  Alignment out;
  for (std::size_t i = 0; i < src_len; ++i)
    for (std::size_t j = 0; j < tgt_len; ++j)
      if (cell[i][j])
        out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
  return out;
}

std::string to_pharaoh(const Alignment& alignment) {
  std::vector<std::string> parts;
  for (const Link& l : alignment)
    parts.push_back(std::to_string(l.src) + "-" + std::to_string(l.tgt));
  return util::join(parts, " ");
}

Alignment parse_pharaoh(const std::string& line) {
  Alignment out;
  for (const auto& tok : util::split_tokens(line)) {
    std::size_t dash = tok.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == tok.size())
      throw std::runtime_error("malformed pharaoh link: " + tok);
    try {
      std::size_t p1 = 0, p2 = 0;
      unsigned long i = std::stoul(tok.substr(0, dash), &p1);
      unsigned long j = std::stoul(tok.substr(dash + 1), &p2);
      if (p1 != dash || p2 != tok.size() - dash - 1)
        throw std::runtime_error("trailing characters");
      out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
    } catch (const std::exception&) {
      throw std::runtime_error("malformed pharaoh link: " + tok);
    }
  }
  return sorted_unique(out);
}

}  // namespace termforge::align
