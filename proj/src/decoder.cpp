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

#include "termforge/decoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace termforge::decoder {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxConstraints = 64;

}  // namespace

ConstraintTrie::ConstraintTrie(const std::vector<Sentence>& constraints) {
  for (const Sentence& c : constraints) {
    if (c.empty()) throw std::invalid_argument("empty constraint sequence");
    if (std::find(constraints_.begin(), constraints_.end(), c) == constraints_.end())
      constraints_.push_back(c);
  }
  if (constraints_.size() > kMaxConstraints)
    throw std::invalid_argument("more than 64 distinct constraints");

  nodes_.emplace_back();
  for (std::size_t id = 0; id < constraints_.size(); ++id) {
    const Sentence& c = constraints_[id];
    total_tokens_ += c.size();
    int v = 0;
    for (const Token& tok : c) {
      nodes_[static_cast<std::size_t>(v)].through_mask |= std::uint64_t{1} << id;
      auto it = nodes_[static_cast<std::size_t>(v)].children.find(tok);
      if (it == nodes_[static_cast<std::size_t>(v)].children.end()) {
        int child = static_cast<int>(nodes_.size());
        nodes_[static_cast<std::size_t>(v)].children.emplace(tok, child);
        nodes_.emplace_back();
        nodes_.back().depth = nodes_[static_cast<std::size_t>(v)].depth + 1;
        v = child;
      } else {
        v = it->second;
      }
    }
    nodes_[static_cast<std::size_t>(v)].through_mask |= std::uint64_t{1} << id;
    nodes_[static_cast<std::size_t>(v)].outputs.push_back(id);
  }

  // Breadth-first failure links; outputs accumulate along the fail chain so a
  // single lookup sees every constraint ending at a node.
  std::deque<int> queue;
  for (const auto& [tok, child] : nodes_[0].children) {
    nodes_[static_cast<std::size_t>(child)].fail = 0;
    queue.push_back(child);
  }
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (const auto& [tok, child] : nodes_[static_cast<std::size_t>(v)].children) {
      int f = nodes_[static_cast<std::size_t>(v)].fail;
      while (true) {
        auto it = nodes_[static_cast<std::size_t>(f)].children.find(tok);
        if (it != nodes_[static_cast<std::size_t>(f)].children.end() && it->second != child) {
          nodes_[static_cast<std::size_t>(child)].fail = it->second;
          break;
        }
        if (f == 0) {
          nodes_[static_cast<std::size_t>(child)].fail = 0;
          break;
        }
        f = nodes_[static_cast<std::size_t>(f)].fail;
      }
      Node& cn = nodes_[static_cast<std::size_t>(child)];
      const Node& fn = nodes_[static_cast<std::size_t>(cn.fail)];
      cn.outputs.insert(cn.outputs.end(), fn.outputs.begin(), fn.outputs.end());
      std::sort(cn.outputs.begin(), cn.outputs.end());
      queue.push_back(child);
    }
  }
}

ConstraintState ConstraintTrie::advance(const ConstraintState& state,
                                        const Token& token) const {
  int v = state.node;
  while (true) {
    auto it = nodes_[static_cast<std::size_t>(v)].children.find(token);
    if (it != nodes_[static_cast<std::size_t>(v)].children.end()) {
      v = it->second;
      break;
    }
    if (v == 0) break;
    v = nodes_[static_cast<std::size_t>(v)].fail;
  }

  ConstraintState next{v, state.satisfied, state.completed_tokens};
  for (std::size_t id : nodes_[static_cast<std::size_t>(v)].outputs) {
    std::uint64_t bit = std::uint64_t{1} << id;
    if (!(next.satisfied & bit)) {
      next.satisfied |= bit;
      next.completed_tokens += constraints_[id].size();
    }
  }
  // A partial match is only worth keeping while its subtree can still finish
  // an unsatisfied constraint; otherwise fall back to the longest useful
  // suffix. This keeps completed_tokens + depth bounded by total_tokens().
  while (next.node != 0 &&
         (nodes_[static_cast<std::size_t>(next.node)].through_mask & ~next.satisfied) == 0)
    next.node = nodes_[static_cast<std::size_t>(next.node)].fail;
  return next;
}

bool ConstraintTrie::all_satisfied(const ConstraintState& state) const {
  return std::popcount(state.satisfied) == static_cast<int>(constraints_.size());
}

std::size_t ConstraintTrie::depth(const ConstraintState& state) const {
  return nodes_[static_cast<std::size_t>(state.node)].depth;
}

std::size_t ConstraintTrie::bank_tokens(const ConstraintState& state) const {
  return state.completed_tokens + depth(state);
}

namespace {

struct Hyp {
  std::vector<int> prefix;  // vocabulary indices
  double score = 0.0;
  ConstraintState state;
};

// Lexicographic comparison of token sequences through per-id sort ranks.
bool lex_less(const std::vector<int>& a, const std::vector<int>& b,
              const std::vector<std::size_t>& rank) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != b[i])
      return rank[static_cast<std::size_t>(a[i])] < rank[static_cast<std::size_t>(b[i])];
  }
  return a.size() < b.size();
}

Sentence materialize(const std::vector<int>& ids, const std::vector<Token>& vocab) {
  Sentence out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab[static_cast<std::size_t>(id)]);
  return out;
}

// Splits `beam` slots over the non-empty banks as evenly as possible with the
// remainder on higher banks; slots a bank cannot fill are re-divided over the
// banks that still have candidates, so no slot is wasted while work remains.
std::vector<std::size_t> allocate_slots(const std::vector<std::size_t>& need,
                                        std::size_t beam) {
  std::vector<std::size_t> quota(need.size(), 0);
  std::size_t remaining = beam;
  while (remaining > 0) {
    std::vector<std::size_t> hungry;
    for (std::size_t b = 0; b < need.size(); ++b)
      if (quota[b] < need[b]) hungry.push_back(b);
    if (hungry.empty()) break;
    std::size_t base = remaining / hungry.size();
    std::size_t rem = remaining % hungry.size();
    std::size_t granted = 0;
    for (std::size_t i = 0; i < hungry.size(); ++i) {
      std::size_t b = hungry[i];
      std::size_t give = base + (i >= hungry.size() - rem ? 1 : 0);
      std::size_t grant = std::min(give, need[b] - quota[b]);
      quota[b] += grant;
      granted += grant;
    }
    if (granted == 0) break;
    remaining -= granted;
  }
  return quota;
}

struct Best {
  std::vector<int> prefix;
  double score = 0.0;
  double normalized = 0.0;
};

void consider(std::optional<Best>& slot, std::vector<int> prefix, double score,
              const std::vector<std::size_t>& rank) {
  double normalized = score / static_cast<double>(std::max<std::size_t>(1, prefix.size()));
  if (!slot || normalized > slot->normalized ||
      (normalized == slot->normalized && lex_less(prefix, slot->prefix, rank)))
    slot = Best{std::move(prefix), score, normalized};
}

DecodeResult search(const Scorer& scorer, const Sentence& source,
                    const std::vector<Sentence>& constraints, std::size_t max_len,
                    std::size_t beam) {
  if (beam == 0) throw std::invalid_argument("beam must be positive");
  if (max_len == 0) throw std::invalid_argument("max_len must be positive");

  ConstraintTrie trie(constraints);
  if (trie.total_tokens() > max_len)
    throw std::runtime_error("constraints exceed length budget");

  const std::vector<Token>& vocab = scorer.vocabulary();
  if (vocab.empty()) throw std::invalid_argument("scorer has an empty vocabulary");
  const std::size_t vsize = vocab.size();

  // rank[id] = position of vocab[id] in sorted token order, for tie-breaking.
  std::vector<std::size_t> order(vsize);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return vocab[a] < vocab[b];
  });
  std::vector<std::size_t> rank(vsize);
  for (std::size_t pos = 0; pos < vsize; ++pos) rank[order[pos]] = pos;

  std::vector<Hyp> live;
  live.push_back(Hyp{});
  std::optional<Best> best_finished;
  std::optional<Best> best_capped;  // all constraints met, stopped at max_len

  struct Cand {
    std::size_t parent;
    int token;
    double score;
    ConstraintState state;
  };

  for (std::size_t step = 0; step <= max_len && !live.empty(); ++step) {
    std::vector<Cand> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      const Hyp& hyp = live[h];
      std::vector<double> lps = scorer.next_logprobs(source, materialize(hyp.prefix, vocab));
      if (lps.size() != vsize + 1)
        throw std::runtime_error("scorer returned a wrong-sized distribution");
      double mass = 0.0;
      for (double lp : lps) mass += std::exp(lp);
      if (!(std::fabs(mass - 1.0) <= 1e-6)) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "scorer returned a non-distribution at step %zu",
                      step);
        throw std::runtime_error(buf);
      }

      // EOS is only an option once every constraint is satisfied.
      if (trie.all_satisfied(hyp.state) && lps[vsize] != kNegInf)
        consider(best_finished, hyp.prefix, hyp.score + lps[vsize], rank);

      if (hyp.prefix.size() == max_len) {
        if (trie.all_satisfied(hyp.state))
          consider(best_capped, hyp.prefix, hyp.score, rank);
        continue;
      }
      for (std::size_t w = 0; w < vsize; ++w) {
        ConstraintState ns = trie.advance(hyp.state, vocab[w]);
        bool progress = trie.bank_tokens(ns) > trie.bank_tokens(hyp.state);
        if (lps[w] == kNegInf && !progress) continue;
        cands.push_back(Cand{h, static_cast<int>(w), hyp.score + lps[w], ns});
      }
    }

    auto cand_less = [&](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.token != b.token || a.parent != b.parent) {
        const std::vector<int>& pa = live[a.parent].prefix;
        const std::vector<int>& pb = live[b.parent].prefix;
        std::size_t n = std::min(pa.size(), pb.size());
        for (std::size_t i = 0; i < n; ++i) {
          if (pa[i] != pb[i])
            return rank[static_cast<std::size_t>(pa[i])] <
                   rank[static_cast<std::size_t>(pb[i])];
        }
        if (pa.size() != pb.size()) return pa.size() < pb.size();
        return rank[static_cast<std::size_t>(a.token)] <
               rank[static_cast<std::size_t>(b.token)];
      }
      return false;
    };

    std::vector<const Cand*> kept;
    if (trie.constraint_count() == 0) {
      std::sort(cands.begin(), cands.end(), cand_less);
      for (std::size_t i = 0; i < cands.size() && i < beam; ++i) kept.push_back(&cands[i]);
    } else {
      std::map<std::size_t, std::vector<Cand*>> banks;
      for (Cand& c : cands) banks[trie.bank_tokens(c.state)].push_back(&c);
      std::vector<std::size_t> need;
      need.reserve(banks.size());
      for (const auto& [bank, members] : banks) need.push_back(members.size());
      std::vector<std::size_t> quota = allocate_slots(need, beam);
      std::size_t b = 0;
      for (auto& [bank, members] : banks) {
        std::sort(members.begin(), members.end(),
                  [&](const Cand* x, const Cand* y) { return cand_less(*x, *y); });
        for (std::size_t i = 0; i < quota[b] && i < members.size(); ++i)
          kept.push_back(members[i]);
        ++b;
      }
    }

    std::vector<Hyp> next;
    next.reserve(kept.size());
    for (const Cand* c : kept) {
      Hyp hyp;
      hyp.prefix = live[c->parent].prefix;
      hyp.prefix.push_back(c->token);
      hyp.score = c->score;
      hyp.state = c->state;
      next.push_back(std::move(hyp));
    }
    live = std::move(next);
  }

  DecodeResult result;
  result.constraints_total = trie.constraint_count();
  const Best* pick = nullptr;
  if (best_finished) {
    pick = &*best_finished;
    result.finished = true;
  } else if (best_capped) {
    pick = &*best_capped;
    result.finished = false;
  } else {
    throw std::runtime_error("no hypothesis satisfied the constraints within the length budget");
  }
  result.tokens = materialize(pick->prefix, vocab);
  result.score = pick->score;
  result.normalized_score = pick->normalized;
  result.constraints_satisfied = trie.constraint_count();
  return result;
}

}  // namespace

DecodeResult beam_search(const Scorer& scorer, const Sentence& source,
                         std::size_t max_len, std::size_t beam) {
  return search(scorer, source, {}, max_len, beam);
}

DecodeResult constrained_beam_search(const Scorer& scorer, const Sentence& source,
                                     const std::vector<Sentence>& constraints,
                                     std::size_t max_len, std::size_t beam) {
  return search(scorer, source, constraints, max_len, beam);
}

ToyScorer::ToyScorer(align::TranslationTable lexicon, ngram_lm::NGramModel target_lm,
                     double lambda)
    : lexicon_(std::move(lexicon)), lm_(std::move(target_lm)), lambda_(lambda) {
  if (!(lambda_ >= 0.0 && lambda_ <= 1.0))
    throw std::invalid_argument("lambda must be within [0,1]");
  std::set<Token> words(lm_.vocab().begin(), lm_.vocab().end());
  for (const auto& [src, row] : lexicon_.rows())
    for (const auto& [tgt, p] : row) words.insert(tgt);
  for (const Token& w : words) {
    if (w == kUnkToken || w == kBosToken || w == kEosToken || w == kNullToken) continue;
    vocab_.push_back(w);
  }
  if (vocab_.empty()) throw std::invalid_argument("toy scorer has an empty vocabulary");
}

std::vector<double> ToyScorer::next_logprobs(const Sentence& source,
                                             const Sentence& prefix) const {
  const std::size_t vsize = vocab_.size();
  std::vector<double> p_lm(vsize + 1, 0.0);
  double z_lm = 0.0;
  for (std::size_t i = 0; i < vsize; ++i) {
    p_lm[i] = std::exp(lm_.log_prob(prefix, vocab_[i]));
    z_lm += p_lm[i];
  }
  p_lm[vsize] = std::exp(lm_.log_prob(prefix, kEosToken));
  z_lm += p_lm[vsize];
  for (double& p : p_lm) p /= z_lm;

  std::vector<double> p_lex(vsize + 1, 0.0);
  double z_lex = 0.0;
  for (std::size_t i = 0; i < vsize; ++i) {
    double acc = 0.0;
    for (const Token& s : source) acc += lexicon_.prob(s, vocab_[i]);
    p_lex[i] = acc;
    z_lex += acc;
  }
  if (z_lex > 0.0) {
    for (double& p : p_lex) p /= z_lex;
  } else {
    std::fill(p_lex.begin(), p_lex.end(), 1.0 / static_cast<double>(vsize + 1));
  }

  std::vector<double> out(vsize + 1);
  for (std::size_t i = 0; i <= vsize; ++i)
    out[i] = std::log(lambda_ * p_lm[i] + (1.0 - lambda_) * p_lex[i]);
  return out;
}

std::unique_ptr<Scorer> make_toy_scorer(align::TranslationTable lexicon,
                                        ngram_lm::NGramModel target_lm, double lambda) {
  return std::make_unique<ToyScorer>(std::move(lexicon), std::move(target_lm), lambda);
}

}  // namespace termforge::decoder
