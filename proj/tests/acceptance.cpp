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

// Release gate: one self-contained check per guarantee the toolkit makes,
// each validated against an independent oracle or a hand-computed value.
// Prints one PASS/FAIL line per check and exits nonzero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "termforge/align.hpp"
#include "termforge/backtranslate.hpp"
#include "termforge/constraints.hpp"
#include "termforge/corpusfilter.hpp"
#include "termforge/decoder.hpp"
#include "termforge/eval.hpp"
#include "termforge/ngram_lm.hpp"
#include "termforge/phrasex.hpp"
#include "termforge/pipeline.hpp"
#include "termforge/textproc.hpp"
#include "termforge/util.hpp"
#include "test_support.hpp"

using namespace termforge;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

[[noreturn]] void bail(const std::string& msg) { throw std::runtime_error(msg); }

void expect(bool ok, const std::string& msg) {
  if (!ok) bail(msg);
}

void expect_near(double got, double want, double tol, const std::string& what) {
  if (!(std::fabs(got - want) <= tol))
    bail(what + ": got " + std::to_string(got) + ", want " + std::to_string(want) +
         " within " + std::to_string(tol));
}

// --- scorers and oracles shared by the decoder checks -----------------------

// Pure hash-driven scorer: the distribution is a deterministic function of
// the prefix, so exhaustive oracles can re-derive identical scores.
struct HashScorer : decoder::Scorer {
  std::vector<Token> vocab;  // kept sorted so rank order == string order
  std::uint64_t salt = 0;

  HashScorer(std::vector<Token> v, std::uint64_t s) : vocab(std::move(v)), salt(s) {
    std::sort(vocab.begin(), vocab.end());
  }
  const std::vector<Token>& vocabulary() const override { return vocab; }
  std::vector<double> next_logprobs(const Sentence&, const Sentence& prefix) const override {
    std::string key = std::to_string(salt);
    for (const auto& t : prefix) key += '\x1f' + t;
    std::vector<double> w(vocab.size() + 1);
    double z = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = 1.0 + static_cast<double>(util::fnv1a(key + '\x1e' + std::to_string(i)) % 997);
      z += w[i];
    }
    for (double& x : w) x = std::log(x / z);
    return w;
  }
};

bool contains_contiguous(const Sentence& hay, const Sentence& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i)
    if (std::equal(needle.begin(), needle.end(), hay.begin() + i)) return true;
  return false;
}

struct OracleBest {
  Sentence tokens;
  double normalized = 0.0;
  bool found = false;
};

// Brute force over every sequence up to max_len (EOS-terminated), keeping the
// best normalized score among those containing all constraints contiguously.
void oracle_walk(const decoder::Scorer& s, const Sentence& source,
                 const std::vector<Sentence>& constraints, std::size_t max_len,
                 Sentence& prefix, double score, OracleBest* best) {
  std::vector<double> lps = s.next_logprobs(source, prefix);
  const auto& vocab = s.vocabulary();

  double fin = score + lps[vocab.size()];
  if (fin != kNegInf) {
    bool ok = true;
    for (const auto& c : constraints)
      if (!contains_contiguous(prefix, c)) ok = false;
    if (ok) {
      double normalized = fin / static_cast<double>(std::max<std::size_t>(1, prefix.size()));
      if (!best->found || normalized > best->normalized ||
          (normalized == best->normalized && prefix < best->tokens)) {
        best->tokens = prefix;
        best->normalized = normalized;
        best->found = true;
      }
    }
  }
  if (prefix.size() == max_len) return;
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    if (lps[w] == kNegInf) continue;
    prefix.push_back(vocab[w]);
    oracle_walk(s, source, constraints, max_len, prefix, score + lps[w], best);
    prefix.pop_back();
  }
}

OracleBest oracle(const decoder::Scorer& s, const Sentence& source,
                  const std::vector<Sentence>& constraints, std::size_t max_len) {
  OracleBest best;
  Sentence prefix;
  oracle_walk(s, source, constraints, max_len, prefix, 0.0, &best);
  return best;
}

std::vector<Token> numbered_vocab(const char* stem, std::size_t n) {
  std::vector<Token> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) v.push_back(stem + std::to_string(i));
  return v;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

// --- 1: every constrained decode contains every constraint ------------------

void check_constraint_guarantee() {
  ts::Rng rng(0xACC701);
  auto t0 = std::chrono::steady_clock::now();
  for (int rep = 0; rep < 1000; ++rep) {
    std::size_t vs = 2 + rng.index(49);  // 2..50
    std::vector<Token> vocab = numbered_vocab("w", vs);
    HashScorer scorer(vocab, rng.eng());

    std::size_t nc = 1 + rng.index(3);  // 1..3 constraints
    std::vector<Sentence> cons;
    std::size_t total = 0;
    for (std::size_t c = 0; c < nc; ++c) {
      std::size_t len = 1 + rng.index(3);  // 1..3 tokens each
      Sentence s;
      for (std::size_t i = 0; i < len; ++i) s.push_back(vocab[rng.index(vs)]);
      total += s.size();
      cons.push_back(std::move(s));
    }
    std::size_t max_len = total + 2 + rng.index(5);  // always feasible

    decoder::DecodeResult r =
        decoder::constrained_beam_search(scorer, {}, cons, max_len, 20);
    for (const Sentence& c : cons)
      expect(contains_contiguous(r.tokens, c),
             "rep " + std::to_string(rep) + ": constraint missing from the output");
    expect(r.constraints_satisfied == r.constraints_total,
           "rep " + std::to_string(rep) + ": satisfied != total");
    expect(r.tokens.size() <= max_len, "output exceeds the length budget");
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  expect(secs < 60.0, "runtime " + std::to_string(secs) + "s exceeds the 60s budget");
}

// --- 2: beam == brute force when the beam covers the full space -------------

void check_oracle_optimality() {
  ts::Rng rng(0xACC702);
  const std::size_t beam = 20000;  // > 5^6, so nothing is ever pruned

  for (int rep = 0; rep < 150; ++rep) {  // unconstrained half
    std::size_t vs = 2 + rng.index(4);   // 2..5
    HashScorer scorer(numbered_vocab("v", vs), rng.eng());
    std::size_t max_len = 1 + rng.index(6);  // 1..6
    decoder::DecodeResult got = decoder::beam_search(scorer, {}, max_len, beam);
    OracleBest want = oracle(scorer, {}, {}, max_len);
    expect(want.found, "oracle found no finished sequence");
    expect(got.tokens == want.tokens,
           "unconstrained rep " + std::to_string(rep) + ": argmax mismatch");
  }

  for (int rep = 0; rep < 150; ++rep) {  // constrained half
    std::size_t vs = 2 + rng.index(4);
    std::vector<Token> vocab = numbered_vocab("v", vs);
    HashScorer scorer(vocab, rng.eng());

    std::size_t nc = 1 + rng.index(2);  // 1..2 constraints, 1..2 tokens each
    std::vector<Sentence> cons;
    std::size_t total = 0;
    for (std::size_t c = 0; c < nc; ++c) {
      std::size_t len = 1 + rng.index(2);
      Sentence s;
      for (std::size_t i = 0; i < len; ++i) s.push_back(vocab[rng.index(vs)]);
      total += s.size();
      cons.push_back(std::move(s));
    }
    std::size_t max_len = std::min<std::size_t>(6, total + rng.index(7 - total));

    decoder::DecodeResult got =
        decoder::constrained_beam_search(scorer, {}, cons, max_len, beam);
    OracleBest want = oracle(scorer, {}, cons, max_len);
    expect(want.found, "constrained oracle found no valid sequence");
    expect(got.tokens == want.tokens,
           "constrained rep " + std::to_string(rep) + ": argmax mismatch");
  }
}

// --- 3: no constraints means plain beam search -------------------------------

void check_empty_constraint_reduction() {
  ts::Rng rng(0xACC703);
  for (int rep = 0; rep < 500; ++rep) {
    std::size_t vs = 2 + rng.index(7);  // 2..8
    HashScorer scorer(numbered_vocab("t", vs), rng.eng());
    std::size_t max_len = 1 + rng.index(7);
    std::size_t beam = 1 + rng.index(10);

    decoder::DecodeResult plain = decoder::beam_search(scorer, {}, max_len, beam);
    decoder::DecodeResult gated =
        decoder::constrained_beam_search(scorer, {}, {}, max_len, beam);
    expect(gated.tokens == plain.tokens,
           "rep " + std::to_string(rep) + ": token sequences differ");
    expect(gated.score == plain.score && gated.finished == plain.finished,
           "rep " + std::to_string(rep) + ": result metadata differs");
  }
}

// --- 4: EM disambiguates the textbook two-pair corpus ------------------------

void check_ibm1_disambiguation() {
  align::Bitext bitext = {{ts::sent({"la", "maison"}), ts::sent({"the", "house"})},
                          {ts::sent({"la"}), ts::sent({"the"})}};
  std::vector<double> loglik;
  align::TranslationTable table = align::train_model1(bitext, 20, align::kNullProb, &loglik);

  expect(table.prob("la", "the") >= 0.99,
         "p(the|la) = " + std::to_string(table.prob("la", "the")) + " < 0.99");
  expect(loglik.size() == 20, "expected one log-likelihood per iteration");
  for (std::size_t i = 1; i < loglik.size(); ++i)
    expect(loglik[i] >= loglik[i - 1] - 1e-9,
           "log-likelihood decreased at iteration " + std::to_string(i));
}

// --- 5: phrase extraction equals box enumeration; prob filter caps targets ---

using PairSet = std::set<std::pair<Sentence, Sentence>>;

PairSet phrase_box_oracle(const Sentence& src, const Sentence& tgt,
                          const align::Alignment& a, std::size_t max_len) {
  PairSet out;
  for (std::size_t i1 = 0; i1 < src.size(); ++i1)
    for (std::size_t i2 = i1; i2 < src.size() && i2 - i1 < max_len; ++i2)
      for (std::size_t j1 = 0; j1 < tgt.size(); ++j1)
        for (std::size_t j2 = j1; j2 < tgt.size() && j2 - j1 < max_len; ++j2) {
          bool consistent = true, any_inside = false;
          for (const auto& l : a) {
            bool in_src = l.src >= i1 && l.src <= i2;
            bool in_tgt = l.tgt >= j1 && l.tgt <= j2;
            if (in_src != in_tgt) consistent = false;
            if (in_src && in_tgt) any_inside = true;
          }
          if (consistent && any_inside)
            out.insert({Sentence(src.begin() + i1, src.begin() + i2 + 1),
                        Sentence(tgt.begin() + j1, tgt.begin() + j2 + 1)});
        }
  return out;
}

void check_phrase_extraction_oracle() {
  ts::Rng rng(0xACC705);
  align::Bitext batch_bitext;
  std::vector<align::Alignment> batch_aligns;
  int tables_checked = 0;

  for (int rep = 0; rep < 500; ++rep) {
    std::size_t n = 1 + rng.index(6), m = 1 + rng.index(6);
    Sentence src, tgt;
    for (std::size_t i = 0; i < n; ++i) src.push_back(ts::random_word(rng, 4, 3));
    for (std::size_t j = 0; j < m; ++j) tgt.push_back(ts::random_word(rng, 4, 3));
    align::Alignment a;
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    int k = rng.range(0, 7);
    for (int i = 0; i < k; ++i) {
      auto l = std::make_pair(static_cast<std::uint32_t>(rng.index(n)),
                              static_cast<std::uint32_t>(rng.index(m)));
      if (seen.insert(l).second) a.push_back({l.first, l.second});
    }
    std::size_t max_len = 1 + rng.index(7);

    std::vector<phrasex::PhrasePair> got = phrasex::extract_phrases(src, tgt, a, max_len);
    PairSet got_set;
    for (const auto& p : got) got_set.insert({p.source, p.target});
    expect(got_set.size() == got.size(), "extract_phrases returned duplicates");
    expect(got_set == phrase_box_oracle(src, tgt, a, max_len),
           "rep " + std::to_string(rep) + ": extraction differs from box enumeration");

    batch_bitext.emplace_back(src, tgt);
    batch_aligns.push_back(a);
    if (batch_bitext.size() == 25) {
      phrasex::PhraseTable table = phrasex::build_phrase_table(batch_bitext, batch_aligns, 4);
      phrasex::PhraseTable kept = phrasex::filter_by_prob(table, 0.5);
      std::map<Sentence, int> per_source;
      for (const auto& p : kept.entries()) {
        expect(p.prob > 0.5, "filter_by_prob kept an entry at or below the threshold");
        expect(++per_source[p.source] <= 1, "source kept more than one translation");
      }
      batch_bitext.clear();
      batch_aligns.clear();
      ++tables_checked;
    }
  }
  expect(tables_checked == 20, "expected 20 phrase tables to be checked");
}

// --- 6: Moore-Lewis separates disjoint-vocabulary domains --------------------

void check_moore_lewis_separation() {
  std::vector<std::string> in_lines = {
      "aa bb cc dd", "bb cc dd aa", "cc dd aa bb", "dd aa bb cc", "aa cc bb dd"};
  std::vector<std::string> out_lines = {
      "xx yy zz ww", "yy zz ww xx", "zz ww xx yy", "ww xx yy zz", "xx zz yy ww"};
  auto to_corpus = [](const std::vector<std::string>& lines) {
    std::vector<Sentence> c;
    for (const auto& l : lines) c.push_back(util::split_tokens(l));
    return c;
  };
  ngram_lm::NGramModel in_lm = ngram_lm::lm_train(to_corpus(in_lines), 2);
  ngram_lm::NGramModel out_lm = ngram_lm::lm_train(to_corpus(out_lines), 2);

  std::vector<std::string> mixed;
  for (std::size_t i = 0; i < in_lines.size(); ++i) {
    mixed.push_back(out_lines[i]);  // interleave, out-domain first
    mixed.push_back(in_lines[i]);
  }
  std::vector<std::string> selected =
      ngram_lm::select_top(mixed, in_lm, out_lm, in_lines.size());
  expect(selected == in_lines, "selection is not exactly the in-domain lines");

  ts::Rng rng(0xACC706);
  std::vector<std::string> pool = {"aa", "bb", "cc", "dd", "xx", "yy", "zz", "ww", "oov"};
  for (int rep = 0; rep < 200; ++rep) {
    Sentence s;
    int len = rng.range(1, 8);
    for (int i = 0; i < len; ++i) s.push_back(pool[rng.index(pool.size())]);
    double fwd = ngram_lm::moore_lewis(in_lm, out_lm, s);
    double rev = ngram_lm::moore_lewis(out_lm, in_lm, s);
    expect(std::fabs(fwd + rev) <= 1e-12, "moore_lewis antisymmetry violated");
  }
}

// --- 7: BPE merges match the hand derivation; apply/decode round-trips -------

void check_bpe() {
  std::map<std::string, std::uint64_t> freqs = {
      {"low", 5}, {"lower", 2}, {"newest", 6}, {"widest", 3}};
  textproc::BpeModel model = textproc::bpe_learn(freqs, 6);
  std::vector<std::pair<std::string, std::string>> want = {
      {"e", "s"}, {"es", "t"}, {"est", "</w>"}, {"l", "o"}, {"lo", "w"}, {"e", "w"}};
  expect(model.merges == want, "toy-corpus merge sequence differs from the hand derivation");

  ts::Rng rng(0xACC707);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(ts::random_sentence(rng));
  textproc::BpeModel learned = textproc::bpe_learn(textproc::word_frequencies(corpus), 30);
  for (int rep = 0; rep < 1000; ++rep) {
    Sentence s = ts::random_sentence(rng, 10, 8, 7);
    expect(textproc::bpe_decode(textproc::bpe_apply(learned, s)) == s,
           "rep " + std::to_string(rep) + ": BPE round trip changed the sentence");
  }

  ts::TempDir dir("acc_bpe");
  learned.save(dir.file("first.bpe"));
  textproc::BpeModel reloaded = textproc::BpeModel::load(dir.file("first.bpe"));
  reloaded.save(dir.file("second.bpe"));
  expect(ts::read_file(dir.file("first.bpe")) == ts::read_file(dir.file("second.bpe")),
         "saved model bytes changed across a load/save cycle");
  expect(reloaded.merges == learned.merges, "reloaded merges differ");
}

// --- 8: the filter forest separates, thresholds nest, features stay finite ---

corpusfilter::FeatureVector synth_row(ts::Rng& rng, int label) {
  corpusfilter::FeatureVector x{};
  for (std::size_t j = 0; j < corpusfilter::kNumFeatures; ++j) {
    double base = (j % 3 == 0) ? (label == 1 ? 1.0 : 0.0) : 0.5;
    x[j] = base + 0.2 * (rng.real() - 0.5);
  }
  return x;
}

void check_corpus_filter() {
  ts::Rng rng(0xACC708);
  std::vector<corpusfilter::FeatureVector> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (int i = 0; i < 200; ++i) {
    int label = i % 2;
    train_x.push_back(synth_row(rng, label));
    train_y.push_back(label);
  }
  for (int i = 0; i < 200; ++i) {
    int label = i % 2;
    test_x.push_back(synth_row(rng, label));
    test_y.push_back(label);
  }
  corpusfilter::ForestParams params;
  params.trees = 60;
  params.max_depth = 8;
  params.seed = 42;
  corpusfilter::ForestModel forest = corpusfilter::train_forest(train_x, train_y, params);

  int correct = 0;
  for (std::size_t i = 0; i < test_x.size(); ++i) {
    int predicted = forest.predict(test_x[i]) > 0.5 ? 1 : 0;
    if (predicted == test_y[i]) ++correct;
  }
  double accuracy = static_cast<double>(correct) / static_cast<double>(test_x.size());
  expect(accuracy >= 0.95, "held-out accuracy " + std::to_string(accuracy) + " < 0.95");

  std::vector<std::size_t> strict = corpusfilter::apply_filter(test_x, forest, 0.8);
  std::vector<std::size_t> loose = corpusfilter::apply_filter(test_x, forest, 0.5);
  std::set<std::size_t> loose_set(loose.begin(), loose.end());
  for (std::size_t i : strict)
    expect(loose_set.count(i) == 1, "index kept at 0.8 but dropped at 0.5");

  // Feature fuzz against real resources, including empty and pathological sides.
  std::vector<Sentence> src_seed, tgt_seed;
  std::vector<std::string> src_seed_lines, tgt_seed_lines;
  for (int i = 0; i < 20; ++i) {
    Sentence a = ts::random_sentence(rng), b = ts::random_sentence(rng);
    src_seed.push_back(a);
    tgt_seed.push_back(b);
    src_seed_lines.push_back(util::join_tokens(a));
    tgt_seed_lines.push_back(util::join_tokens(b));
  }
  ngram_lm::NGramModel src_lm = ngram_lm::lm_train(src_seed, 2);
  ngram_lm::NGramModel tgt_lm = ngram_lm::lm_train(tgt_seed, 2);
  align::TranslationTable dict;
  dict.set("aa", "bb", 1.0);
  dict.set("cc", "dd", 0.5);
  dict.set("cc", "ee", 0.5);
  corpusfilter::FilterResources res = corpusfilter::make_resources(
      &src_lm, &tgt_lm, dict, src_seed_lines, tgt_seed_lines);

  std::vector<Token> weird = {"aa",   "cc",    "123", "3,14",      ".",
                              "!",    "héllo", "größe", "',\"-",   "0",
                              "zzzzzzzzzzzzzzzzzzzzzzzzzzzzzz",    "a"};
  for (int rep = 0; rep < 10000; ++rep) {
    auto draw = [&](Sentence* s) {
      if (rng.coin(0.05)) return;  // empty side
      int len = rng.range(1, 9);
      for (int i = 0; i < len; ++i)
        s->push_back(rng.coin(0.3) ? weird[rng.index(weird.size())]
                                   : ts::random_word(rng));
    };
    Sentence src, tgt;
    draw(&src);
    draw(&tgt);
    corpusfilter::FeatureVector x = corpusfilter::extract_features(src, tgt, res);
    for (std::size_t j = 0; j < x.size(); ++j)
      expect(std::isfinite(x[j]),
             "feature " + std::to_string(j) + " not finite at rep " + std::to_string(rep));
  }
}

// --- 9: BLEU identity, hand-computed clipping, zero overlap ------------------

void check_bleu() {
  std::vector<std::string> refs = {"the quick brown fox jumps over the lazy dog",
                                   "machine translation quality is hard to judge",
                                   "short line here"};
  eval::BleuScore identity = eval::bleu(refs, refs);
  expect(identity.score == 100.0, "identity corpus did not score exactly 100");
  expect(identity.brevity_penalty == 1.0, "identity corpus BP is not 1");

  // Pathological clipping: every hypothesis unigram is "the" but the
  // reference contains it once, so p1 clips to 1/3 and higher orders vanish.
  eval::BleuScore clipped = eval::bleu({"the the the"}, {"the cat"});
  expect_near(clipped.precisions[0], 100.0 / 3.0, 1e-9, "clipped p1");
  expect(clipped.precisions[1] == 0.0 && clipped.precisions[2] == 0.0 &&
             clipped.precisions[3] == 0.0,
         "higher-order precisions should be zero");
  expect(clipped.brevity_penalty == 1.0, "hypothesis longer than reference must not be penalized");
  expect(clipped.score == 0.0, "a zero match count at any order must zero the score");

  // Full-precision arithmetic oracle with all four orders populated.
  eval::BleuScore partial = eval::bleu({"a b c d e f"}, {"a b c d x y z"});
  double p1 = 4.0 / 6.0, p2 = 3.0 / 5.0, p3 = 2.0 / 4.0, p4 = 1.0 / 3.0;
  double bp = std::exp(1.0 - 7.0 / 6.0);
  double want = bp * std::exp((std::log(p1) + std::log(p2) + std::log(p3) + std::log(p4)) / 4.0);
  expect_near(partial.score, 100.0 * want, 1e-9, "four-order hand case");
  expect_near(partial.precisions[0], 100.0 * p1, 1e-9, "hand case p1");
  expect_near(partial.precisions[3], 100.0 * p4, 1e-9, "hand case p4");
  expect_near(partial.brevity_penalty, bp, 1e-12, "hand case BP");

  eval::BleuScore disjoint =
      eval::bleu({"alpha beta gamma delta"}, {"one two three four"});
  expect(disjoint.score == 0.0, "zero-overlap corpus must score 0");
}

// --- 10: copy candidates and the named-entity gate ---------------------------

void check_ne_gating() {
  constraints::NeTagger plain;  // capitalized-run tagger, no gazetteer

  // Source-side mono corpus: Poutine appears 15 times, Dupont-Aignan 12.
  std::vector<Sentence> src_mono, tgt_mono;
  for (int i = 0; i < 15; ++i) src_mono.push_back(ts::sent({"hier", "parlait", "Poutine"}));
  for (int i = 0; i < 12; ++i)
    src_mono.push_back(ts::sent({"et", "Dupont-Aignan", "proteste"}));
  // Target side: the transliterated Putin 20 times, Dupont-Aignan only 10.
  for (int i = 0; i < 20; ++i) tgt_mono.push_back(ts::sent({"gestern", "sprach", "Putin"}));
  for (int i = 0; i < 10; ++i)
    tgt_mono.push_back(ts::sent({"und", "Dupont-Aignan", "protestiert"}));

  auto src_counts = constraints::count_ne_phrases(src_mono, plain);
  auto tgt_counts = constraints::count_ne_phrases(tgt_mono, plain);
  expect(src_counts.at(ts::sent({"Poutine"})) == 15, "source count of Poutine");
  expect(tgt_counts.at(ts::sent({"Putin"})) == 20, "target count of Putin");

  std::vector<constraints::Constraint> copies =
      constraints::extract_copy_candidates(src_counts, tgt_counts, 9);
  expect(copies.size() == 1, "exactly one copy candidate expected");
  expect(copies[0].source == ts::sent({"Dupont-Aignan"}) &&
             copies[0].target == ts::sent({"Dupont-Aignan"}) &&
             copies[0].mode == constraints::Mode::kNeGated,
         "the both-sides-frequent name must become the NE-gated copy constraint");

  // Gate property: gated matches only ever fire inside tagged NE spans.
  constraints::NeTagger tagger({ts::sent({"grand", "paris"})});
  constraints::ConstraintSet set;
  set.add({ts::sent({"Macron"}), ts::sent({"MACRON"}), constraints::Mode::kNeGated});
  set.add({ts::sent({"grand", "paris"}), ts::sent({"GP"}), constraints::Mode::kNeGated});
  set.add({ts::sent({"vert"}), ts::sent({"VERT"}), constraints::Mode::kNeGated});
  set.add({ts::sent({"Le", "Pen"}), ts::sent({"LP"}), constraints::Mode::kNeGated});

  ts::Rng rng(0xACC710);
  std::vector<Token> fillers = {"le", "vote", "vert", "arrive", "membre", "ici"};
  std::vector<Token> names = {"Macron", "Le", "Pen", "Grand", "Paris", "grand", "paris"};
  int fired = 0;
  for (int rep = 0; rep < 500; ++rep) {
    Sentence line;
    int len = rng.range(1, 9);
    for (int i = 0; i < len; ++i)
      line.push_back(rng.coin(0.35) ? names[rng.index(names.size())]
                                    : fillers[rng.index(fillers.size())]);
    std::vector<constraints::Span> spans = tagger.tag(line);
    for (const constraints::Match& m : constraints::match_ne_gated(line, set, tagger)) {
      ++fired;
      bool inside = false;
      for (const constraints::Span& s : spans)
        if (s.contains(m.span)) inside = true;
      expect(inside, "rep " + std::to_string(rep) + ": gated match outside every NE span");
      const Sentence& source = set.items()[m.constraint_index].source;
      expect(m.span.end - m.span.begin == source.size(), "match span width is wrong");
    }
  }
  expect(fired > 0, "the gate property never fired; the generator is too weak");
}

// --- 11: the toy pipeline is deterministic and keeps its terminology ---------

std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> bytes;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      bytes[std::filesystem::relative(entry.path(), root).string()] =
          util::read_file(entry.path().string());
  return bytes;
}

void check_pipeline_determinism() {
  ts::TempDir dir("acc_pipeline");
  std::filesystem::create_directories(dir.path / "data");
  std::filesystem::create_directories(dir.path / "work");
  auto data = [&](const std::string& name) { return (dir.path / "data" / name).string(); };
  auto work = [&](const std::string& name) { return (dir.path / "work" / name).string(); };

  // Raw target-language text with messy whitespace: double spaces, tabs,
  // no-break spaces, a soft hyphen, leading and trailing runs.
  ts::write_file(data("raw_fr.txt"), join_lines({
      "les  gilets jaunes manifestent\xc2\xa0\x61 Paris",
      "les manifestants marchent a Paris  ",
      " les gilets\tjaunes marchent maintenant",
      "le vote arrive bien\xc2\xadtot",
      "les manifestants\xc2\xa0manifestent maintenant",
      "zzz",
      "qqq www eee rrr  ttt yyy uuu iii"}));
  ts::write_file(data("de_tok.txt"), join_lines({
      "die Gelbwesten demonstrieren in Paris",
      "die Demonstranten marschieren in Paris",
      "die Gelbwesten marschieren heute",
      "die Wahl kommt bald",
      "die Demonstranten demonstrieren heute",
      "111 222 333 444 555 666 777 888",
      "x"}));
  ts::write_file(data("de_other.txt"), join_lines({
      "der Hund schlaeft tief",
      "eine Katze miaut laut",
      "das Wetter bleibt kalt",
      "der Zug faehrt los"}));
  ts::write_file(data("labels.tsv"), join_lines({
      "0\t1", "1\t1", "2\t1", "3\t1", "4\t1", "5\t0", "6\t0"}));
  ts::write_file(data("de_mono.txt"), join_lines({
      "die Gelbwesten demonstrieren heute",
      "die Demonstranten marschieren in Paris",
      "die Wahl kommt",
      "Gelbwesten demonstrieren in Paris",
      "der Hund schlaeft heute",
      "eine Katze miaut laut"}));
  align::TranslationTable seed_dict;
  seed_dict.set("die", "les", 1.0);
  seed_dict.set("Gelbwesten", "gilets", 0.5);
  seed_dict.set("Gelbwesten", "jaunes", 0.5);
  seed_dict.set("Demonstranten", "manifestants", 1.0);
  seed_dict.set("demonstrieren", "manifestent", 1.0);
  seed_dict.set("marschieren", "marchent", 1.0);
  seed_dict.set("Wahl", "vote", 1.0);
  seed_dict.set("kommt", "arrive", 1.0);
  seed_dict.set("in", "a", 1.0);
  seed_dict.set("Paris", "Paris", 1.0);
  seed_dict.save(data("seed_dict.tsv"));

  nlohmann::json cfg;
  cfg["seed"] = 20190815;
  cfg["manifest_dir"] = (dir.path / "manifests").string();
  cfg["stages"] = {"normalize", "tokenize", "lm-train.de", "lm-train.fr", "lm-train.ood",
                   "filter-features", "filter-train", "filter-apply", "bpe-learn",
                   "bpe-apply", "bpe-decode", "align-train", "align-symmetrize",
                   "phrase-extract", "phrase-filter", "constraints-export",
                   "backtranslate", "bleu", "term-recall"};
  cfg["normalize"] = {{"input", data("raw_fr.txt")}, {"output", work("fr_norm.txt")}};
  cfg["tokenize"] = {{"input", work("fr_norm.txt")}, {"output", work("fr_tok.txt")}};
  cfg["lm-train.de"] = {{"input", data("de_tok.txt")}, {"order", 2}, {"model", work("de.model")}};
  cfg["lm-train.fr"] = {{"input", work("fr_tok.txt")}, {"order", 2}, {"model", work("fr.model")}};
  cfg["lm-train.ood"] = {
      {"input", data("de_other.txt")}, {"order", 2}, {"model", work("ood.model")}};
  cfg["filter-features"] = {{"source", data("de_tok.txt")},  {"target", work("fr_tok.txt")},
                            {"src_lm", work("de.model")},    {"tgt_lm", work("fr.model")},
                            {"dictionary", data("seed_dict.tsv")},
                            {"src_seed", data("de_tok.txt")},
                            {"tgt_seed", work("fr_tok.txt")},
                            {"output", work("features.tsv")}};
  cfg["filter-train"] = {{"features", work("features.tsv")}, {"labels", data("labels.tsv")},
                         {"trees", 50},                      {"depth", 8},
                         {"seed", 7},                        {"model", work("forest.model")}};
  cfg["filter-apply"] = {{"features", work("features.tsv")}, {"model", work("forest.model")},
                         {"threshold", 0.5},                 {"source", data("de_tok.txt")},
                         {"target", work("fr_tok.txt")},     {"out_source", work("de_clean.txt")},
                         {"out_target", work("fr_clean.txt")},
                         {"output", work("kept.txt")}};
  cfg["bpe-learn"] = {
      {"input", work("fr_clean.txt")}, {"merges", 20}, {"model", work("fr_bpe.model")}};
  cfg["bpe-apply"] = {{"input", work("fr_clean.txt")},
                      {"model", work("fr_bpe.model")},
                      {"output", work("fr_bpe.txt")}};
  cfg["bpe-decode"] = {{"input", work("fr_bpe.txt")}, {"output", work("fr_rt.txt")}};
  cfg["align-train"] = {{"source", work("de_clean.txt")},
                        {"target", work("fr_clean.txt")},
                        {"iterations", 10},
                        {"forward_model", work("fwd.model")},
                        {"reverse_model", work("rev.model")}};
  cfg["align-symmetrize"] = {{"source", work("de_clean.txt")},
                             {"target", work("fr_clean.txt")},
                             {"forward_model", work("fwd.model")},
                             {"reverse_model", work("rev.model")},
                             {"output", work("aligns.txt")}};
  cfg["phrase-extract"] = {{"source", work("de_clean.txt")},
                           {"target", work("fr_clean.txt")},
                           {"alignments", work("aligns.txt")},
                           {"max_phrase_len", 3},
                           {"table", work("phrases.tsv")}};
  cfg["phrase-filter"] = {{"table", work("phrases.tsv")},
                          {"prob_threshold", 0.5},
                          {"output", work("phrases_kept.tsv")}};
  cfg["constraints-export"] = {{"table", work("phrases_kept.tsv")},
                               {"mode", "always"},
                               {"output", work("constraints.tsv")}};
  cfg["backtranslate"] = {{"mono", data("de_mono.txt")},
                          {"in_lm", work("de.model")},
                          {"out_lm", work("ood.model")},
                          {"top_n", 4},
                          {"lexicon", work("fwd.model")},
                          {"lm", work("fr.model")},
                          {"lambda", 0.5},
                          {"constraints", work("constraints.tsv")},
                          {"mode", "constrained"},
                          {"max_len", 30},
                          {"out_source", work("bt_src.txt")},
                          {"out_target", work("bt_tgt.txt")},
                          {"stats_out", work("bt_stats.json")},
                          {"constraints_log", work("bt_log.tsv")}};
  cfg["bleu"] = {{"hyp", work("fr_rt.txt")}, {"ref", work("fr_clean.txt")},
                 {"output", work("bleu.txt")}};
  cfg["term-recall"] = {{"hyp", work("bt_src.txt")},
                        {"constraints_log", work("bt_log.tsv")},
                        {"output", work("recall.json")}};
  ts::write_file(data("config.json"), cfg.dump(2) + "\n");

  pipeline::run_all(pipeline::validate_config(data("config.json")));
  std::map<std::string, std::string> first = snapshot_tree(dir.path / "work");
  std::map<std::string, std::string> first_manifests = snapshot_tree(dir.path / "manifests");

  pipeline::run_all(pipeline::validate_config(data("config.json")));
  std::map<std::string, std::string> second = snapshot_tree(dir.path / "work");
  std::map<std::string, std::string> second_manifests = snapshot_tree(dir.path / "manifests");

  expect(first.size() >= 20, "pipeline produced fewer artifacts than expected");
  expect(first == second, "artifacts differ between identically seeded runs");
  expect(first_manifests == second_manifests, "manifests differ between runs");
  expect(first_manifests.size() == 19, "expected one manifest per configured stage");

  nlohmann::json recall = nlohmann::json::parse(util::read_file(work("recall.json")));
  expect(recall.at("vacuous").get<bool>() == false,
         "no constraints were applied; the toy corpus is miswired");
  expect(recall.at("applied").get<std::uint64_t>() >= 1, "expected at least one applied constraint");
  expect(recall.at("recall").get<double>() == 1.0,
         "term recall " + recall.at("recall").dump() + " != 1.0 on feasible lines");

  nlohmann::json stats = nlohmann::json::parse(util::read_file(work("bt_stats.json")));
  expect(stats.at("infeasible_lines").get<std::uint64_t>() == 0,
         "the generous budget should make every line feasible");
  expect(stats.at("sentences_skipped").get<std::uint64_t>() == 0, "no decode may fail");
  expect(stats.at("sentences_selected").get<std::uint64_t>() == 4, "top_n selection drifted");

  std::string bleu_line = util::read_file(work("bleu.txt"));
  expect(bleu_line.rfind("BLEU = 100.00", 0) == 0,
         "subword round trip must reproduce the corpus exactly, got: " + bleu_line);
}

struct Criterion {
  const char* description;
  void (*body)();
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"constrained decodes contain every constraint phrase (1000 instances, <60s)",
       check_constraint_guarantee},
      {"full-space beam search returns the brute-force argmax (300 instances)",
       check_oracle_optimality},
      {"constrained search without constraints equals plain beam search (500 instances)",
       check_empty_constraint_reduction},
      {"IBM Model 1 disambiguates the two-pair corpus with monotone likelihood",
       check_ibm1_disambiguation},
      {"phrase extraction matches box enumeration; prob filter keeps <=1 target",
       check_phrase_extraction_oracle},
      {"Moore-Lewis selection separates disjoint domains and is antisymmetric",
       check_moore_lewis_separation},
      {"BPE hand merges, 1000 round trips, byte-identical model reload", check_bpe},
      {"filter forest: >=0.95 held-out accuracy, nested thresholds, finite features",
       check_corpus_filter},
      {"BLEU identity at exactly 100, hand-computed cases, zero overlap at 0",
       check_bleu},
      {"copy candidates keep the shared name; gated matches stay inside NE spans",
       check_ne_gating},
      {"toy pipeline is byte-deterministic with full terminology recall",
       check_pipeline_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i].body();
      std::printf("PASS %2zu: %s\n", i + 1, criteria[i].description);
    } catch (const std::exception& e) {
      std::printf("FAIL %2zu: %s -- %s\n", i + 1, criteria[i].description, e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures != 0) std::printf("%d of %zu checks failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
