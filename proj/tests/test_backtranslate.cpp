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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <string>
#include <vector>

#include "json.hpp"
#include "termforge/backtranslate.hpp"
#include "termforge/eval.hpp"
#include "test_support.hpp"

using namespace termforge;
using namespace termforge::backtranslate;

namespace {

// French-to-German toy setup: the lexicon prefers the literal "gelbe Westen",
// so only a constraint produces the terminology variant.
struct Toy {
  align::TranslationTable lex;
  ngram_lm::NGramModel lm;
  ngram_lm::NGramModel in_lm;
  ngram_lm::NGramModel out_lm;
  decoder::ToyScorer scorer;

  Toy()
      : lex(make_lex()),
        lm(ngram_lm::lm_train({ts::sent({"gelbe", "Westen"}), ts::sent({"gelbe", "Westen"})},
                              2, 0.4)),
        in_lm(ngram_lm::lm_train({ts::sent({"gilets", "jaunes"}),
                                  ts::sent({"les", "gilets", "jaunes"})},
                                 1, 0.4)),
        out_lm(ngram_lm::lm_train({ts::sent({"autre", "chose"}), ts::sent({"rien", "ici"})},
                                  1, 0.4)),
        scorer(lex, lm, 0.5) {}

  static align::TranslationTable make_lex() {
    align::TranslationTable t;
    t.set("gilets", "gelbe", 0.85);
    t.set("gilets", "Gelbwesten", 0.15);
    t.set("jaunes", "Westen", 0.9);
    t.set("jaunes", "Gelbwesten", 0.1);
    return t;
  }
};

constraints::ConstraintSet gelbwesten_set() {
  return constraints::ConstraintSet::from_lines({"gilets jaunes\tGelbwesten\talways"});
}

}  // namespace

TEST_CASE("mode names round trip") {
  CHECK(mode_name(Mode::kConstrained) == "constrained");
  CHECK(mode_name(Mode::kUnconstrained) == "unconstrained");
  CHECK(parse_mode("constrained") == Mode::kConstrained);
  CHECK(parse_mode("unconstrained") == Mode::kUnconstrained);
  CHECK_THROWS_WITH_AS(parse_mode("half"), doctest::Contains("unknown backtranslation mode"),
                       std::invalid_argument);
}

TEST_CASE("stats serialize as a flat sorted JSON object") {
  Stats s;
  s.sentences_selected = 7;
  s.sentences_processed = 6;
  s.sentences_skipped = 1;
  s.constraints_matched = 5;
  s.constraints_satisfied = 4;
  s.infeasible_lines = 2;
  s.warned_lines = 3;
  auto j = nlohmann::json::parse(s.to_json());
  CHECK(j.size() == 7);
  CHECK(j["sentences_selected"] == 7);
  CHECK(j["sentences_processed"] == 6);
  CHECK(j["sentences_skipped"] == 1);
  CHECK(j["constraints_matched"] == 5);
  CHECK(j["constraints_satisfied"] == 4);
  CHECK(j["infeasible_lines"] == 2);
  CHECK(j["warned_lines"] == 3);
  // keys come out sorted, so serialization is reproducible
  CHECK(Stats{}.to_json() ==
        "{\"constraints_matched\": 0, \"constraints_satisfied\": 0, "
        "\"infeasible_lines\": 0, \"sentences_processed\": 0, "
        "\"sentences_selected\": 0, \"sentences_skipped\": 0, \"warned_lines\": 0}");
}

TEST_CASE("with no constraints the two modes decode identically") {
  Toy toy;
  std::vector<Sentence> mono = {ts::sent({"gilets", "jaunes"}),
                                ts::sent({"les", "gilets", "jaunes"}),
                                ts::sent({"autre", "chose"})};
  constraints::ConstraintSet empty;
  constraints::NeTagger tagger;

  Result a = run_backtranslation(mono, toy.in_lm, toy.out_lm, 3, toy.scorer, empty, tagger,
                                 Mode::kConstrained, 5);
  Result b = run_backtranslation(mono, toy.in_lm, toy.out_lm, 3, toy.scorer, empty, tagger,
                                 Mode::kUnconstrained, 5);
  REQUIRE(a.pairs.size() == b.pairs.size());
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    CHECK(a.pairs[i].synthetic_source == b.pairs[i].synthetic_source);
    CHECK(a.pairs[i].original_target == b.pairs[i].original_target);
    CHECK(!a.pairs[i].constrained);
    CHECK(a.pairs[i].applied_constraints.empty());
  }
  CHECK(a.stats.constraints_matched == 0);
  CHECK(a.stats.infeasible_lines == 0);
}

TEST_CASE("selection keeps the most in-domain lines") {
  Toy toy;
  std::vector<Sentence> mono = {ts::sent({"autre", "chose"}),
                                ts::sent({"gilets", "jaunes"}),
                                ts::sent({"rien", "ici"}),
                                ts::sent({"les", "gilets", "jaunes"})};
  constraints::ConstraintSet empty;
  constraints::NeTagger tagger;
  Result r = run_backtranslation(mono, toy.in_lm, toy.out_lm, 2, toy.scorer, empty, tagger,
                                 Mode::kUnconstrained);
  CHECK(r.stats.sentences_selected == 2);
  REQUIRE(r.pairs.size() == 2);
  for (const SyntheticPair& p : r.pairs) {
    bool in_domain = p.original_target == ts::sent({"gilets", "jaunes"}) ||
                     p.original_target == ts::sent({"les", "gilets", "jaunes"});
    CHECK(in_domain);
  }
}

TEST_CASE("constrained mode forces the terminology into the synthetic source") {
  Toy toy;
  std::vector<Sentence> mono = {ts::sent({"gilets", "jaunes"})};
  constraints::NeTagger tagger;

  Result forced = run_backtranslation(mono, toy.in_lm, toy.out_lm, 1, toy.scorer,
                                      gelbwesten_set(), tagger, Mode::kConstrained);
  REQUIRE(forced.pairs.size() == 1);
  CHECK(forced.pairs[0].constrained);
  REQUIRE(forced.pairs[0].applied_constraints.size() == 1);
  CHECK(eval::contains_phrase(forced.pairs[0].synthetic_source, ts::sent({"Gelbwesten"})));
  CHECK(forced.stats.constraints_matched == 1);
  CHECK(forced.stats.constraints_satisfied == 1);
  CHECK(forced.stats.sentences_processed == 1);

  Result loose = run_backtranslation(mono, toy.in_lm, toy.out_lm, 1, toy.scorer,
                                     gelbwesten_set(), tagger, Mode::kUnconstrained);
  REQUIRE(loose.pairs.size() == 1);
  CHECK(!loose.pairs[0].constrained);
  CHECK(loose.pairs[0].applied_constraints.empty());
  CHECK(!eval::contains_phrase(loose.pairs[0].synthetic_source, ts::sent({"Gelbwesten"})));
  // matching is counted in both modes; satisfaction only happens when enforced
  CHECK(loose.stats.constraints_matched == 1);
  CHECK(loose.stats.constraints_satisfied == 0);
}

TEST_CASE("a budget too small for the constraints falls back to unconstrained") {
  Toy toy;
  std::vector<Sentence> mono = {ts::sent({"gilets", "jaunes"})};
  constraints::ConstraintSet wide =
      constraints::ConstraintSet::from_lines({"gilets jaunes\tgelbe Westen extra\talways"});
  constraints::NeTagger tagger;
  Result r = run_backtranslation(mono, toy.in_lm, toy.out_lm, 1, toy.scorer, wide, tagger,
                                 Mode::kConstrained, 0, 2);  // budget 2 < 3 target tokens
  CHECK(r.stats.infeasible_lines == 1);
  REQUIRE(r.pairs.size() == 1);
  CHECK(!r.pairs[0].constrained);
  CHECK(r.pairs[0].applied_constraints.empty());
  CHECK(r.pairs[0].synthetic_source.size() <= 2);
  CHECK(r.stats.constraints_matched == 1);
}

TEST_CASE("lines whose decode cannot finish are counted as warned") {
  // lambda 0 gives EOS no mass, so every decode runs out of budget
  align::TranslationTable lex;
  lex.set("gilets", "gelbe", 1.0);
  ngram_lm::NGramModel lm = ngram_lm::lm_train({ts::sent({"gelbe"})}, 1, 0.4);
  decoder::ToyScorer scorer(lex, lm, 0.0);
  Toy toy;
  std::vector<Sentence> mono = {ts::sent({"gilets", "jaunes"})};
  constraints::ConstraintSet empty;
  constraints::NeTagger tagger;
  Result r = run_backtranslation(mono, toy.in_lm, toy.out_lm, 1, scorer, empty, tagger,
                                 Mode::kUnconstrained);
  CHECK(r.stats.warned_lines == 1);
  CHECK(r.stats.sentences_processed == 1);
  CHECK(r.stats.sentences_skipped == 0);
}

TEST_CASE("decode failures drop the line and count as skipped") {
  struct Empty : decoder::Scorer {
    std::vector<Token> vocab;
    const std::vector<Token>& vocabulary() const override { return vocab; }
    std::vector<double> next_logprobs(const Sentence&, const Sentence&) const override {
      return {0.0};
    }
  } scorer;
  Toy toy;
  std::vector<Sentence> mono = {ts::sent({"gilets", "jaunes"})};
  constraints::ConstraintSet empty;
  constraints::NeTagger tagger;
  Result r = run_backtranslation(mono, toy.in_lm, toy.out_lm, 1, scorer, empty, tagger,
                                 Mode::kUnconstrained);
  CHECK(r.stats.sentences_selected == 1);
  CHECK(r.stats.sentences_processed == 0);
  CHECK(r.stats.sentences_skipped == 1);
  CHECK(r.pairs.empty());
}

TEST_CASE("emitted corpora are line-aligned with the pairs") {
  ts::TempDir dir("emit");
  std::vector<SyntheticPair> pairs(2);
  pairs[0].synthetic_source = ts::sent({"gelbe", "Westen"});
  pairs[0].original_target = ts::sent({"gilets", "jaunes"});
  pairs[1].synthetic_source = ts::sent({"Gelbwesten"});
  pairs[1].original_target = ts::sent({"les", "gilets", "jaunes"});
  emit_corpus(pairs, dir.file("src.txt"), dir.file("tgt.txt"));
  CHECK(ts::read_file(dir.file("src.txt")) == "gelbe Westen\nGelbwesten\n");
  CHECK(ts::read_file(dir.file("tgt.txt")) == "gilets jaunes\nles gilets jaunes\n");
}

TEST_CASE("the constraints log round trips") {
  ts::TempDir dir("ctlog");
  std::vector<SyntheticPair> pairs(3);
  constraints::Constraint gj{ts::sent({"gilets", "jaunes"}), ts::sent({"Gelbwesten"}),
                             constraints::Mode::kAlways};
  constraints::Constraint da{ts::sent({"Dupont-Aignan"}), ts::sent({"Dupont-Aignan"}),
                             constraints::Mode::kNeGated};
  pairs[0].applied_constraints = {gj};
  pairs[2].applied_constraints = {gj, da};
  write_constraints_log(pairs, dir.file("log.tsv"));
  CHECK(ts::read_file(dir.file("log.tsv")) ==
        "0\tgilets jaunes\tGelbwesten\talways\n"
        "2\tgilets jaunes\tGelbwesten\talways\n"
        "2\tDupont-Aignan\tDupont-Aignan\tne_gated\n");

  auto back = read_constraints_log(dir.file("log.tsv"), 3);
  REQUIRE(back.size() == 3);
  CHECK(back[0] == std::vector<constraints::Constraint>{gj});
  CHECK(back[1].empty());
  CHECK(back[2] == std::vector<constraints::Constraint>{gj, da});

  // no constrained pairs at all still writes a readable (empty) log
  write_constraints_log(std::vector<SyntheticPair>(2), dir.file("none.tsv"));
  auto none = read_constraints_log(dir.file("none.tsv"), 2);
  CHECK(none[0].empty());
  CHECK(none[1].empty());
}

TEST_CASE("malformed constraint logs report their line") {
  ts::TempDir dir("ctbad");
  ts::write_file(dir.file("short.tsv"), "0\ta\tb\n");
  CHECK_THROWS_WITH_AS(read_constraints_log(dir.file("short.tsv"), 1),
                       doctest::Contains("expected 4 tab-separated fields"),
                       std::runtime_error);
  ts::write_file(dir.file("idx.tsv"), "x\ta\tb\talways\n");
  CHECK_THROWS_WITH_AS(read_constraints_log(dir.file("idx.tsv"), 1),
                       doctest::Contains("malformed line index"), std::runtime_error);
  ts::write_file(dir.file("range.tsv"), "5\ta\tb\talways\n");
  CHECK_THROWS_WITH_AS(read_constraints_log(dir.file("range.tsv"), 3),
                       doctest::Contains("out of range"), std::runtime_error);
}
