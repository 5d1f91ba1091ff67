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

#include <cstdio>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "termforge/align.hpp"
#include "termforge/backtranslate.hpp"
#include "termforge/constraints.hpp"
#include "termforge/corpusfilter.hpp"
#include "termforge/decoder.hpp"
#include "termforge/eval.hpp"
#include "termforge/ngram_lm.hpp"
#include "termforge/pipeline.hpp"
#include "termforge/textproc.hpp"
#include "termforge/util.hpp"

namespace {

using namespace termforge;

std::vector<std::string> read_stdin_lines() {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> read_input(const std::string& path) {
  return path.empty() ? read_stdin_lines() : util::read_lines(path);
}

std::vector<Sentence> to_corpus(const std::vector<std::string>& lines) {
  std::vector<Sentence> corpus;
  corpus.reserve(lines.size());
  for (const std::string& line : lines) corpus.push_back(util::split_tokens(line));
  return corpus;
}

void print_lines(const std::vector<std::string>& lines) {
  for (const std::string& line : lines) std::cout << line << "\n";
}

// Shared --config/--set state: when --config is present the subcommand runs
// as a pipeline stage and the direct flags are ignored.
struct ConfigOpts {
  std::string config;
  std::string instance;
  std::vector<std::string> sets;
};

void add_config_opts(CLI::App* sub, ConfigOpts* opts) {
  sub->add_option("--config", opts->config, "pipeline JSON; run as a configured stage");
  sub->add_option("--set", opts->sets, "override a config key (key=value)")
      ->needs("--config");
  sub->add_option("--instance", opts->instance,
                  "pick the '<stage>.<instance>' block from the config")
      ->needs("--config");
}

std::shared_ptr<ConfigOpts> add_config_opts(CLI::App* sub) {
  auto opts = std::make_shared<ConfigOpts>();
  add_config_opts(sub, opts.get());
  return opts;
}

bool run_as_stage(const std::string& stage, const ConfigOpts& opts) {
  if (opts.config.empty()) return false;
  pipeline::PipelineConfig config = pipeline::validate_config(opts.config);
  std::string block = opts.instance.empty() ? stage : stage + "." + opts.instance;
  pipeline::run_stage(block, config, opts.sets);
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"terminology-controlled translation pipeline toolkit"};
  app.require_subcommand(1);

  // --- stages that only run through a config -------------------------------
  const std::set<std::string> flag_commands = {
      "normalize",    "tokenize",     "lm-train",     "ml-select",
      "filter-features", "filter-train", "filter-select", "filter-apply",
      "decode",       "backtranslate", "bleu",        "term-recall"};
  for (const std::string& stage : pipeline::known_stages()) {
    if (flag_commands.count(stage)) continue;
    CLI::App* sub = app.add_subcommand(stage, "pipeline stage (requires --config)");
    auto cfg = add_config_opts(sub);
    sub->callback([stage, cfg] {
      if (!run_as_stage(stage, *cfg))
        throw CLI::RequiredError("--config");
    });
  }

  // --- pipeline: run every configured stage in order -----------------------
  {
    CLI::App* sub = app.add_subcommand("pipeline", "run all stages listed in the config");
    auto cfg = std::make_shared<std::string>();
    sub->add_option("--config", *cfg, "pipeline JSON")->required();
    sub->callback([cfg] { pipeline::run_all(pipeline::validate_config(*cfg)); });
  }

  // --- text filters ---------------------------------------------------------
  {
    CLI::App* sub = app.add_subcommand("normalize", "canonicalize raw text lines");
    auto cfg = add_config_opts(sub);
    auto in = std::make_shared<std::string>();
    sub->add_option("--in", *in, "input file (default stdin)");
    sub->callback([cfg, in] {
      if (run_as_stage("normalize", *cfg)) return;
      std::vector<std::string> lines = read_input(*in);
      for (std::string& line : lines) line = textproc::normalize(line);
      print_lines(lines);
    });
  }
  {
    CLI::App* sub = app.add_subcommand("tokenize", "split normalized text into tokens");
    auto cfg = add_config_opts(sub);
    auto in = std::make_shared<std::string>();
    sub->add_option("--in", *in, "input file (default stdin)");
    sub->callback([cfg, in] {
      if (run_as_stage("tokenize", *cfg)) return;
      std::vector<std::string> lines = read_input(*in);
      for (std::string& line : lines)
        line = util::join_tokens(textproc::tokenize(line));
      print_lines(lines);
    });
  }

  // --- language models ------------------------------------------------------
  {
    struct Opts {
      ConfigOpts cfg;
      std::string in, out;
      std::size_t order = 3;
      double discount = 0.4;
    };
    CLI::App* sub = app.add_subcommand("lm-train", "train an n-gram language model");
    auto o = std::make_shared<Opts>();
    add_config_opts(sub, &o->cfg);
    sub->add_option("--in", o->in, "tokenized corpus (default stdin)");
    sub->add_option("--order", o->order, "n-gram order");
    sub->add_option("--discount", o->discount, "absolute discount in (0,1)");
    sub->add_option("--out", o->out, "model file");
    sub->callback([o] {
      if (run_as_stage("lm-train", o->cfg)) return;
      if (o->out.empty()) throw CLI::RequiredError("--out");
      ngram_lm::lm_train(to_corpus(read_input(o->in)), o->order, o->discount).save(o->out);
    });
  }
  {
    struct Opts {
      ConfigOpts cfg;
      std::string in, in_lm, out_lm;
      std::size_t top = 0;
    };
    CLI::App* sub =
        app.add_subcommand("ml-select", "keep the most in-domain lines (Moore-Lewis)");
    auto o = std::make_shared<Opts>();
    add_config_opts(sub, &o->cfg);
    sub->add_option("--in", o->in, "candidate lines (default stdin)");
    sub->add_option("--in-lm", o->in_lm, "in-domain LM");
    sub->add_option("--out-lm", o->out_lm, "out-of-domain LM");
    sub->add_option("--top", o->top, "number of lines to keep");
    sub->callback([o] {
      if (run_as_stage("ml-select", o->cfg)) return;
      if (o->in_lm.empty()) throw CLI::RequiredError("--in-lm");
      if (o->out_lm.empty()) throw CLI::RequiredError("--out-lm");
      if (o->top == 0) throw CLI::RequiredError("--top");
      print_lines(ngram_lm::select_top(read_input(o->in),
                                       ngram_lm::NGramModel::load(o->in_lm),
                                       ngram_lm::NGramModel::load(o->out_lm), o->top));
    });
  }

  // --- corpus filter --------------------------------------------------------
  {
    struct Opts {
      ConfigOpts cfg;
      std::string source, target, src_lm, tgt_lm, dict, src_seed, tgt_seed;
    };
    CLI::App* sub = app.add_subcommand("filter-features", "extract bitext quality features");
    auto o = std::make_shared<Opts>();
    add_config_opts(sub, &o->cfg);
    sub->add_option("--source", o->source, "source-side corpus");
    sub->add_option("--target", o->target, "target-side corpus");
    sub->add_option("--src-lm", o->src_lm, "source language model");
    sub->add_option("--tgt-lm", o->tgt_lm, "target language model");
    sub->add_option("--dictionary", o->dict, "probabilistic dictionary TSV");
    sub->add_option("--src-seed", o->src_seed, "source language-id seed text");
    sub->add_option("--tgt-seed", o->tgt_seed, "target language-id seed text");
    sub->callback([o] {
      if (run_as_stage("filter-features", o->cfg)) return;
      for (const auto& [flag, value] :
           {std::pair<const char*, const std::string*>{"--source", &o->source},
            {"--target", &o->target},
            {"--src-lm", &o->src_lm},
            {"--tgt-lm", &o->tgt_lm},
            {"--dictionary", &o->dict},
            {"--src-seed", &o->src_seed},
            {"--tgt-seed", &o->tgt_seed}})
        if (value->empty()) throw CLI::RequiredError(flag);
      std::vector<Sentence> src = to_corpus(util::read_lines(o->source));
      std::vector<Sentence> tgt = to_corpus(util::read_lines(o->target));
      if (src.size() != tgt.size())
        throw std::runtime_error("source/target line counts differ");
      ngram_lm::NGramModel src_lm = ngram_lm::NGramModel::load(o->src_lm);
      ngram_lm::NGramModel tgt_lm = ngram_lm::NGramModel::load(o->tgt_lm);
      corpusfilter::FilterResources res = corpusfilter::make_resources(
          &src_lm, &tgt_lm, align::TranslationTable::load(o->dict),
          util::read_lines(o->src_seed), util::read_lines(o->tgt_seed));
      std::vector<corpusfilter::FeatureVector> rows;
      rows.reserve(src.size());
      for (std::size_t i = 0; i < src.size(); ++i)
        rows.push_back(corpusfilter::extract_features(src[i], tgt[i], res));
      print_lines(corpusfilter::features_to_tsv(rows));
    });
  }
  {
    struct Opts {
      ConfigOpts cfg;
      std::string features, labels, out;
      std::size_t trees = 100, depth = 8, subsample = 0;
      std::uint64_t seed = 1;
    };
    CLI::App* sub = app.add_subcommand("filter-train", "train the random-forest filter");
    auto o = std::make_shared<Opts>();
    add_config_opts(sub, &o->cfg);
    sub->add_option("--features", o->features, "features TSV");
    sub->add_option("--labels", o->labels, "labels file: index TAB label");
    sub->add_option("--trees", o->trees, "number of trees");
    sub->add_option("--depth", o->depth, "maximum tree depth");
    sub->add_option("--feature-subsample", o->subsample, "features tried per split (0 = sqrt)");
    sub->add_option("--seed", o->seed, "RNG seed");
    sub->add_option("--out", o->out, "model file");
    sub->callback([o] {
      if (run_as_stage("filter-train", o->cfg)) return;
      if (o->features.empty()) throw CLI::RequiredError("--features");
      if (o->labels.empty()) throw CLI::RequiredError("--labels");
      if (o->out.empty()) throw CLI::RequiredError("--out");
      std::vector<corpusfilter::FeatureVector> all =
          corpusfilter::features_from_tsv(util::read_lines(o->features));
      std::vector<corpusfilter::FeatureVector> features;
      std::vector<int> labels;
      for (const std::string& row : util::read_lines(o->labels)) {
        if (row.empty()) continue;
        std::vector<std::string> fields = util::split_tsv(row);
        if (fields.size() != 2)
          throw std::runtime_error("labels file: expected `index TAB label`");
        std::size_t idx = static_cast<std::size_t>(std::stoull(fields[0]));
        if (idx >= all.size()) throw std::runtime_error("labels file: index out of range");
        features.push_back(all[idx]);
        labels.push_back(std::stoi(fields[1]));
      }
      corpusfilter::ForestParams params;
      params.trees = o->trees;
      params.max_depth = o->depth;
      params.feature_subsample = o->subsample;
      params.seed = o->seed;
      corpusfilter::train_forest(features, labels, params).save(o->out);
    });
  }
  {
    struct Opts {
      ConfigOpts cfg;
      std::string features, model;
      std::size_t round_size = 20;
    };
    CLI::App* sub =
        app.add_subcommand("filter-select", "pick the most uncertain pairs to label next");
    auto o = std::make_shared<Opts>();
    add_config_opts(sub, &o->cfg);
    sub->add_option("--features", o->features, "features TSV");
    sub->add_option("--model", o->model, "forest model");
    sub->add_option("--round-size", o->round_size, "pairs per feedback round");
    sub->callback([o] {
      if (run_as_stage("filter-select", o->cfg)) return;
      if (o->features.empty()) throw CLI::RequiredError("--features");
      if (o->model.empty()) throw CLI::RequiredError("--model");
      for (std::size_t i : corpusfilter::feedback_round(
               corpusfilter::ForestModel::load(o->model),
               corpusfilter::features_from_tsv(util::read_lines(o->features)),
               o->round_size))
        std::cout << i << "\n";
    });
  }
  {
    struct Opts {
      ConfigOpts cfg;
      std::string features, model;
      double threshold = 0.5;
    };
    CLI::App* sub = app.add_subcommand("filter-apply", "emit indices of pairs kept by the filter");
    auto o = std::make_shared<Opts>();
    add_config_opts(sub, &o->cfg);
    sub->add_option("--features", o->features, "features TSV");
    sub->add_option("--model", o->model, "forest model");
    sub->add_option("--threshold", o->threshold, "keep pairs scoring above this");
    sub->callback([o] {
      if (run_as_stage("filter-apply", o->cfg)) return;
      if (o->features.empty()) throw CLI::RequiredError("--features");
      if (o->model.empty()) throw CLI::RequiredError("--model");
      for (std::size_t i : corpusfilter::apply_filter(
               corpusfilter::features_from_tsv(util::read_lines(o->features)),
               corpusfilter::ForestModel::load(o->model), o->threshold))
        std::cout << i << "\n";
    });
  }

  // --- decoding -------------------------------------------------------------
  {
    struct Opts {
      ConfigOpts cfg;
      std::string in, lexicon, lm, constraints, gazetteer;
      double lambda = 0.5;
      bool ne_gated = false;
      std::size_t beam = 0, max_len = 0;
    };
    CLI::App* sub = app.add_subcommand("decode", "translate, honoring terminology constraints");
    auto o = std::make_shared<Opts>();
    add_config_opts(sub, &o->cfg);
    sub->add_option("--in", o->in, "source sentences (default stdin)");
    sub->add_option("--lexicon", o->lexicon, "translation table TSV");
    sub->add_option("--lm", o->lm, "target language model");
    sub->add_option("--lambda", o->lambda, "LM weight in the mixture [0,1]");
    sub->add_option("--constraints", o->constraints, "constraints TSV");
    sub->add_option("--gazetteer", o->gazetteer, "named-entity gazetteer");
    sub->add_flag("--ne-gated", o->ne_gated, "also apply ne_gated constraints");
    sub->add_option("--beam", o->beam, "beam size (0 = 5 plain / 20 constrained)");
    sub->add_option("--max-len", o->max_len, "length budget (0 = 2*len+2)");
    sub->callback([o] {
      if (run_as_stage("decode", o->cfg)) return;
      if (o->lexicon.empty()) throw CLI::RequiredError("--lexicon");
      if (o->lm.empty()) throw CLI::RequiredError("--lm");
      decoder::ToyScorer scorer(align::TranslationTable::load(o->lexicon),
                                ngram_lm::NGramModel::load(o->lm), o->lambda);
      constraints::ConstraintSet set;
      if (!o->constraints.empty()) set = constraints::ConstraintSet::load(o->constraints);
      constraints::NeTagger tagger =
          o->gazetteer.empty() ? constraints::NeTagger()
                               : constraints::NeTagger::load_gazetteer(o->gazetteer);
      std::vector<Sentence> input = to_corpus(read_input(o->in));
      for (std::size_t i = 0; i < input.size(); ++i) {
        const Sentence& line = input[i];
        std::vector<constraints::Match> matches =
            o->ne_gated ? constraints::match_all(line, set, tagger)
                        : constraints::match_always(line, set);
        std::vector<Sentence> seqs;
        std::set<std::size_t> seen;
        for (const constraints::Match& m : matches)
          if (seen.insert(m.constraint_index).second)
            seqs.push_back(set.items()[m.constraint_index].target);
        std::size_t budget = o->max_len != 0 ? o->max_len : 2 * line.size() + 2;
        decoder::DecodeResult res =
            seqs.empty()
                ? decoder::beam_search(scorer, line, budget, o->beam != 0 ? o->beam : 5)
                : decoder::constrained_beam_search(scorer, line, seqs, budget,
                                                   o->beam != 0 ? o->beam : 20);
        std::cout << i << "\t" << util::join_tokens(res.tokens) << "\t" << seen.size()
                  << "\n";
      }
    });
  }

  // --- backtranslation ------------------------------------------------------
  {
    struct Opts {
      ConfigOpts cfg;
      std::string mono, in_lm, out_lm, lexicon, lm, constraints, gazetteer;
      std::string mode = "constrained";
      std::string out_src, out_tgt, stats_out, constraints_log;
      std::size_t top = 0, beam = 0, max_len = 0;
      double lambda = 0.5;
    };
    CLI::App* sub = app.add_subcommand("backtranslate", "build a synthetic parallel corpus");
    auto o = std::make_shared<Opts>();
    add_config_opts(sub, &o->cfg);
    sub->add_option("--mono", o->mono, "monolingual target-language corpus");
    sub->add_option("--top", o->top, "lines to select by Moore-Lewis");
    sub->add_option("--mode", o->mode, "constrained|unconstrained");
    sub->add_option("--beam", o->beam, "beam size (0 = mode default)");
    sub->add_option("--max-len", o->max_len, "length budget (0 = 2*len+2)");
    sub->add_option("--constraints", o->constraints, "constraints TSV");
    sub->add_option("--gazetteer", o->gazetteer, "named-entity gazetteer");
    sub->add_option("--in-lm", o->in_lm, "in-domain LM for selection");
    sub->add_option("--out-lm", o->out_lm, "out-of-domain LM for selection");
    sub->add_option("--lexicon", o->lexicon, "translation table TSV for the scorer");
    sub->add_option("--lm", o->lm, "LM for the scorer (synthetic-source language)");
    sub->add_option("--lambda", o->lambda, "LM weight in the mixture [0,1]");
    sub->add_option("--out-src", o->out_src, "synthetic source output");
    sub->add_option("--out-tgt", o->out_tgt, "original target output");
    sub->add_option("--stats-out", o->stats_out, "stats JSON output");
    sub->add_option("--constraints-log", o->constraints_log, "applied-constraints TSV");
    sub->callback([o] {
      if (run_as_stage("backtranslate", o->cfg)) return;
      for (const auto& [flag, value] :
           {std::pair<const char*, const std::string*>{"--mono", &o->mono},
            {"--in-lm", &o->in_lm},
            {"--out-lm", &o->out_lm},
            {"--lexicon", &o->lexicon},
            {"--lm", &o->lm},
            {"--out-src", &o->out_src},
            {"--out-tgt", &o->out_tgt}})
        if (value->empty()) throw CLI::RequiredError(flag);
      if (o->top == 0) throw CLI::RequiredError("--top");
      decoder::ToyScorer scorer(align::TranslationTable::load(o->lexicon),
                                ngram_lm::NGramModel::load(o->lm), o->lambda);
      constraints::ConstraintSet set;
      if (!o->constraints.empty()) set = constraints::ConstraintSet::load(o->constraints);
      constraints::NeTagger tagger =
          o->gazetteer.empty() ? constraints::NeTagger()
                               : constraints::NeTagger::load_gazetteer(o->gazetteer);
      backtranslate::Result result = backtranslate::run_backtranslation(
          to_corpus(util::read_lines(o->mono)), ngram_lm::NGramModel::load(o->in_lm),
          ngram_lm::NGramModel::load(o->out_lm), o->top, scorer, set, tagger,
          backtranslate::parse_mode(o->mode), o->beam, o->max_len);
      backtranslate::emit_corpus(result.pairs, o->out_src, o->out_tgt);
      if (!o->stats_out.empty())
        util::atomic_write_file(o->stats_out, result.stats.to_json() + "\n");
      if (!o->constraints_log.empty())
        backtranslate::write_constraints_log(result.pairs, o->constraints_log);
      std::cerr << result.stats.to_json() << "\n";
    });
  }

  // --- evaluation -----------------------------------------------------------
  {
    struct Opts {
      ConfigOpts cfg;
      std::string hyp, ref, tok = "13a";
    };
    CLI::App* sub = app.add_subcommand("bleu", "corpus BLEU against a reference");
    auto o = std::make_shared<Opts>();
    add_config_opts(sub, &o->cfg);
    sub->add_option("--hyp", o->hyp, "hypotheses (default stdin)");
    sub->add_option("--ref", o->ref, "reference file");
    sub->add_option("--tok", o->tok, "13a|none")
        ->check(CLI::IsMember({"13a", "none"}));
    sub->callback([o] {
      if (run_as_stage("bleu", o->cfg)) return;
      if (o->ref.empty()) throw CLI::RequiredError("--ref");
      eval::BleuScore score =
          eval::bleu(read_input(o->hyp), util::read_lines(o->ref),
                     o->tok == "13a" ? eval::Tokenization::k13a : eval::Tokenization::kNone);
      std::cout << eval::format_bleu(score) << "\n";
    });
  }
  {
    struct Opts {
      ConfigOpts cfg;
      std::string hyp, log;
    };
    CLI::App* sub = app.add_subcommand("term-recall", "constraint satisfaction in hypotheses");
    auto o = std::make_shared<Opts>();
    add_config_opts(sub, &o->cfg);
    sub->add_option("--hyp", o->hyp, "hypotheses (default stdin)");
    sub->add_option("--constraints-log", o->log, "applied-constraints TSV");
    sub->callback([o] {
      if (run_as_stage("term-recall", o->cfg)) return;
      if (o->log.empty()) throw CLI::RequiredError("--constraints-log");
      std::vector<Sentence> hyps = to_corpus(read_input(o->hyp));
      eval::TermRecall tr = eval::term_recall(
          hyps, backtranslate::read_constraints_log(o->log, hyps.size()));
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f", tr.recall);
      std::cout << "term_recall = " << buf << " (" << tr.satisfied << "/" << tr.applied
                << (tr.vacuous ? ", vacuous" : "") << ")\n";
      for (const auto& [key, counts] : tr.per_constraint)
        std::cout << key << "\t" << counts.first << "/" << counts.second << "\n";
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
