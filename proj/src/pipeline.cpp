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

#include "termforge/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

#include "termforge/align.hpp"
#include "termforge/backtranslate.hpp"
#include "termforge/constraints.hpp"
#include "termforge/corpusfilter.hpp"
#include "termforge/decoder.hpp"
#include "termforge/eval.hpp"
#include "termforge/ngram_lm.hpp"
#include "termforge/phrasex.hpp"
#include "termforge/textproc.hpp"
#include "termforge/util.hpp"

namespace termforge::pipeline {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Parameter schema
// ---------------------------------------------------------------------------

enum class PType { kString, kEnum, kPathIn, kPathOut, kInt, kReal, kBool };

struct ParamSpec {
  const char* key;
  PType type;
  bool required = false;
  json def = nullptr;  // nullptr and not required: optional, no default
  double lo = -1e300;
  double hi = 1e300;
  bool lo_excl = false;
  bool hi_excl = false;
  std::vector<std::string> choices{};
};

using Schema = std::vector<ParamSpec>;

const std::map<std::string, Schema>& schemas() {
  static const std::map<std::string, Schema> table = {
      {"normalize",
       {{"input", PType::kPathIn, true},
        {"output", PType::kPathOut, true}}},
      {"tokenize",
       {{"input", PType::kPathIn, true},
        {"output", PType::kPathOut, true}}},
      {"truecase-train",
       {{"input", PType::kPathIn, true},
        {"model", PType::kPathOut, true}}},
      {"truecase-apply",
       {{"input", PType::kPathIn, true},
        {"model", PType::kPathIn, true},
        {"output", PType::kPathOut, true}}},
      {"bpe-learn",
       {{"input", PType::kPathIn, true},
        {"merges", PType::kInt, true, nullptr, 1},
        {"model", PType::kPathOut, true}}},
      {"bpe-apply",
       {{"input", PType::kPathIn, true},
        {"model", PType::kPathIn, true},
        {"output", PType::kPathOut, true}}},
      {"bpe-decode",
       {{"input", PType::kPathIn, true},
        {"output", PType::kPathOut, true}}},
      {"lm-train",
       {{"input", PType::kPathIn, true},
        {"order", PType::kInt, false, 3, 1, 10},
        {"discount", PType::kReal, false, 0.4, 0.0, 1.0, true, true},
        {"model", PType::kPathOut, true}}},
      {"ml-select",
       {{"input", PType::kPathIn, true},
        {"in_lm", PType::kPathIn, true},
        {"out_lm", PType::kPathIn, true},
        {"top_n", PType::kInt, true, nullptr, 1},
        {"output", PType::kPathOut, true}}},
      {"align-train",
       {{"source", PType::kPathIn, true},
        {"target", PType::kPathIn, true},
        {"iterations", PType::kInt, false, 5, 1, 1000},
        {"tension", PType::kReal, false, 4.0, 0.0, 100.0},
        {"forward_model", PType::kPathOut, true},
        {"reverse_model", PType::kPathOut, true}}},
      {"align-symmetrize",
       {{"source", PType::kPathIn, true},
        {"target", PType::kPathIn, true},
        {"forward_model", PType::kPathIn, true},
        {"reverse_model", PType::kPathIn, true},
        {"tension", PType::kReal, false, 4.0, 0.0, 100.0},
        {"heuristic", PType::kEnum, false, "grow-diag-final-and", 0, 0, false, false,
         {"intersection", "union", "grow-diag-final-and"}},
        {"output", PType::kPathOut, true}}},
      {"phrase-extract",
       {{"source", PType::kPathIn, true},
        {"target", PType::kPathIn, true},
        {"alignments", PType::kPathIn, true},
        {"max_phrase_len", PType::kInt, false, 7, 1, 100},
        {"table", PType::kPathOut, true}}},
      {"phrase-filter",
       {{"table", PType::kPathIn, true},
        {"prob_threshold", PType::kReal, false, 0.5, 0.0, 1.0},
        {"in_lm", PType::kPathIn, false},
        {"out_lm", PType::kPathIn, false},
        {"top_k", PType::kInt, false, 2000, 1},
        {"target_mono", PType::kPathIn, false},
        {"min_count", PType::kInt, false, 9, 1},
        {"output", PType::kPathOut, true}}},
      {"constraints-export",
       {{"table", PType::kPathIn, true},
        {"mode", PType::kEnum, false, "always", 0, 0, false, false,
         {"always", "ne_gated"}},
        {"output", PType::kPathOut, true}}},
      {"copy-candidates",
       {{"source_mono", PType::kPathIn, true},
        {"target_mono", PType::kPathIn, true},
        {"gazetteer", PType::kPathIn, false},
        {"min_count", PType::kInt, false, 9, 1},
        {"output", PType::kPathOut, true}}},
      {"filter-features",
       {{"source", PType::kPathIn, true},
        {"target", PType::kPathIn, true},
        {"src_lm", PType::kPathIn, true},
        {"tgt_lm", PType::kPathIn, true},
        {"dictionary", PType::kPathIn, true},
        {"src_seed", PType::kPathIn, true},
        {"tgt_seed", PType::kPathIn, true},
        {"output", PType::kPathOut, true}}},
      {"filter-train",
       {{"features", PType::kPathIn, true},
        {"labels", PType::kPathIn, true},
        {"trees", PType::kInt, false, 100, 1, 100000},
        {"depth", PType::kInt, false, 8, 1, 64},
        {"feature_subsample", PType::kInt, false, 0, 0, 13},
        {"seed", PType::kInt, false, nullptr, 0},
        {"model", PType::kPathOut, true}}},
      {"filter-select",
       {{"features", PType::kPathIn, true},
        {"model", PType::kPathIn, true},
        {"round_size", PType::kInt, false, 20, 1},
        {"output", PType::kPathOut, true}}},
      {"filter-apply",
       {{"features", PType::kPathIn, true},
        {"model", PType::kPathIn, true},
        {"threshold", PType::kReal, false, 0.5, 0.0, 1.0},
        {"source", PType::kPathIn, false},
        {"target", PType::kPathIn, false},
        {"out_source", PType::kPathOut, false},
        {"out_target", PType::kPathOut, false},
        {"output", PType::kPathOut, true}}},
      {"decode",
       {{"input", PType::kPathIn, true},
        {"lexicon", PType::kPathIn, true},
        {"lm", PType::kPathIn, true},
        {"lambda", PType::kReal, false, 0.5, 0.0, 1.0},
        {"constraints", PType::kPathIn, false},
        {"gazetteer", PType::kPathIn, false},
        {"ne_gated", PType::kBool, false, false},
        {"beam", PType::kInt, false, 0, 0, 100000},
        {"max_len", PType::kInt, false, 0, 0, 100000},
        {"output", PType::kPathOut, true}}},
      {"backtranslate",
       {{"mono", PType::kPathIn, true},
        {"in_lm", PType::kPathIn, true},
        {"out_lm", PType::kPathIn, true},
        {"top_n", PType::kInt, true, nullptr, 1},
        {"lexicon", PType::kPathIn, true},
        {"lm", PType::kPathIn, true},
        {"lambda", PType::kReal, false, 0.5, 0.0, 1.0},
        {"constraints", PType::kPathIn, false},
        {"gazetteer", PType::kPathIn, false},
        {"mode", PType::kEnum, false, "constrained", 0, 0, false, false,
         {"constrained", "unconstrained"}},
        {"beam", PType::kInt, false, 0, 0, 100000},
        {"max_len", PType::kInt, false, 0, 0, 100000},
        {"out_source", PType::kPathOut, true},
        {"out_target", PType::kPathOut, true},
        {"stats_out", PType::kPathOut, true},
        {"constraints_log", PType::kPathOut, true}}},
      {"bleu",
       {{"hyp", PType::kPathIn, true},
        {"ref", PType::kPathIn, true},
        {"tok", PType::kEnum, false, "13a", 0, 0, false, false, {"13a", "none"}},
        {"output", PType::kPathOut, true}}},
      {"term-recall",
       {{"hyp", PType::kPathIn, true},
        {"constraints_log", PType::kPathIn, true},
        {"output", PType::kPathOut, true}}},
  };
  return table;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::runtime_error("config: " + where + ": " + what);
}

// Block names are either a stage name or "stage.instance", so one config can
// hold several parameterizations of the same stage (two LMs, say).
std::string stage_kind(const std::string& block_name) {
  return block_name.substr(0, block_name.find('.'));
}

void validate_block(const std::string& block_name, json& block) {
  const std::string stage = stage_kind(block_name);
  const Schema& schema = schemas().at(stage);
  if (!block.is_object()) fail(block_name, "stage block must be a JSON object");
  for (const auto& [key, value] : block.items()) {
    bool known = std::any_of(schema.begin(), schema.end(),
                             [&](const ParamSpec& s) { return s.key == key; });
    if (!known) fail(block_name + "." + key, "unknown key");
  }
  for (const ParamSpec& spec : schema) {
    std::string where = block_name + "." + spec.key;
    if (!block.contains(spec.key)) {
      if (spec.required) fail(block_name, std::string("missing required key '") + spec.key + "'");
      if (!spec.def.is_null()) block[spec.key] = spec.def;
      continue;
    }
    const json& v = block[spec.key];
    switch (spec.type) {
      case PType::kString:
      case PType::kPathIn:
      case PType::kPathOut:
        if (!v.is_string() || v.get<std::string>().empty())
          fail(where, "expected a non-empty string");
        break;
      case PType::kEnum: {
        if (!v.is_string()) fail(where, "expected a string");
        const std::string s = v.get<std::string>();
        if (std::find(spec.choices.begin(), spec.choices.end(), s) == spec.choices.end())
          fail(where, "must be one of: " + util::join(spec.choices, ", "));
        break;
      }
      case PType::kBool:
        if (!v.is_boolean()) fail(where, "expected a boolean");
        break;
      case PType::kInt: {
        if (!v.is_number_integer() && !v.is_number_unsigned())
          fail(where, "expected an integer");
        double d = v.get<double>();
        if (d < spec.lo || d > spec.hi)
          fail(where, "out of range [" + util::format_double(spec.lo) + ", " +
                          util::format_double(spec.hi) + "]");
        break;
      }
      case PType::kReal: {
        if (!v.is_number()) fail(where, "expected a number");
        double d = v.get<double>();
        bool lo_ok = spec.lo_excl ? d > spec.lo : d >= spec.lo;
        bool hi_ok = spec.hi_excl ? d < spec.hi : d <= spec.hi;
        if (!lo_ok || !hi_ok)
          fail(where, "out of range " + std::string(spec.lo_excl ? "(" : "[") +
                          util::format_double(spec.lo) + ", " + util::format_double(spec.hi) +
                          (spec.hi_excl ? ")" : "]"));
        break;
      }
    }
  }
  // Cross-field conditions.
  auto both_or_neither = [&](const char* a, const char* b) {
    if (block.contains(a) != block.contains(b))
      fail(block_name, std::string("'") + a + "' and '" + b + "' must be given together");
  };
  if (stage == "phrase-filter") both_or_neither("in_lm", "out_lm");
  if (stage == "filter-apply") {
    both_or_neither("source", "target");
    both_or_neither("source", "out_source");
    both_or_neither("source", "out_target");
  }
}

// SAX walker that only tracks object keys, to reject duplicates the DOM
// parser would silently collapse.
struct DupKeyChecker {
  using json_t = nlohmann::json;
  std::vector<std::set<std::string>> stack;
  std::string duplicate;
  std::string error;

  bool null() { return true; }
  bool boolean(bool) { return true; }
  bool number_integer(json_t::number_integer_t) { return true; }
  bool number_unsigned(json_t::number_unsigned_t) { return true; }
  bool number_float(json_t::number_float_t, const json_t::string_t&) { return true; }
  bool string(json_t::string_t&) { return true; }
  bool binary(json_t::binary_t&) { return true; }
  bool start_object(std::size_t) {
    stack.emplace_back();
    return true;
  }
  bool key(json_t::string_t& k) {
    if (!stack.back().insert(k).second) {
      duplicate = k;
      return false;
    }
    return true;
  }
  bool end_object() {
    stack.pop_back();
    return true;
  }
  bool start_array(std::size_t) { return true; }
  bool end_array() { return true; }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception& ex) {
    error = ex.what();
    return false;
  }
};

// ---------------------------------------------------------------------------
// Stage context: output tracking, atomic writes, cleanup on failure
// ---------------------------------------------------------------------------

struct StageCtx {
  const PipelineConfig* config = nullptr;
  std::string stage;
  json params;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  std::string in(const char* key) const { return params.at(key).get<std::string>(); }
  bool has(const char* key) const { return params.contains(key); }

  // Declares an output path: parent directories created, path recorded for
  // the manifest and for removal if the stage later fails.
  std::string out(const char* key) {
    std::string path = params.at(key).get<std::string>();
    fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    outputs.push_back(path);
    return path;
  }

  void write_lines(const char* key, const std::vector<std::string>& lines) {
    util::atomic_write_lines(out(key), lines);
  }
};

std::vector<Sentence> load_corpus(const std::string& path) {
  std::vector<Sentence> corpus;
  for (const std::string& line : util::read_lines(path))
    corpus.push_back(util::split_tokens(line));
  return corpus;
}

align::Bitext load_bitext(const std::string& src_path, const std::string& tgt_path) {
  std::vector<Sentence> src = load_corpus(src_path);
  std::vector<Sentence> tgt = load_corpus(tgt_path);
  if (src.size() != tgt.size())
    throw std::runtime_error("line count mismatch between " + src_path + " and " +
                             tgt_path);
  align::Bitext bitext;
  bitext.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i)
    bitext.emplace_back(std::move(src[i]), std::move(tgt[i]));
  return bitext;
}

align::Alignment flip(const align::Alignment& a) {
  align::Alignment out;
  out.reserve(a.size());
  for (const align::Link& l : a) out.push_back({l.tgt, l.src});
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Stage bodies
// ---------------------------------------------------------------------------

void stage_normalize(StageCtx& ctx) {
  std::vector<std::string> lines = util::read_lines(ctx.in("input"));
  for (std::string& line : lines) line = textproc::normalize(line);
  ctx.write_lines("output", lines);
}

void stage_tokenize(StageCtx& ctx) {
  std::vector<std::string> lines = util::read_lines(ctx.in("input"));
  for (std::string& line : lines) line = util::join_tokens(textproc::tokenize(line));
  ctx.write_lines("output", lines);
}

void stage_truecase_train(StageCtx& ctx) {
  textproc::TruecaseModel model = textproc::truecase_train(load_corpus(ctx.in("input")));
  model.save(ctx.out("model"));
}

void stage_truecase_apply(StageCtx& ctx) {
  textproc::TruecaseModel model = textproc::TruecaseModel::load(ctx.in("model"));
  std::vector<std::string> lines = util::read_lines(ctx.in("input"));
  for (std::string& line : lines)
    line = util::join_tokens(textproc::truecase_apply(model, util::split_tokens(line)));
  ctx.write_lines("output", lines);
}

void stage_bpe_learn(StageCtx& ctx) {
  auto freqs = textproc::word_frequencies(load_corpus(ctx.in("input")));
  textproc::BpeModel model =
      textproc::bpe_learn(freqs, ctx.params.at("merges").get<std::size_t>());
  model.save(ctx.out("model"));
}

void stage_bpe_apply(StageCtx& ctx) {
  textproc::BpeModel model = textproc::BpeModel::load(ctx.in("model"));
  std::vector<std::string> lines = util::read_lines(ctx.in("input"));
  for (std::string& line : lines)
    line = util::join_tokens(textproc::bpe_apply(model, util::split_tokens(line)));
  ctx.write_lines("output", lines);
}

void stage_bpe_decode(StageCtx& ctx) {
  std::vector<std::string> lines = util::read_lines(ctx.in("input"));
  for (std::string& line : lines)
    line = util::join_tokens(textproc::bpe_decode(util::split_tokens(line)));
  ctx.write_lines("output", lines);
}

void stage_lm_train(StageCtx& ctx) {
  ngram_lm::NGramModel model =
      ngram_lm::lm_train(load_corpus(ctx.in("input")), ctx.params.at("order").get<std::size_t>(),
                         ctx.params.at("discount").get<double>());
  model.save(ctx.out("model"));
}

void stage_ml_select(StageCtx& ctx) {
  ngram_lm::NGramModel in_lm = ngram_lm::NGramModel::load(ctx.in("in_lm"));
  ngram_lm::NGramModel out_lm = ngram_lm::NGramModel::load(ctx.in("out_lm"));
  std::vector<std::string> lines = util::read_lines(ctx.in("input"));
  ctx.write_lines("output", ngram_lm::select_top(lines, in_lm, out_lm,
                                                 ctx.params.at("top_n").get<std::size_t>()));
}

void stage_align_train(StageCtx& ctx) {
  align::Bitext bitext = load_bitext(ctx.in("source"), ctx.in("target"));
  std::size_t iterations = ctx.params.at("iterations").get<std::size_t>();
  double tension = ctx.params.at("tension").get<double>();
  align::DiagonalModel fwd = align::train_diag(bitext, iterations, tension);
  fwd.table.save(ctx.out("forward_model"));
  align::Bitext flipped;
  flipped.reserve(bitext.size());
  for (const auto& [s, t] : bitext) flipped.emplace_back(t, s);
  align::DiagonalModel rev = align::train_diag(flipped, iterations, tension);
  rev.table.save(ctx.out("reverse_model"));
}

void stage_align_symmetrize(StageCtx& ctx) {
  align::Bitext bitext = load_bitext(ctx.in("source"), ctx.in("target"));
  double tension = ctx.params.at("tension").get<double>();
  align::DiagonalModel fwd{align::TranslationTable::load(ctx.in("forward_model")), tension,
                           align::kNullProb};
  align::DiagonalModel rev{align::TranslationTable::load(ctx.in("reverse_model")), tension,
                           align::kNullProb};
  align::Heuristic h = align::parse_heuristic(ctx.params.at("heuristic").get<std::string>());
  std::vector<std::string> lines;
  lines.reserve(bitext.size());
  for (const auto& [src, tgt] : bitext) {
    align::Alignment forward = align::viterbi_align(fwd, src, tgt);
    align::Alignment reverse = flip(align::viterbi_align(rev, tgt, src));
    lines.push_back(align::to_pharaoh(
        align::symmetrize(forward, reverse, h, src.size(), tgt.size())));
  }
  ctx.write_lines("output", lines);
}

void stage_phrase_extract(StageCtx& ctx) {
  align::Bitext bitext = load_bitext(ctx.in("source"), ctx.in("target"));
  std::vector<std::string> lines = util::read_lines(ctx.in("alignments"));
  if (lines.size() != bitext.size())
    throw std::runtime_error("alignment file line count does not match the bitext");
  std::vector<align::Alignment> alignments;
  alignments.reserve(lines.size());
  for (const std::string& line : lines) alignments.push_back(align::parse_pharaoh(line));
  phrasex::PhraseTable table = phrasex::build_phrase_table(
      bitext, alignments, ctx.params.at("max_phrase_len").get<std::size_t>());
  table.save(ctx.out("table"));
}

void stage_phrase_filter(StageCtx& ctx) {
  phrasex::PhraseTable table = phrasex::PhraseTable::load(ctx.in("table"));
  table = phrasex::filter_by_prob(table, ctx.params.at("prob_threshold").get<double>());
  if (ctx.has("in_lm")) {
    ngram_lm::NGramModel in_lm = ngram_lm::NGramModel::load(ctx.in("in_lm"));
    ngram_lm::NGramModel out_lm = ngram_lm::NGramModel::load(ctx.in("out_lm"));
    table = phrasex::filter_by_domain(table, in_lm, out_lm,
                                      ctx.params.at("top_k").get<std::size_t>());
  }
  if (ctx.has("target_mono")) {
    table = phrasex::filter_by_occurrence(table, load_corpus(ctx.in("target_mono")),
                                          ctx.params.at("min_count").get<std::uint64_t>());
  }
  table.save(ctx.out("output"));
}

void stage_constraints_export(StageCtx& ctx) {
  phrasex::PhraseTable table = phrasex::PhraseTable::load(ctx.in("table"));
  ctx.write_lines("output", phrasex::to_constraint_lines(
                                table, ctx.params.at("mode").get<std::string>()));
}

void stage_copy_candidates(StageCtx& ctx) {
  constraints::NeTagger tagger = ctx.has("gazetteer")
                                     ? constraints::NeTagger::load_gazetteer(ctx.in("gazetteer"))
                                     : constraints::NeTagger();
  auto src_counts = constraints::count_ne_phrases(load_corpus(ctx.in("source_mono")), tagger);
  auto tgt_counts = constraints::count_ne_phrases(load_corpus(ctx.in("target_mono")), tagger);
  constraints::ConstraintSet set;
  for (constraints::Constraint& c : constraints::extract_copy_candidates(
           src_counts, tgt_counts, ctx.params.at("min_count").get<std::uint64_t>()))
    set.add(std::move(c));
  ctx.write_lines("output", set.to_lines());
}

void stage_filter_features(StageCtx& ctx) {
  align::Bitext bitext = load_bitext(ctx.in("source"), ctx.in("target"));
  ngram_lm::NGramModel src_lm = ngram_lm::NGramModel::load(ctx.in("src_lm"));
  ngram_lm::NGramModel tgt_lm = ngram_lm::NGramModel::load(ctx.in("tgt_lm"));
  corpusfilter::FilterResources res = corpusfilter::make_resources(
      &src_lm, &tgt_lm, align::TranslationTable::load(ctx.in("dictionary")),
      util::read_lines(ctx.in("src_seed")), util::read_lines(ctx.in("tgt_seed")));
  std::vector<corpusfilter::FeatureVector> rows;
  rows.reserve(bitext.size());
  for (const auto& [src, tgt] : bitext)
    rows.push_back(corpusfilter::extract_features(src, tgt, res));
  ctx.write_lines("output", corpusfilter::features_to_tsv(rows));
}

void stage_filter_train(StageCtx& ctx) {
  std::vector<corpusfilter::FeatureVector> all =
      corpusfilter::features_from_tsv(util::read_lines(ctx.in("features")));
  std::vector<corpusfilter::FeatureVector> features;
  std::vector<int> labels;
  std::vector<std::string> rows = util::read_lines(ctx.in("labels"));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    std::vector<std::string> fields = util::split_tsv(rows[r]);
    if (fields.size() != 2)
      throw std::runtime_error("labels line " + std::to_string(r + 1) +
                               ": expected `index TAB label`");
    std::size_t idx = static_cast<std::size_t>(std::stoull(fields[0]));
    if (idx >= all.size())
      throw std::runtime_error("labels line " + std::to_string(r + 1) +
                               ": index out of range");
    int label = std::stoi(fields[1]);
    features.push_back(all[idx]);
    labels.push_back(label);
  }
  corpusfilter::ForestParams params;
  params.trees = ctx.params.at("trees").get<std::size_t>();
  params.max_depth = ctx.params.at("depth").get<std::size_t>();
  params.feature_subsample = ctx.params.at("feature_subsample").get<std::size_t>();
  params.seed = ctx.has("seed") ? ctx.params.at("seed").get<std::uint64_t>()
                                : stage_seed(*ctx.config, ctx.stage);
  corpusfilter::ForestModel model = corpusfilter::train_forest(features, labels, params);
  model.save(ctx.out("model"));
}

void stage_filter_select(StageCtx& ctx) {
  std::vector<corpusfilter::FeatureVector> features =
      corpusfilter::features_from_tsv(util::read_lines(ctx.in("features")));
  corpusfilter::ForestModel model = corpusfilter::ForestModel::load(ctx.in("model"));
  std::vector<std::string> lines;
  for (std::size_t i : corpusfilter::feedback_round(
           model, features, ctx.params.at("round_size").get<std::size_t>()))
    lines.push_back(std::to_string(i));
  ctx.write_lines("output", lines);
}

void stage_filter_apply(StageCtx& ctx) {
  std::vector<corpusfilter::FeatureVector> features =
      corpusfilter::features_from_tsv(util::read_lines(ctx.in("features")));
  corpusfilter::ForestModel model = corpusfilter::ForestModel::load(ctx.in("model"));
  std::vector<std::size_t> kept = corpusfilter::apply_filter(
      features, model, ctx.params.at("threshold").get<double>());
  std::vector<std::string> lines;
  lines.reserve(kept.size());
  for (std::size_t i : kept) lines.push_back(std::to_string(i));
  ctx.write_lines("output", lines);
  if (ctx.has("source")) {
    std::vector<std::string> src = util::read_lines(ctx.in("source"));
    std::vector<std::string> tgt = util::read_lines(ctx.in("target"));
    if (src.size() != tgt.size() || src.size() != features.size())
      throw std::runtime_error("source/target/features line counts differ");
    std::vector<std::string> src_kept, tgt_kept;
    for (std::size_t i : kept) {
      src_kept.push_back(src[i]);
      tgt_kept.push_back(tgt[i]);
    }
    ctx.write_lines("out_source", src_kept);
    ctx.write_lines("out_target", tgt_kept);
  }
}

void stage_decode(StageCtx& ctx) {
  std::vector<Sentence> input = load_corpus(ctx.in("input"));
  decoder::ToyScorer scorer(align::TranslationTable::load(ctx.in("lexicon")),
                            ngram_lm::NGramModel::load(ctx.in("lm")),
                            ctx.params.at("lambda").get<double>());
  constraints::ConstraintSet set;
  if (ctx.has("constraints")) set = constraints::ConstraintSet::load(ctx.in("constraints"));
  constraints::NeTagger tagger = ctx.has("gazetteer")
                                     ? constraints::NeTagger::load_gazetteer(ctx.in("gazetteer"))
                                     : constraints::NeTagger();
  bool ne_gated = ctx.params.at("ne_gated").get<bool>();
  std::size_t beam = ctx.params.at("beam").get<std::size_t>();
  std::size_t max_len = ctx.params.at("max_len").get<std::size_t>();

  std::vector<std::string> out;
  out.reserve(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const Sentence& line = input[i];
    std::vector<constraints::Match> matches =
        ne_gated ? constraints::match_all(line, set, tagger)
                 : constraints::match_always(line, set);
    std::vector<Sentence> seqs;
    std::set<std::size_t> seen;
    for (const constraints::Match& m : matches)
      if (seen.insert(m.constraint_index).second)
        seqs.push_back(set.items()[m.constraint_index].target);
    std::size_t budget = max_len != 0 ? max_len : 2 * line.size() + 2;
    decoder::DecodeResult res =
        seqs.empty() ? decoder::beam_search(scorer, line, budget, beam != 0 ? beam : 5)
                     : decoder::constrained_beam_search(scorer, line, seqs, budget,
                                                        beam != 0 ? beam : 20);
    out.push_back(std::to_string(i) + "\t" + util::join_tokens(res.tokens) + "\t" +
                  std::to_string(seen.size()));
  }
  ctx.write_lines("output", out);
}

void stage_backtranslate(StageCtx& ctx) {
  std::vector<Sentence> mono = load_corpus(ctx.in("mono"));
  ngram_lm::NGramModel in_lm = ngram_lm::NGramModel::load(ctx.in("in_lm"));
  ngram_lm::NGramModel out_lm = ngram_lm::NGramModel::load(ctx.in("out_lm"));
  decoder::ToyScorer scorer(align::TranslationTable::load(ctx.in("lexicon")),
                            ngram_lm::NGramModel::load(ctx.in("lm")),
                            ctx.params.at("lambda").get<double>());
  constraints::ConstraintSet set;
  if (ctx.has("constraints")) set = constraints::ConstraintSet::load(ctx.in("constraints"));
  constraints::NeTagger tagger = ctx.has("gazetteer")
                                     ? constraints::NeTagger::load_gazetteer(ctx.in("gazetteer"))
                                     : constraints::NeTagger();
  backtranslate::Result result = backtranslate::run_backtranslation(
      mono, in_lm, out_lm, ctx.params.at("top_n").get<std::size_t>(), scorer, set, tagger,
      backtranslate::parse_mode(ctx.params.at("mode").get<std::string>()),
      ctx.params.at("beam").get<std::size_t>(), ctx.params.at("max_len").get<std::size_t>());
  backtranslate::emit_corpus(result.pairs, ctx.out("out_source"), ctx.out("out_target"));
  util::atomic_write_file(ctx.out("stats_out"), result.stats.to_json() + "\n");
  backtranslate::write_constraints_log(result.pairs, ctx.out("constraints_log"));
}

void stage_bleu(StageCtx& ctx) {
  eval::BleuScore score = eval::bleu(
      util::read_lines(ctx.in("hyp")), util::read_lines(ctx.in("ref")),
      ctx.params.at("tok").get<std::string>() == "13a" ? eval::Tokenization::k13a
                                                       : eval::Tokenization::kNone);
  util::atomic_write_file(ctx.out("output"), eval::format_bleu(score) + "\n");
}

void stage_term_recall(StageCtx& ctx) {
  std::vector<Sentence> hyps = load_corpus(ctx.in("hyp"));
  eval::TermRecall tr = eval::term_recall(
      hyps, backtranslate::read_constraints_log(ctx.in("constraints_log"), hyps.size()));
  json report;
  report["recall"] = tr.recall;
  report["applied"] = tr.applied;
  report["satisfied"] = tr.satisfied;
  report["vacuous"] = tr.vacuous;
  json per = json::object();
  for (const auto& [key, counts] : tr.per_constraint)
    per[key] = json::array({counts.first, counts.second});
  report["per_constraint"] = per;
  util::atomic_write_file(ctx.out("output"), report.dump(2) + "\n");
}

const std::map<std::string, void (*)(StageCtx&)>& stage_bodies() {
  static const std::map<std::string, void (*)(StageCtx&)> table = {
      {"normalize", stage_normalize},
      {"tokenize", stage_tokenize},
      {"truecase-train", stage_truecase_train},
      {"truecase-apply", stage_truecase_apply},
      {"bpe-learn", stage_bpe_learn},
      {"bpe-apply", stage_bpe_apply},
      {"bpe-decode", stage_bpe_decode},
      {"lm-train", stage_lm_train},
      {"ml-select", stage_ml_select},
      {"align-train", stage_align_train},
      {"align-symmetrize", stage_align_symmetrize},
      {"phrase-extract", stage_phrase_extract},
      {"phrase-filter", stage_phrase_filter},
      {"constraints-export", stage_constraints_export},
      {"copy-candidates", stage_copy_candidates},
      {"filter-features", stage_filter_features},
      {"filter-train", stage_filter_train},
      {"filter-select", stage_filter_select},
      {"filter-apply", stage_filter_apply},
      {"decode", stage_decode},
      {"backtranslate", stage_backtranslate},
      {"bleu", stage_bleu},
      {"term-recall", stage_term_recall},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& known_stages() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, schema] : schemas()) out.push_back(name);
    return out;
  }();
  return names;
}

PipelineConfig validate_config(const std::string& path) {
  std::string text = util::read_file(path);

  DupKeyChecker checker;
  if (!json::sax_parse(text, &checker)) {
    if (!checker.duplicate.empty())
      throw std::runtime_error("config: duplicate key '" + checker.duplicate + "'");
    throw std::runtime_error("config parse error: " + checker.error);
  }
  json doc = json::parse(text);
  if (!doc.is_object()) throw std::runtime_error("config: top level must be an object");

  PipelineConfig config;
  if (!doc.contains("seed")) throw std::runtime_error("config: missing required key 'seed'");
  if (!doc["seed"].is_number_unsigned())
    throw std::runtime_error("config: seed: expected a non-negative integer");
  config.seed = doc["seed"].get<std::uint64_t>();
  if (!doc.contains("manifest_dir") || !doc["manifest_dir"].is_string() ||
      doc["manifest_dir"].get<std::string>().empty())
    throw std::runtime_error("config: missing or invalid 'manifest_dir'");
  config.manifest_dir = doc["manifest_dir"].get<std::string>();

  for (const auto& [key, value] : doc.items()) {
    if (key == "seed" || key == "manifest_dir" || key == "stages") continue;
    if (!schemas().count(stage_kind(key)))
      throw std::runtime_error("config: unknown top-level key '" + key + "'");
    json block = value;
    validate_block(key, block);
    doc[key] = block;
  }

  if (doc.contains("stages")) {
    if (!doc["stages"].is_array())
      throw std::runtime_error("config: stages: expected an array of stage names");
    for (const json& s : doc["stages"]) {
      if (!s.is_string() || !schemas().count(stage_kind(s.get<std::string>())))
        throw std::runtime_error("config: stages: unknown stage " + s.dump());
      if (!doc.contains(s.get<std::string>()))
        throw std::runtime_error("config: stages: stage '" + s.get<std::string>() +
                                 "' has no parameter block");
      config.stages.push_back(s.get<std::string>());
    }
  }

  config.doc = std::move(doc);
  return config;
}

std::uint64_t stage_seed(const PipelineConfig& config, const std::string& stage) {
  return util::fnv1a(stage) ^ config.seed;
}

nlohmann::json stage_parameters(const PipelineConfig& config, const std::string& stage,
                                const std::vector<std::string>& overrides) {
  if (!schemas().count(stage_kind(stage))) throw std::runtime_error("unknown stage '" + stage + "'");
  if (!config.doc.contains(stage))
    throw std::runtime_error("config: stage '" + stage + "' is not configured");
  json block = config.doc.at(stage);
  for (const std::string& kv : overrides) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::runtime_error("override must look like key=value: " + kv);
    std::string key = kv.substr(0, eq);
    std::string raw = kv.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // bare strings stay strings
    block[key] = value;
  }
  validate_block(stage, block);
  return block;
}

void run_stage(const std::string& stage, const PipelineConfig& config,
               const std::vector<std::string>& overrides) {
  const std::string kind = stage_kind(stage);
  if (!stage_bodies().count(kind)) throw std::runtime_error("unknown stage '" + stage + "'");

  StageCtx ctx;
  ctx.config = &config;
  ctx.stage = stage;
  ctx.params = stage_parameters(config, stage, overrides);

  const Schema& schema = schemas().at(kind);
  std::set<std::string> input_paths;
  for (const ParamSpec& spec : schema) {
    if (!ctx.params.contains(spec.key)) continue;
    if (spec.type == PType::kPathIn) {
      std::string p = ctx.params.at(spec.key).get<std::string>();
      if (!fs::exists(p))
        throw std::runtime_error(stage + ": input path does not exist: " + p);
      ctx.inputs.push_back(p);
      input_paths.insert(p);
    }
  }
  for (const ParamSpec& spec : schema) {
    if (spec.type == PType::kPathOut && ctx.params.contains(spec.key)) {
      std::string p = ctx.params.at(spec.key).get<std::string>();
      if (input_paths.count(p))
        throw std::runtime_error(stage + ": output would overwrite input: " + p);
    }
  }

  try {
    stage_bodies().at(kind)(ctx);
  } catch (...) {
    std::error_code ec;
    for (const std::string& p : ctx.outputs) fs::remove(p, ec);
    throw;
  }

  json manifest;
  manifest["stage"] = stage;
  manifest["seed"] = stage_seed(config, stage);
  manifest["parameters"] = ctx.params;
  json in = json::object(), out = json::object();
  char hex[32];
  for (const std::string& p : ctx.inputs) {
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(util::file_fingerprint(p)));
    in[p] = hex;
  }
  for (const std::string& p : ctx.outputs) {
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(util::file_fingerprint(p)));
    out[p] = hex;
  }
  manifest["inputs"] = in;
  manifest["outputs"] = out;
  fs::create_directories(config.manifest_dir);
  util::atomic_write_file((fs::path(config.manifest_dir) / (stage + ".json")).string(),
                          manifest.dump(2) + "\n");
}

void run_all(const PipelineConfig& config) {
  if (config.stages.empty())
    throw std::runtime_error("config has no 'stages' list to run");
  for (const std::string& stage : config.stages) run_stage(stage, config);
}

}  // namespace termforge::pipeline
