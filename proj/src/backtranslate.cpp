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

#include "termforge/backtranslate.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "termforge/eval.hpp"
#include "termforge/util.hpp"

namespace termforge::backtranslate {

std::string mode_name(Mode mode) {
  return mode == Mode::kConstrained ? "constrained" : "unconstrained";
}

Mode parse_mode(const std::string& name) {
  if (name == "constrained") return Mode::kConstrained;
  if (name == "unconstrained") return Mode::kUnconstrained;
  throw std::invalid_argument("unknown backtranslation mode: " + name);
}

std::string Stats::to_json() const {
  std::ostringstream os;
  os << "{"
     << "\"constraints_matched\": " << constraints_matched << ", "
     << "\"constraints_satisfied\": " << constraints_satisfied << ", "
     << "\"infeasible_lines\": " << infeasible_lines << ", "
     << "\"sentences_processed\": " << sentences_processed << ", "
     << "\"sentences_selected\": " << sentences_selected << ", "
     << "\"sentences_skipped\": " << sentences_skipped << ", "
     << "\"warned_lines\": " << warned_lines << "}";
  return os.str();
}

Result run_backtranslation(const std::vector<Sentence>& mono,
                           const ngram_lm::NGramModel& in_lm,
                           const ngram_lm::NGramModel& out_lm, std::size_t top_n,
                           const decoder::Scorer& scorer,
                           const constraints::ConstraintSet& constraint_set,
                           const constraints::NeTagger& tagger, Mode mode,
                           std::size_t beam, std::size_t max_len) {
  if (beam == 0) beam = mode == Mode::kConstrained ? 20 : 5;

  Result result;
  std::vector<std::size_t> picked =
      ngram_lm::select_top_indices(mono, in_lm, out_lm, top_n);
  result.stats.sentences_selected = picked.size();

  for (std::size_t idx : picked) {
    const Sentence& line = mono[idx];
    std::size_t budget = max_len != 0 ? max_len : 2 * line.size() + 2;

    // Constraints whose source phrase occurs in this line, one entry per
    // constraint in first-occurrence order.
    std::vector<constraints::Constraint> matched;
    {
      std::set<std::size_t> seen;
      for (const constraints::Match& m :
           constraints::match_all(line, constraint_set, tagger)) {
        if (seen.insert(m.constraint_index).second)
          matched.push_back(constraint_set.items()[m.constraint_index]);
      }
    }
    result.stats.constraints_matched += matched.size();

    bool enforce = mode == Mode::kConstrained && !matched.empty();
    if (enforce) {
      // Mirror the decoder's duplicate collapse when checking feasibility.
      std::vector<Sentence> seqs;
      std::size_t total = 0;
      for (const constraints::Constraint& c : matched) {
        if (std::find(seqs.begin(), seqs.end(), c.target) == seqs.end()) {
          seqs.push_back(c.target);
          total += c.target.size();
        }
      }
      if (total > budget) {
        enforce = false;
        ++result.stats.infeasible_lines;
      }
    }

    decoder::DecodeResult decoded;
    try {
      if (enforce) {
        std::vector<Sentence> seqs;
        seqs.reserve(matched.size());
        for (const constraints::Constraint& c : matched) seqs.push_back(c.target);
        decoded = decoder::constrained_beam_search(scorer, line, seqs, budget, beam);
      } else {
        decoded = decoder::beam_search(scorer, line, budget, beam);
      }
    } catch (const std::exception&) {
      ++result.stats.sentences_skipped;
      continue;
    }

    ++result.stats.sentences_processed;
    if (!decoded.finished) ++result.stats.warned_lines;
    for (const constraints::Constraint& c : matched)
      if (eval::contains_phrase(decoded.tokens, c.target))
        ++result.stats.constraints_satisfied;

    SyntheticPair pair;
    pair.synthetic_source = decoded.tokens;
    pair.original_target = line;
    if (enforce) pair.applied_constraints = matched;
    pair.constrained = enforce;
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

void emit_corpus(const std::vector<SyntheticPair>& pairs, const std::string& src_path,
                 const std::string& tgt_path) {
  std::vector<std::string> src, tgt;
  src.reserve(pairs.size());
  tgt.reserve(pairs.size());
  for (const SyntheticPair& p : pairs) {
    src.push_back(util::join_tokens(p.synthetic_source));
    tgt.push_back(util::join_tokens(p.original_target));
  }
  util::atomic_write_lines(src_path, src);
  util::atomic_write_lines(tgt_path, tgt);
}

void write_constraints_log(const std::vector<SyntheticPair>& pairs,
                           const std::string& path) {
  std::vector<std::string> rows;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (const constraints::Constraint& c : pairs[i].applied_constraints) {
      rows.push_back(std::to_string(i) + "\t" + util::join_tokens(c.source) + "\t" +
                     util::join_tokens(c.target) + "\t" + constraints::mode_name(c.mode));
    }
  }
  util::atomic_write_lines(path, rows);
}

std::vector<std::vector<constraints::Constraint>> read_constraints_log(
    const std::string& path, std::size_t n_lines) {
  std::vector<std::vector<constraints::Constraint>> out(n_lines);
  std::vector<std::string> rows = util::read_lines(path);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    std::vector<std::string> fields = util::split_tsv(rows[r]);
    if (fields.size() != 4)
      throw std::runtime_error("constraints log line " + std::to_string(r + 1) +
                               ": expected 4 tab-separated fields");
    std::size_t line = 0;
    try {
      line = static_cast<std::size_t>(std::stoull(fields[0]));
    } catch (const std::exception&) {
      throw std::runtime_error("constraints log line " + std::to_string(r + 1) +
                               ": malformed line index");
    }
    if (line >= n_lines)
      throw std::runtime_error("constraints log line " + std::to_string(r + 1) +
                               ": index " + fields[0] + " out of range");
    constraints::Constraint c;
    c.source = util::split_tokens(fields[1]);
    c.target = util::split_tokens(fields[2]);
    c.mode = constraints::parse_mode(fields[3]);
    out[line].push_back(std::move(c));
  }
  return out;
}

}  // namespace termforge::backtranslate
