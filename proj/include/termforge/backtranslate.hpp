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

#ifndef TERMFORGE_BACKTRANSLATE_HPP_
#define TERMFORGE_BACKTRANSLATE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "termforge/constraints.hpp"
#include "termforge/decoder.hpp"
#include "termforge/ngram_lm.hpp"
#include "termforge/types.hpp"

namespace termforge::backtranslate {

enum class Mode { kConstrained, kUnconstrained };

std::string mode_name(Mode mode);
Mode parse_mode(const std::string& name);

// One synthetic training pair: the decoder output becomes the source side,
// the monolingual line stays the target side. In constrained mode every
// applied constraint's target phrase occurs contiguously in synthetic_source.
struct SyntheticPair {
  Sentence synthetic_source;
  Sentence original_target;
  std::vector<constraints::Constraint> applied_constraints;
  bool constrained = false;
};

struct Stats {
  std::uint64_t sentences_selected = 0;
  std::uint64_t sentences_processed = 0;
  std::uint64_t sentences_skipped = 0;      // decode failure, line dropped
  std::uint64_t constraints_matched = 0;    // applicable over selected lines
  std::uint64_t constraints_satisfied = 0;  // phrase present in the output
  std::uint64_t infeasible_lines = 0;       // budget too small, ran unconstrained
  std::uint64_t warned_lines = 0;           // constraints met but no EOS in budget

  std::string to_json() const;  // flat object, keys sorted
};

struct Result {
  std::vector<SyntheticPair> pairs;
  Stats stats;
};

// Selects the top_n most in-domain monolingual lines by Moore-Lewis score,
// matches constraints per line (always + NE-gated), decodes each line with or
// without its constraints, and reports honest corpus-level counts. beam 0
// picks the mode default (20 constrained, 5 unconstrained); max_len 0 gives
// each line a budget of 2*len+2 tokens, and a line whose constraints exceed
// that budget falls back to an unconstrained decode.
Result run_backtranslation(const std::vector<Sentence>& mono,
                           const ngram_lm::NGramModel& in_lm,
                           const ngram_lm::NGramModel& out_lm, std::size_t top_n,
                           const decoder::Scorer& scorer,
                           const constraints::ConstraintSet& constraint_set,
                           const constraints::NeTagger& tagger, Mode mode,
                           std::size_t beam = 0, std::size_t max_len = 0);

// Parallel line-aligned files, one sentence per line, in pair order.
void emit_corpus(const std::vector<SyntheticPair>& pairs, const std::string& src_path,
                 const std::string& tgt_path);

// TSV `line TAB source TAB target TAB mode`, one row per applied constraint;
// line indices are 0-based pair positions.
void write_constraints_log(const std::vector<SyntheticPair>& pairs,
                           const std::string& path);

// Inverse of write_constraints_log for a corpus of n_lines sentences.
std::vector<std::vector<constraints::Constraint>> read_constraints_log(
    const std::string& path, std::size_t n_lines);

}  // namespace termforge::backtranslate

#endif  // TERMFORGE_BACKTRANSLATE_HPP_
