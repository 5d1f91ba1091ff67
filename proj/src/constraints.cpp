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

#include "termforge/constraints.hpp"

#include <algorithm>
#include <stdexcept>

#include "termforge/unicode.hpp"
#include "termforge/util.hpp"

namespace termforge::constraints {

std::string mode_name(Mode mode) {
  return mode == Mode::kAlways ? "always" : "ne_gated";
}

Mode parse_mode(const std::string& name) {
  if (name == "always") return Mode::kAlways;
  if (name == "ne_gated") return Mode::kNeGated;
  throw std::runtime_error("unknown constraint mode: " + name);
}

void ConstraintSet::add(Constraint c) {
  if (c.source.empty() || c.target.empty())
    throw std::invalid_argument("constraint sides must be non-empty");
  for (const auto& existing : items_)
    if (existing == c) return;
  items_.push_back(std::move(c));
}

ConstraintSet ConstraintSet::from_lines(const std::vector<std::string>& lines) {
  ConstraintSet set;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto fields = util::split_tsv(lines[i]);
    if (fields.size() != 3)
      throw std::runtime_error("constraints line " + std::to_string(i + 1) +
                               ": expected 3 tab-separated fields");
    Constraint c;
    c.source = util::split_tokens(fields[0]);
    c.target = util::split_tokens(fields[1]);
    if (c.source.empty() || c.target.empty())
      throw std::runtime_error("constraints line " + std::to_string(i + 1) +
                               ": empty source or target");
    try {
      c.mode = parse_mode(fields[2]);
    } catch (const std::exception& e) {
      throw std::runtime_error("constraints line " + std::to_string(i + 1) + ": " +
                               e.what());
    }
    set.add(std::move(c));
  }
  return set;
}

ConstraintSet ConstraintSet::load(const std::string& path) {
  return from_lines(util::read_lines(path));
}

std::vector<std::string> ConstraintSet::to_lines() const {
  std::vector<std::string> lines;
  lines.reserve(items_.size());
  for (const auto& c : items_)
    lines.push_back(util::join_tokens(c.source) + "\t" + util::join_tokens(c.target) +
                    "\t" + mode_name(c.mode));
  return lines;
}

void ConstraintSet::save(const std::string& path) const {
  util::atomic_write_lines(path, to_lines());
}

namespace {

bool subsequence_at(const Sentence& sentence, std::size_t pos, const Sentence& phrase) {
  if (pos + phrase.size() > sentence.size()) return false;
  for (std::size_t k = 0; k < phrase.size(); ++k)
    if (sentence[pos + k] != phrase[k]) return false;
  return true;
}

bool is_capitalized(const Token& token) {
  std::size_t i = 0;
  return !token.empty() && uni::is_upper(uni::decode(token, i));
}

std::vector<Match> match_mode(const Sentence& sentence, const ConstraintSet& set,
                              Mode mode) {
  std::vector<Match> out;
  for (std::size_t c = 0; c < set.items().size(); ++c) {
    const Constraint& constraint = set.items()[c];
    if (constraint.mode != mode) continue;
    for (std::size_t pos = 0; pos + constraint.source.size() <= sentence.size(); ++pos) {
      if (subsequence_at(sentence, pos, constraint.source))
        out.push_back({c, {pos, pos + constraint.source.size()}});
    }
  }
  std::sort(out.begin(), out.end(), [](const Match& a, const Match& b) {
    if (a.span != b.span) return a.span < b.span;
    return a.constraint_index < b.constraint_index;
  });
  return out;
}

}  // namespace

NeTagger::NeTagger(std::vector<Sentence> gazetteer) : gazetteer_(std::move(gazetteer)) {
  for (const auto& entry : gazetteer_)
    if (entry.empty()) throw std::invalid_argument("empty gazetteer entry");
  std::sort(gazetteer_.begin(), gazetteer_.end(),
            [](const Sentence& a, const Sentence& b) {
              if (a.size() != b.size()) return a.size() > b.size();
              return a < b;
            });
  gazetteer_.erase(std::unique(gazetteer_.begin(), gazetteer_.end()), gazetteer_.end());
}

NeTagger NeTagger::load_gazetteer(const std::string& path) {
  std::vector<Sentence> entries;
  for (const auto& line : util::read_lines(path)) {
    Sentence entry = util::split_tokens(line);
    if (!entry.empty()) entries.push_back(std::move(entry));
  }
  return NeTagger(std::move(entries));
}

std::vector<Span> NeTagger::tag(const Sentence& sentence) const {
  const std::size_t n = sentence.size();
  std::vector<bool> covered(n, false);
  std::vector<Span> spans;

  // gazetteer pass: greedy left-to-right, longest entry first
  std::size_t pos = 0;
  while (pos < n) {
    const Sentence* hit = nullptr;
    for (const auto& entry : gazetteer_) {
      if (subsequence_at(sentence, pos, entry)) {
        hit = &entry;
        break;
      }
    }
    if (hit) {
      spans.push_back({pos, pos + hit->size()});
      for (std::size_t k = pos; k < pos + hit->size(); ++k) covered[k] = true;
      pos += hit->size();
    } else {
      ++pos;
    }
  }

  // pattern pass: maximal capitalized runs over uncovered non-initial tokens
  std::size_t i = 0;
  while (i < n) {
    if (i == 0 || covered[i] || !is_capitalized(sentence[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && !covered[j] && is_capitalized(sentence[j])) ++j;
    spans.push_back({i, j});
    i = j;
  }

  std::sort(spans.begin(), spans.end());
  return spans;
}

std::vector<Match> match_always(const Sentence& sentence, const ConstraintSet& set) {
  return match_mode(sentence, set, Mode::kAlways);
}

std::vector<Match> match_ne_gated(const Sentence& sentence, const ConstraintSet& set,
                                  const NeTagger& tagger) {
  std::vector<Span> ne_spans = tagger.tag(sentence);
  std::vector<Match> out;
  for (const Match& m : match_mode(sentence, set, Mode::kNeGated)) {
    for (const Span& ne : ne_spans) {
      if (ne.contains(m.span)) {
        out.push_back(m);
        break;
      }
    }
  }
  return out;
}

std::vector<Match> match_all(const Sentence& sentence, const ConstraintSet& set,
                             const NeTagger& tagger) {
  std::vector<Match> out = match_always(sentence, set);
  std::vector<Match> gated = match_ne_gated(sentence, set, tagger);
  out.insert(out.end(), gated.begin(), gated.end());
  std::sort(out.begin(), out.end(), [](const Match& a, const Match& b) {
    if (a.span != b.span) return a.span < b.span;
    return a.constraint_index < b.constraint_index;
  });
  return out;
}

std::map<Sentence, std::uint64_t> count_ne_phrases(const std::vector<Sentence>& corpus,
                                                   const NeTagger& tagger) {
  std::map<Sentence, std::uint64_t> counts;
  for (const auto& sentence : corpus) {
    for (const Span& span : tagger.tag(sentence)) {
      Sentence phrase(sentence.begin() + static_cast<long>(span.begin),
                      sentence.begin() + static_cast<long>(span.end));
      ++counts[phrase];
    }
  }
  return counts;
}

std::vector<Constraint> extract_copy_candidates(
    const std::map<Sentence, std::uint64_t>& src_counts,
    const std::map<Sentence, std::uint64_t>& tgt_counts, std::uint64_t min_count) {
  std::vector<Constraint> out;
  for (const auto& [phrase, src_count] : src_counts) {
    if (src_count < min_count) continue;
    auto tgt = tgt_counts.find(phrase);
    if (tgt == tgt_counts.end() || tgt->second < min_count) continue;
    out.push_back({phrase, phrase, Mode::kNeGated});
  }
  return out;
}

}  // namespace termforge::constraints
