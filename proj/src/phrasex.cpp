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

#include "termforge/phrasex.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <stdexcept>

#include "termforge/util.hpp"

namespace termforge::phrasex {

std::vector<PhrasePair> PhraseTable::targets_of(const Sentence& source) const {
  std::vector<PhrasePair> out;
  for (const auto& e : entries_)
    if (e.source == source) out.push_back(e);
  return out;
}

PhraseTable PhraseTable::from_pairs(std::vector<PhrasePair> pairs) {
  std::sort(pairs.begin(), pairs.end(),
            [](const PhrasePair& a, const PhrasePair& b) { return a.key() < b.key(); });
  for (std::size_t i = 1; i < pairs.size(); ++i)
    if (pairs[i].key() == pairs[i - 1].key())
      throw std::invalid_argument("duplicate phrase pair: " +
                                  util::join_tokens(pairs[i].source));
  PhraseTable t;
  t.entries_ = std::move(pairs);
  return t;
}

void PhraseTable::save(const std::string& path) const {
  std::vector<std::string> lines;
  lines.reserve(entries_.size());
  for (const auto& e : entries_)
    lines.push_back(util::join_tokens(e.source) + "\t" + util::join_tokens(e.target) +
                    "\t" + std::to_string(e.count) + "\t" + util::format_double(e.prob));
  util::atomic_write_lines(path, lines);
}

PhraseTable PhraseTable::load(const std::string& path) {
  std::vector<PhrasePair> pairs;
  for (const auto& line : util::read_lines(path)) {
    if (line.empty()) continue;
    auto fields = util::split_tsv(line);
    if (fields.size() != 4) throw std::runtime_error("malformed phrase table line: " + line);
    PhrasePair p;
    p.source = util::split_tokens(fields[0]);
    p.target = util::split_tokens(fields[1]);
    p.count = std::stoull(fields[2]);
    p.prob = util::parse_double(fields[3]);
    if (p.source.empty() || p.target.empty() || p.count == 0 || !(p.prob > 0.0))
      throw std::runtime_error("invalid phrase table entry: " + line);
    pairs.push_back(std::move(p));
  }
  return from_pairs(std::move(pairs));
}

std::vector<PhrasePair> extract_phrases(const Sentence& src, const Sentence& tgt,
                                        const align::Alignment& alignment,
                                        std::size_t max_len) {
  const std::size_t n = src.size(), m = tgt.size();
  for (const auto& l : alignment)
    if (l.src >= n || l.tgt >= m)
      throw std::out_of_range("alignment link out of bounds for pair");

  std::vector<bool> tgt_aligned(m, false);
  for (const auto& l : alignment) tgt_aligned[l.tgt] = true;

  std::map<std::pair<Sentence, Sentence>, bool> seen;
  std::vector<PhrasePair> out;
  auto emit = [&](std::size_t i1, std::size_t i2, std::size_t j1, std::size_t j2) {
    Sentence s(src.begin() + i1, src.begin() + i2 + 1);
    Sentence t(tgt.begin() + j1, tgt.begin() + j2 + 1);
    if (seen.emplace(std::make_pair(s, t), true).second) {
      PhrasePair p;
      p.source = std::move(s);
      p.target = std::move(t);
      out.push_back(std::move(p));
    }
  };

  for (std::size_t i1 = 0; i1 < n; ++i1) {
    for (std::size_t i2 = i1; i2 < n && i2 - i1 + 1 <= max_len; ++i2) {
      // target span covered by links out of [i1,i2]
      std::size_t j_min = m, j_max = 0;
      bool found = false;
      for (const auto& l : alignment) {
        if (l.src < i1 || l.src > i2) continue;
        j_min = std::min<std::size_t>(j_min, l.tgt);
        j_max = std::max<std::size_t>(j_max, l.tgt);
        found = true;
      }
      if (!found) continue;
      bool consistent = true;
      for (const auto& l : alignment) {
        if (l.tgt >= j_min && l.tgt <= j_max && (l.src < i1 || l.src > i2)) {
          consistent = false;
          break;
        }
      }
      if (!consistent) continue;
      // extend over unaligned target boundary words
      for (long j1 = static_cast<long>(j_min);
           j1 >= 0 && (j1 == static_cast<long>(j_min) || !tgt_aligned[j1]); --j1) {
        for (std::size_t j2 = j_max;
             j2 < m && (j2 == j_max || !tgt_aligned[j2]); ++j2) {
          if (j2 - static_cast<std::size_t>(j1) + 1 <= max_len)
            emit(i1, i2, static_cast<std::size_t>(j1), j2);
        }
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PhrasePair& a, const PhrasePair& b) { return a.key() < b.key(); });
  return out;
}

PhraseTable build_phrase_table(const align::Bitext& bitext,
                               const std::vector<align::Alignment>& alignments,
                               std::size_t max_len) {
  if (bitext.size() != alignments.size())
    throw std::invalid_argument("bitext and alignment counts differ");
  std::map<std::pair<Sentence, Sentence>, std::uint64_t> counts;
  for (std::size_t p = 0; p < bitext.size(); ++p) {
    for (const auto& pp :
         extract_phrases(bitext[p].first, bitext[p].second, alignments[p], max_len))
      ++counts[{pp.source, pp.target}];
  }
  std::map<Sentence, std::uint64_t> source_totals;
  for (const auto& [key, c] : counts) source_totals[key.first] += c;
  std::vector<PhrasePair> pairs;
  pairs.reserve(counts.size());
  for (const auto& [key, c] : counts) {
    PhrasePair pp;
    pp.source = key.first;
    pp.target = key.second;
    pp.count = c;
    pp.prob = static_cast<double>(c) / static_cast<double>(source_totals[key.first]);
    pairs.push_back(std::move(pp));
  }
  return PhraseTable::from_pairs(std::move(pairs));
}

PhraseTable filter_by_prob(const PhraseTable& table, double threshold) {
  std::vector<PhrasePair> kept;
  for (const auto& e : table.entries())
    if (e.prob > threshold) kept.push_back(e);
  return PhraseTable::from_pairs(std::move(kept));
}

PhraseTable filter_by_domain(const PhraseTable& table, const ngram_lm::NGramModel& in_lm,
                             const ngram_lm::NGramModel& out_lm, std::size_t k) {
  if (k >= table.size()) {
    if (k > table.size())
      std::cerr << "filter_by_domain: requested " << k << " pairs but table has only "
                << table.size() << "; keeping all of them\n";
    return table;
  }
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i)
    scored.emplace_back(
        ngram_lm::moore_lewis(in_lm, out_lm, table.entries()[i].source), i);
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return table.entries()[a.second].key() < table.entries()[b.second].key();
  });
  std::vector<PhrasePair> kept;
  kept.reserve(k);
  for (std::size_t i = 0; i < k; ++i) kept.push_back(table.entries()[scored[i].second]);
  return PhraseTable::from_pairs(std::move(kept));
}

PhraseTable filter_by_occurrence(const PhraseTable& table,
                                 const std::vector<Sentence>& target_mono,
                                 std::uint64_t min_count) {
  std::vector<Sentence> phrases;
  phrases.reserve(table.size());
  for (const auto& e : table.entries()) phrases.push_back(e.target);
  auto counts = util::count_phrase_occurrences(target_mono, phrases);
  std::vector<PhrasePair> kept;
  for (const auto& e : table.entries())
    if (counts[e.target] >= min_count) kept.push_back(e);
  return PhraseTable::from_pairs(std::move(kept));
}

std::vector<std::string> to_constraint_lines(const PhraseTable& table,
                                             const std::string& mode) {
  std::vector<std::string> lines;
  lines.reserve(table.size());
  for (const auto& e : table.entries())
    lines.push_back(util::join_tokens(e.source) + "\t" + util::join_tokens(e.target) +
                    "\t" + mode);
  return lines;
}

}  // namespace termforge::phrasex
