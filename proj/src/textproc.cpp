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

#include "termforge/textproc.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "termforge/unicode.hpp"
#include "termforge/util.hpp"

namespace termforge::textproc {

namespace {

// Canonical composition for combining marks over Latin bases. Key packs
// (base << 16) | mark.
char32_t compose(char32_t base, char32_t mark) {
  auto key = [](char32_t b, char32_t m) -> std::uint64_t {
    return (static_cast<std::uint64_t>(b) << 16) | m;
  };
  static const std::map<std::uint64_t, char32_t> table = [&] {
    std::map<std::uint64_t, char32_t> t;
    auto add = [&](char32_t mark, const char* bases, const char32_t* composed) {
      for (std::size_t i = 0; bases[i]; ++i)
        t[key(static_cast<char32_t>(bases[i]), mark)] = composed[i];
    };
    {
      static const char32_t c[] = {0xC0, 0xC8, 0xCC, 0xD2, 0xD9, 0xE0, 0xE8, 0xEC, 0xF2, 0xF9};
      add(0x300, "AEIOUaeiou", c);
    }
    {
      static const char32_t c[] = {0xC1, 0xC9, 0xCD, 0xD3, 0xDA, 0xDD,
                                   0xE1, 0xE9, 0xED, 0xF3, 0xFA, 0xFD};
      add(0x301, "AEIOUYaeiouy", c);
    }
    {
      static const char32_t c[] = {0xC2, 0xCA, 0xCE, 0xD4, 0xDB, 0xE2, 0xEA, 0xEE, 0xF4, 0xFB};
      add(0x302, "AEIOUaeiou", c);
    }
    {
      static const char32_t c[] = {0xC3, 0xD1, 0xD5, 0xE3, 0xF1, 0xF5};
      add(0x303, "ANOano", c);
    }
    {
      static const char32_t c[] = {0xC4, 0xCB, 0xCF, 0xD6, 0xDC, 0x178,
                                   0xE4, 0xEB, 0xEF, 0xF6, 0xFC, 0xFF};
      add(0x308, "AEIOUYaeiouy", c);
    }
    {
      static const char32_t c[] = {0xC5, 0xE5};
      add(0x30A, "Aa", c);
    }
    {
      static const char32_t c[] = {0xC7, 0xE7};
      add(0x327, "Cc", c);
    }
    return t;
  }();
  auto it = table.find(key(base, mark));
  return it == table.end() ? 0 : it->second;
}

bool is_combining_mark(char32_t cp) {
  return cp == 0x300 || cp == 0x301 || cp == 0x302 || cp == 0x303 || cp == 0x308 ||
         cp == 0x30A || cp == 0x327;
}

// Typographic punctuation folds; returns empty string for "drop".
bool fold_punct(char32_t cp, std::u32string* out) {
  switch (cp) {
    case 0x201C: case 0x201D: case 0x201E: case 0x201F:
    case 0x00AB: case 0x00BB: case 0x2039: case 0x203A:
      out->push_back(U'"');
      return true;
    case 0x2018: case 0x2019: case 0x201A: case 0x201B:
      out->push_back(U'\'');
      return true;
    case 0x2013: case 0x2014: case 0x2015: case 0x2212:
      out->push_back(U'-');
      return true;
    case 0x2026:
      out->append(U"...");
      return true;
    case 0x00AD:  // soft hyphen
      return true;
    default:
      return false;
  }
}

bool is_word_char(char32_t cp) {
  if (uni::is_space(cp) || uni::is_ascii_punct(cp)) return false;
  return cp >= 0x21;
}

}  // namespace

std::string normalize(const std::string& text) {
  std::u32string in = uni::decode_string(text);

  std::u32string composed;
  composed.reserve(in.size());
  for (char32_t cp : in) {
    if (is_combining_mark(cp) && !composed.empty()) {
      if (char32_t c = compose(composed.back(), cp)) {
        composed.back() = c;
        continue;
      }
    }
    composed.push_back(cp);
  }

  std::u32string folded;
  folded.reserve(composed.size());
  for (char32_t cp : composed) {
    if (!fold_punct(cp, &folded)) folded.push_back(cp);
  }

  std::u32string out;
  out.reserve(folded.size());
  bool pending_space = false;
  for (char32_t cp : folded) {
    if (uni::is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(cp);
  }
  return uni::encode_string(out);
}

Sentence tokenize(const std::string& text) {
  std::u32string cps = uni::decode_string(text);
  Sentence out;
  std::u32string piece;
  auto flush = [&] {
    if (!piece.empty()) {
      out.push_back(uni::encode_string(piece));
      piece.clear();
    }
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    char32_t cp = cps[i];
    if (uni::is_space(cp)) {
      flush();
      continue;
    }
    if (uni::is_ascii_punct(cp)) {
      bool keep = false;
      char32_t prev = piece.empty() ? 0 : piece.back();
      char32_t next = (i + 1 < cps.size()) ? cps[i + 1] : 0;
      if (cp == U'-' && is_word_char(prev) && is_word_char(next)) keep = true;
      if ((cp == U'.' || cp == U',') && uni::is_ascii_digit(prev) && uni::is_ascii_digit(next))
        keep = true;
      if (keep) {
        piece.push_back(cp);
      } else {
        flush();
        out.push_back(uni::encode_string(std::u32string(1, cp)));
      }
      continue;
    }
    piece.push_back(cp);
  }
  flush();
  return out;
}

std::string detokenize(const Sentence& tokens) {
  static const std::set<std::string> no_space_before = {
      ",", ".", ";", ":", "!", "?", ")", "]", "}", "%", "'"};
  static const std::set<std::string> no_space_after = {"(", "[", "{", "'"};
  std::string out;
  bool suppress_next = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (i > 0 && !suppress_next && !no_space_before.count(t)) out += ' ';
    out += t;
    suppress_next = no_space_after.count(t) > 0;
  }
  return out;
}

bool TruecaseModel::lookup(const std::string& lower, std::string* cased) const {
  auto it = map_.find(lower);
  if (it == map_.end()) return false;
  *cased = it->second.first;
  return true;
}

void TruecaseModel::set(const std::string& lower, const std::string& cased,
                        std::uint64_t count) {
  if (count == 0) throw std::invalid_argument("truecase count must be >= 1");
  if (uni::lowercase(cased) != lower)
    throw std::invalid_argument("cased form '" + cased + "' does not lowercase to '" + lower +
                                "'");
  map_[lower] = {cased, count};
}

void TruecaseModel::save(const std::string& path) const {
  std::vector<std::string> lines;
  lines.reserve(map_.size());
  for (const auto& [lower, entry] : map_)
    lines.push_back(lower + "\t" + entry.first + "\t" + std::to_string(entry.second));
  util::atomic_write_lines(path, lines);
}

TruecaseModel TruecaseModel::load(const std::string& path) {
  TruecaseModel model;
  for (const auto& line : util::read_lines(path)) {
    if (line.empty()) continue;
    auto fields = util::split_tsv(line);
    if (fields.size() != 3) throw std::runtime_error("malformed truecase line: " + line);
    model.set(fields[0], fields[1], std::stoull(fields[2]));
  }
  return model;
}

TruecaseModel truecase_train(const std::vector<Sentence>& corpus) {
  // lower form -> surface form -> count; sentence-initial tokens are not
  // evidence (their casing is positional).
  std::map<std::string, std::map<std::string, std::uint64_t>> evidence;
  for (const auto& sentence : corpus) {
    for (std::size_t i = 1; i < sentence.size(); ++i)
      ++evidence[uni::lowercase(sentence[i])][sentence[i]];
  }
  TruecaseModel model;
  for (const auto& [lower, forms] : evidence) {
    std::string best;
    std::uint64_t best_count = 0;
    for (const auto& [form, count] : forms) {
      if (count > best_count) {  // map order makes ties pick the smallest form
        best = form;
        best_count = count;
      }
    }
    model.set(lower, best, best_count);
  }
  return model;
}

Sentence truecase_apply(const TruecaseModel& model, const Sentence& sentence) {
  if (sentence.empty()) return sentence;
  Sentence out = sentence;
  std::string cased;
  if (model.lookup(uni::lowercase(out[0]), &cased)) out[0] = cased;
  return out;
}

void BpeModel::save(const std::string& path) const {
  std::vector<std::string> lines;
  lines.reserve(merges.size() + 1);
  lines.push_back("#bpe-v1");
  for (const auto& [left, right] : merges) lines.push_back(left + " " + right);
  util::atomic_write_lines(path, lines);
}

BpeModel BpeModel::load(const std::string& path) {
  auto lines = util::read_lines(path);
  if (lines.empty() || lines[0] != "#bpe-v1")
    throw std::runtime_error("bad BPE model header in " + path);
  BpeModel model;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::size_t sp = lines[i].find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 == lines[i].size())
      throw std::runtime_error("malformed BPE merge line: " + lines[i]);
    auto pair = std::make_pair(lines[i].substr(0, sp), lines[i].substr(sp + 1));
    if (!seen.insert(pair).second)
      throw std::runtime_error("duplicate BPE merge: " + lines[i]);
    model.merges.push_back(std::move(pair));
  }
  return model;
}

std::map<std::string, std::uint64_t> word_frequencies(const std::vector<Sentence>& corpus) {
  std::map<std::string, std::uint64_t> freqs;
  for (const auto& sentence : corpus)
    for (const auto& token : sentence) ++freqs[token];
  return freqs;
}

namespace {

using Symbols = std::vector<std::string>;
using SymbolPair = std::pair<std::string, std::string>;

Symbols split_word(const std::string& word) {
  if (word.find(kBpeMarker) != std::string::npos)
    throw std::invalid_argument("word contains reserved marker: " + word);
  Symbols symbols;
  for (char32_t cp : uni::decode_string(word))
    symbols.push_back(uni::encode_string(std::u32string(1, cp)));
  symbols.push_back(kBpeMarker);
  return symbols;
}

// One left-to-right non-overlapping merge pass.
Symbols merge_pass(const Symbols& symbols, const SymbolPair& pair) {
  Symbols out;
  out.reserve(symbols.size());
  std::size_t i = 0;
  while (i < symbols.size()) {
    if (i + 1 < symbols.size() && symbols[i] == pair.first && symbols[i + 1] == pair.second) {
      out.push_back(symbols[i] + symbols[i + 1]);
      i += 2;
    } else {
      out.push_back(symbols[i]);
      ++i;
    }
  }
  return out;
}

void tally_pairs(const Symbols& symbols, std::uint64_t freq, std::int64_t sign,
                 std::map<SymbolPair, std::int64_t>* counts) {
  for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
    auto key = std::make_pair(symbols[i], symbols[i + 1]);
    auto it = counts->emplace(key, 0).first;
    it->second += sign * static_cast<std::int64_t>(freq);
    if (it->second == 0) counts->erase(it);
  }
}

}  // namespace

BpeModel bpe_learn(const std::map<std::string, std::uint64_t>& word_freqs,
                   std::size_t n_merges) {
  std::vector<Symbols> words;
  std::vector<std::uint64_t> freqs;
  for (const auto& [word, freq] : word_freqs) {
    if (word.empty() || freq == 0) continue;
    words.push_back(split_word(word));
    freqs.push_back(freq);
  }

  // Adjacent-pair counts over all positions, plus which words contain each
  // pair so a merge only revisits affected words.
  std::map<SymbolPair, std::int64_t> counts;
  std::map<SymbolPair, std::set<std::size_t>> where;
  for (std::size_t w = 0; w < words.size(); ++w) {
    tally_pairs(words[w], freqs[w], 1, &counts);
    for (std::size_t i = 0; i + 1 < words[w].size(); ++i)
      where[{words[w][i], words[w][i + 1]}].insert(w);
  }

  BpeModel model;
  for (std::size_t rank = 0; rank < n_merges; ++rank) {
    SymbolPair best;
    std::int64_t best_count = 0;
    for (const auto& [pair, count] : counts) {  // ascending order: ties keep the smallest
      if (count > best_count) {
        best = pair;
        best_count = count;
      }
    }
    if (best_count < 2) break;
    model.merges.push_back(best);

    auto affected = where[best];
    for (std::size_t w : affected) {
      Symbols merged = merge_pass(words[w], best);
      tally_pairs(words[w], freqs[w], -1, &counts);
      tally_pairs(merged, freqs[w], 1, &counts);
      std::set<SymbolPair> old_pairs, new_pairs;
      for (std::size_t i = 0; i + 1 < words[w].size(); ++i)
        old_pairs.insert({words[w][i], words[w][i + 1]});
      for (std::size_t i = 0; i + 1 < merged.size(); ++i)
        new_pairs.insert({merged[i], merged[i + 1]});
      for (const auto& p : old_pairs)
        if (!new_pairs.count(p)) where[p].erase(w);
      for (const auto& p : new_pairs)
        if (!old_pairs.count(p)) where[p].insert(w);
      words[w] = std::move(merged);
    }
  }
  return model;
}

Sentence bpe_apply(const BpeModel& model, const Sentence& sentence) {
  Sentence out;
  for (const auto& token : sentence) {
    Symbols symbols = split_word(token);
    std::set<SymbolPair> present;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i)
      present.insert({symbols[i], symbols[i + 1]});
    for (const auto& merge : model.merges) {
      if (!present.count(merge)) continue;
      symbols = merge_pass(symbols, merge);
      present.clear();
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i)
        present.insert({symbols[i], symbols[i + 1]});
    }
    for (auto& s : symbols) out.push_back(std::move(s));
  }
  return out;
}

Sentence bpe_decode(const Sentence& tokens) {
  Sentence out;
  std::string buf;
  const std::string marker = kBpeMarker;
  for (const auto& t : tokens) {
    buf += t;
    std::size_t pos;
    while ((pos = buf.find(marker)) != std::string::npos) {
      if (pos > 0) out.push_back(buf.substr(0, pos));
      buf = buf.substr(pos + marker.size());
    }
  }
  if (!buf.empty()) out.push_back(buf);
  return out;
}

}  // namespace termforge::textproc
