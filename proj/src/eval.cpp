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

#include "termforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "termforge/util.hpp"

namespace termforge::eval {

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

bool is_split_punct(unsigned char c) {
  // {-~  [-`  space-&  (-+  :-@  /
  return (c >= '{' && c <= '~') || (c >= '[' && c <= '`') || (c >= ' ' && c <= '&') ||
         (c >= '(' && c <= '+') || (c >= ':' && c <= '@') || c == '/';
}

bool is_ascii_digit_byte(unsigned char c) { return c >= '0' && c <= '9'; }

bool is_period_comma(unsigned char c) { return c == '.' || c == ','; }

}  // namespace

Sentence tokenize_13a(const std::string& line) {
  std::string s = line;
  replace_all(s, "<skipped>", "");
  replace_all(s, "-\n", "");
  replace_all(s, "\n", " ");
  if (s.find('&') != std::string::npos) {
    replace_all(s, "&quot;", "\"");
    replace_all(s, "&amp;", "&");
    replace_all(s, "&lt;", "<");
    replace_all(s, "&gt;", ">");
  }
  s = " " + s + " ";

  // Pass 1: wrap splittable punctuation in spaces.
  std::string t;
  t.reserve(s.size() * 2);
  for (unsigned char c : s) {
    if (c != ' ' && is_split_punct(c)) {
      t += ' ';
      t += static_cast<char>(c);
      t += ' ';
    } else {
      t += static_cast<char>(c);
    }
  }

  // Pass 2: ([^0-9])([.,]) -> "\1 \2 ", non-overlapping left to right.
  std::string u;
  u.reserve(t.size() * 2);
  for (std::size_t i = 0; i < t.size();) {
    if (i + 1 < t.size() && !is_ascii_digit_byte(static_cast<unsigned char>(t[i])) &&
        is_period_comma(static_cast<unsigned char>(t[i + 1]))) {
      u += t[i];
      u += ' ';
      u += t[i + 1];
      u += ' ';
      i += 2;
    } else {
      u += t[i];
      ++i;
    }
  }

  // Pass 3: ([.,])([^0-9]) -> " \1 \2".
  std::string v;
  v.reserve(u.size() * 2);
  for (std::size_t i = 0; i < u.size();) {
    if (i + 1 < u.size() && is_period_comma(static_cast<unsigned char>(u[i])) &&
        !is_ascii_digit_byte(static_cast<unsigned char>(u[i + 1]))) {
      v += ' ';
      v += u[i];
      v += ' ';
      v += u[i + 1];
      i += 2;
    } else {
      v += u[i];
      ++i;
    }
  }

  // Pass 4: ([0-9])(-) -> "\1 - ".
  std::string w;
  w.reserve(v.size() * 2);
  for (std::size_t i = 0; i < v.size();) {
    if (i + 1 < v.size() && is_ascii_digit_byte(static_cast<unsigned char>(v[i])) &&
        v[i + 1] == '-') {
      w += v[i];
      w += " - ";
      i += 2;
    } else {
      w += v[i];
      ++i;
    }
  }

  Sentence out;
  std::string cur;
  for (unsigned char c : w) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur += static_cast<char>(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

BleuScore bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
               Tokenization tok) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("hypothesis/reference line counts differ");
  if (hyps.empty()) throw std::invalid_argument("empty corpus");

  auto split = [&](const std::string& line) {
    return tok == Tokenization::k13a ? tokenize_13a(line) : util::split_tokens(line);
  };

  std::array<std::uint64_t, 4> clipped{};
  std::array<std::uint64_t, 4> totals{};
  BleuScore result;

  for (std::size_t i = 0; i < hyps.size(); ++i) {
    Sentence hyp = split(hyps[i]);
    Sentence ref = split(refs[i]);
    result.hyp_len += hyp.size();
    result.ref_len += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      if (hyp.size() + 1 <= n) continue;
      std::map<std::vector<Token>, std::uint64_t> hyp_counts;
      for (std::size_t j = 0; j + n <= hyp.size(); ++j)
        ++hyp_counts[std::vector<Token>(hyp.begin() + static_cast<long>(j),
                                        hyp.begin() + static_cast<long>(j + n))];
      std::map<std::vector<Token>, std::uint64_t> ref_counts;
      for (std::size_t j = 0; j + n <= ref.size(); ++j)
        ++ref_counts[std::vector<Token>(ref.begin() + static_cast<long>(j),
                                        ref.begin() + static_cast<long>(j + n))];
      totals[n - 1] += hyp.size() - n + 1;
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) clipped[n - 1] += std::min(count, it->second);
      }
    }
  }

  bool any_zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    result.precisions[n] =
        totals[n] == 0 ? 0.0
                       : 100.0 * static_cast<double>(clipped[n]) / static_cast<double>(totals[n]);
    if (clipped[n] == 0) any_zero = true;
  }

  if (result.hyp_len == 0) {
    result.brevity_penalty = 0.0;
  } else if (result.hyp_len >= result.ref_len) {
    result.brevity_penalty = 1.0;
  } else {
    result.brevity_penalty = std::exp(1.0 - static_cast<double>(result.ref_len) /
                                                static_cast<double>(result.hyp_len));
  }

  if (any_zero || result.brevity_penalty == 0.0) {
    result.score = 0.0;
  } else {
    // Geometric mean over fractions: an identity corpus hits exp(0) == 1 and
    // scores 100.0 exactly.
    double log_sum = 0.0;
    for (std::size_t n = 0; n < 4; ++n)
      log_sum += std::log(static_cast<double>(clipped[n]) / static_cast<double>(totals[n]));
    result.score = 100.0 * result.brevity_penalty * std::exp(log_sum / 4.0);
  }
  return result;
}

std::string format_bleu(const BleuScore& s) {
  double ratio = s.ref_len == 0 ? 0.0
                                : static_cast<double>(s.hyp_len) / static_cast<double>(s.ref_len);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "BLEU = %.2f (%.1f/%.1f/%.1f/%.1f, BP=%.3f, ratio=%.3f)",
                s.score, s.precisions[0], s.precisions[1], s.precisions[2], s.precisions[3],
                s.brevity_penalty, ratio);
  return buf;
}

bool contains_phrase(const Sentence& tokens, const Sentence& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  auto it = std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end());
  return it != tokens.end();
}

TermRecall term_recall(const std::vector<Sentence>& hyps,
                       const std::vector<std::vector<constraints::Constraint>>& applied) {
  if (hyps.size() != applied.size())
    throw std::invalid_argument("hypothesis/constraint line counts differ");
  TermRecall out;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    for (const constraints::Constraint& c : applied[i]) {
      std::string key = util::join_tokens(c.source) + "\t" + util::join_tokens(c.target);
      auto& [sat, app] = out.per_constraint[key];
      ++app;
      ++out.applied;
      if (contains_phrase(hyps[i], c.target)) {
        ++sat;
        ++out.satisfied;
      }
    }
  }
  if (out.applied == 0) {
    out.vacuous = true;
    out.recall = 1.0;
  } else {
    out.recall = static_cast<double>(out.satisfied) / static_cast<double>(out.applied);
  }
  return out;
}

}  // namespace termforge::eval
