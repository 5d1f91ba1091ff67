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

#include "termforge/unicode.hpp"

namespace termforge::uni {

Utf8Error::Utf8Error(std::size_t byte_offset)
    : std::runtime_error("invalid UTF-8 at byte offset " + std::to_string(byte_offset)),
      offset(byte_offset) {}

char32_t decode(const std::string& s, std::size_t& i) {
  const std::size_t start = i;
  const auto byte = [&](std::size_t k) -> unsigned { return static_cast<unsigned char>(s[k]); };
  if (i >= s.size()) throw Utf8Error(start);
  unsigned b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len;
  char32_t cp;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    throw Utf8Error(start);
  }
  if (i + len > s.size()) throw Utf8Error(start);
  for (int k = 1; k < len; ++k) {
    unsigned b = byte(i + k);
    if ((b & 0xC0) != 0x80) throw Utf8Error(start);
    cp = (cp << 6) | (b & 0x3F);
  }
  static const char32_t min_for_len[5] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < min_for_len[len]) throw Utf8Error(start);           // overlong
  if (cp >= 0xD800 && cp <= 0xDFFF) throw Utf8Error(start);    // surrogate
  if (cp > 0x10FFFF) throw Utf8Error(start);
  i += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::u32string decode_string(const std::string& s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) out.push_back(decode(s, i));
  return out;
}

std::string encode_string(const std::u32string& s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append_utf8(out, cp);
  return out;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

bool is_ascii_punct(char32_t cp) {
  return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
         (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
}

namespace {

// Latin Extended-A pairs upper/lower alternately; three stretches plus a few
// singletons break the pattern.
bool exta_upper(char32_t cp) {
  if (cp >= 0x100 && cp <= 0x137) return (cp & 1) == 0;
  if (cp >= 0x139 && cp <= 0x148) return (cp & 1) == 1;
  if (cp >= 0x14A && cp <= 0x177) return (cp & 1) == 0;
  if (cp == 0x178 || cp == 0x179 || cp == 0x17B || cp == 0x17D) return true;
  return false;
}

bool exta_lower(char32_t cp) {
  if (cp >= 0x100 && cp <= 0x137) return (cp & 1) == 1;
  if (cp >= 0x139 && cp <= 0x148) return (cp & 1) == 0;
  if (cp >= 0x14A && cp <= 0x177) return (cp & 1) == 1;
  if (cp == 0x17A || cp == 0x17C || cp == 0x17E || cp == 0x17F || cp == 0x138 || cp == 0x149)
    return true;
  return false;
}

}  // namespace

bool is_upper(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return true;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return true;
  return exta_upper(cp);
}

bool is_lower(char32_t cp) {
  if (cp >= U'a' && cp <= U'z') return true;
  if (cp >= 0xDF && cp <= 0xFF && cp != 0xF7) return true;
  return exta_lower(cp);
}

char32_t to_lower(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp == 0x178) return 0xFF;  // Y with diaeresis
  if (cp == 0x130) return U'i';  // dotted capital I
  if (exta_upper(cp)) {
    if (cp >= 0x179 && cp <= 0x17D) return cp + 1;
    return cp + 1;
  }
  return cp;
}

char32_t to_upper(char32_t cp) {
  if (cp >= U'a' && cp <= U'z') return cp - 0x20;
  if (cp >= 0xE0 && cp <= 0xFE && cp != 0xF7) return cp - 0x20;
  if (cp == 0xFF) return 0x178;
  if (cp == 0x131) return U'I';  // dotless small i
  if (cp == 0xDF || cp == 0x138 || cp == 0x149 || cp == 0x17F) return cp;  // no 1:1 uppercase
  if (exta_lower(cp)) return cp - 1;
  return cp;
}

std::string lowercase(const std::string& s) {
  std::u32string cps = decode_string(s);
  for (char32_t& cp : cps) cp = to_lower(cp);
  return encode_string(cps);
}

}  // namespace termforge::uni
