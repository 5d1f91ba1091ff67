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

#ifndef TERMFORGE_UNICODE_HPP_
#define TERMFORGE_UNICODE_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace termforge::uni {

struct Utf8Error : std::runtime_error {
  explicit Utf8Error(std::size_t byte_offset);
  std::size_t offset;
};

// Decodes the code point starting at byte offset i and advances i past it.
// Throws Utf8Error on malformed sequences (stray continuation bytes, overlong
// encodings, surrogates, values beyond U+10FFFF, truncated input).
char32_t decode(const std::string& s, std::size_t& i);

void append_utf8(std::string& out, char32_t cp);

std::u32string decode_string(const std::string& s);
std::string encode_string(const std::u32string& s);

bool is_space(char32_t cp);
bool is_ascii_digit(char32_t cp);
bool is_ascii_punct(char32_t cp);

// Case handling covers ASCII, Latin-1 Supplement and Latin Extended-A, which
// is what the normalizer can emit. Other code points map to themselves.
bool is_upper(char32_t cp);
bool is_lower(char32_t cp);
char32_t to_lower(char32_t cp);
char32_t to_upper(char32_t cp);

std::string lowercase(const std::string& s);

}  // namespace termforge::uni

#endif  // TERMFORGE_UNICODE_HPP_
