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

#ifndef TERMFORGE_TYPES_HPP_
#define TERMFORGE_TYPES_HPP_

#include <string>
#include <vector>

namespace termforge {

using Token = std::string;
using Sentence = std::vector<Token>;

// Reserved symbols. Corpus tokens that collide with them are folded to <unk>
// by the language model and are not legal inside constraints.
inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kBosToken = "<s>";
inline constexpr const char* kEosToken = "</s>";
inline constexpr const char* kNullToken = "<NULL>";

}  // namespace termforge

#endif  // TERMFORGE_TYPES_HPP_
