//==============================================================================
// Copyright 2026 The nsk Authors.
//
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
//==============================================================================
#include "nsk/metrics.hpp"

#include <cctype>
#include <sstream>
//==============================================================================
namespace nsk {
//==============================================================================
namespace {

std::string normalize(std::string_view prompt) {
  std::istringstream in{std::string(prompt)};
  std::string out;
  std::string w;
  while (in >> w) {
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (w == "man" || w == "woman") w = "person";
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace
//==============================================================================
const std::array<std::array<std::string_view, 10>, 4>& evaluation_prompts() {
  // Order matches kTaskNames.
  static const std::array<std::array<std::string_view, 10>, 4> prompts = {{
      {"a painting of a person in the style of Banksy",
       "a painting of a person in the style of Vincent Van Gogh",
       "a colorful graffiti painting of a person", "a watercolor painting of a person",
       "a Greek marble sculpture of a person", "a street art mural of a person",
       "a black and white photograph of a person", "a pointillism painting of a person",
       "a Japanese woodblock print of a person", "a street art stencil of a person"},
      {"a person in the jungle", "a person in the snow", "a person on the beach",
       "a person on a cobblestone street", "a person on top of pink fabric",
       "a person on top of a wooden floor", "a person with a city in the background",
       "a person with a mountain in the background",
       "a person with a blue house in the background",
       "a person on top of a purple rug in a forest"},
      {"a person is sad", "a person is angry", "a person is surprised",
       "a person is contemptuous", "a person is dazed", "a person is excited",
       "a person is suspicious", "a person is scared", "a person is calm",
       "a person is happy"},
      {"a person is sitting in a chair", "a person is riding a horse",
       "a person is drinking coffee", "a person with a puppy", "a person is skiing",
       "a person is holding flowers", "a person is holding a camera",
       "a person is lying on the lawn", "a person leaned on the railing to look at the scenery",
       "a person is holding an oil-paper umbrella"},
  }};
  return prompts;
}
//==============================================================================
std::optional<std::string_view> task_for_prompt(std::string_view prompt) {
  const std::string key = normalize(prompt);
  const auto& groups = evaluation_prompts();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto p : groups[g]) {
      if (normalize(p) == key) return kTaskNames[g];
    }
  }
  return std::nullopt;
}
//==============================================================================
}  // namespace nsk
//==============================================================================
