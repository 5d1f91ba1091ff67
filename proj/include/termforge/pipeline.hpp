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

#ifndef TERMFORGE_PIPELINE_HPP_
#define TERMFORGE_PIPELINE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "termforge/types.hpp"

namespace termforge::pipeline {

// One JSON document: global keys (seed, manifest_dir, optional stages list)
// plus one object per configured stage. Duplicate and unknown keys are
// rejected; numeric parameters are range-checked and defaulted up front, so a
// bad threshold fails before any stage does work.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string manifest_dir;
  std::vector<std::string> stages;  // optional run order for run_all
  nlohmann::json doc;               // defaulted per-stage parameter blocks
};

const std::vector<std::string>& known_stages();

PipelineConfig validate_config(const std::string& path);

// Per-stage deterministic seed: fnv1a(stage name) xor the global seed.
std::uint64_t stage_seed(const PipelineConfig& config, const std::string& stage);

// The stage's defaulted parameter block; throws when the stage is not
// configured. `overrides` entries are "key=json_value" pairs applied and
// re-validated before returning.
nlohmann::json stage_parameters(const PipelineConfig& config, const std::string& stage,
                                const std::vector<std::string>& overrides = {});

// Validates input paths, dispatches to the owning module, writes outputs
// atomically, and drops a manifest (input/output fingerprints, parameters,
// seed) into manifest_dir. On failure every output created by this run is
// removed before the error propagates.
void run_stage(const std::string& stage, const PipelineConfig& config,
               const std::vector<std::string>& overrides = {});

// Runs config.stages in order.
void run_all(const PipelineConfig& config);

}  // namespace termforge::pipeline

#endif  // TERMFORGE_PIPELINE_HPP_
