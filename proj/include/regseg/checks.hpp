// Copyright 2026 The regseg Authors. All Rights Reserved.
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


#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "regseg/gradcheck.hpp"
#include "regseg/model.hpp"

namespace regseg {

struct CheckResult {
  std::string label;
  GradcheckReport report;
  double tolerance = 0.0;
  bool passed() const { return report.checked > 0 && report.max_rel_error < tolerance; }
};

inline constexpr double kLayerTolerance = 1e-6;
inline constexpr double kModelTolerance = 1e-4;

/// Finite-difference checks of every layer's backward on random tie-free inputs.
std::vector<CheckResult> layer_gradchecks(std::uint64_t seed);

/// Whole-model check of one configuration on a 16 x 16 synthetic image with
/// overlapping grid regions plus ground-truth regions. `per_param`
/// coordinates are sampled from every parameter. `grad_scale` multiplies the
/// analytic gradient (1 for a real check; anything else is a negative control).
CheckResult model_gradcheck(const ModelConfig& config, std::uint64_t seed, std::size_t per_param = 12,
                            double grad_scale = 1.0);

/// The model configurations covered by the full battery: every fusion mode
/// under both loss modes, the softmax-then-max variant and the baseline.
std::vector<ModelConfig> gradcheck_configs();

std::string config_label(const ModelConfig& config);

}  // namespace regseg
