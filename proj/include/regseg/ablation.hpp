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

#include <iosfwd>
#include <string>
#include <vector>

#include "regseg/model.hpp"
#include "regseg/trainer.hpp"

namespace regseg {

enum class Ablation { kEndToEndVsBaseline, kSoftmaxOrder, kRegionShape, kPoolingMode, kLossMode };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& text);

struct Arm {
  std::string name;
  ModelConfig model;
  RegionConfig regions;
};

/// Configurations that differ from `model` / `regions` only along the ablated axis.
std::vector<Arm> ablation_arms(Ablation which, const ModelConfig& model, const RegionConfig& regions);

struct ArmResult {
  Arm arm;
  MetricsReport metrics;  // test split, after the last epoch
  std::vector<EpochRecord> log;
};

/// Trains and evaluates every arm with the same data, seed and schedule.
/// `progress` receives one line per finished arm.
std::vector<ArmResult> run_arms(const std::vector<Arm>& arms, const TrainConfig& train_config, const Dataset& dataset,
                                std::ostream* progress = nullptr);

/// Rows of arm metrics with differences to the first row, in points.
std::string format_ablation(const std::vector<ArmResult>& results);

}  // namespace regseg
