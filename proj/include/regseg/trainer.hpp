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
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "regseg/metrics.hpp"
#include "regseg/model.hpp"
#include "regseg/regions.hpp"
#include "regseg/synth.hpp"

namespace regseg {

/// Where an image's regions come from.
enum class RegionPlan {
  kMultiScale,        // grid windows at several scales plus several segmentation levels
  kOversegmentation,  // one disjoint oversegmentation per image
};

std::string to_string(RegionPlan plan);
RegionPlan parse_region_plan(const std::string& text);

struct RegionConfig {
  RegionPlan plan = RegionPlan::kMultiScale;
  ProposalConfig proposals;
  double overseg_threshold = 0.12;           // the single level of kOversegmentation
  std::vector<double> overseg_levels{0.06, 0.12, 0.25};  // added to every multi-scale set
  int overseg_min_size = 16;
};

/// The proposal sets rotated through during training (before ground-truth
/// injection).
std::vector<RegionSet> training_region_sets(const RegionConfig& config, const Scene& scene);
/// Regions used at test time: the union of the training sets, duplicates removed.
RegionSet test_regions(const RegionConfig& config, const Scene& scene);

struct TrainConfig {
  // Tuned for the small backbone: 1e-2 makes tied fusion oscillate, 3e-3 is stable for every fusion.
  double lr_phase1 = 3e-3;
  int epochs_phase1 = 20;
  double lr_phase2 = 3e-4;
  int epochs_phase2 = 10;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  int images_per_batch = 1;
  bool shuffle = true;
  /// Evaluate the test split after every epoch (otherwise only after the last).
  bool validate_every_epoch = true;
  OverlapPolicy overlap;  // baseline region labels

  void validate() const;
};

std::string config_text(const TrainConfig& config);
std::string config_text(const RegionConfig& config);

/// buf <- momentum * buf - lr * (grad + weight_decay * value); value <- value + buf;
/// grads are zeroed. A non-finite gradient aborts before any parameter moves.
void sgd_step(std::vector<Param>& params, double lr, double momentum, double weight_decay = 0.0);

struct Batch {
  std::size_t image = 0;
  std::size_t proposal_set = 0;
  RegionSet regions;  // the chosen proposal set plus the ground-truth regions
};

/// Round-robin choice of proposal set by batch counter, unioned with the
/// image's ground-truth regions.
Batch assemble_batch(const Scene& scene, std::size_t image_index, std::size_t batch_counter,
                     const std::vector<RegionSet>& proposal_sets);

/// Image visiting order for one epoch: a seeded shuffle of `indices`.
std::vector<std::size_t> epoch_order(const std::vector<std::size_t>& indices, std::uint64_t seed, int epoch,
                                     bool shuffle);

struct EvalResult {
  ConfusionMatrix cm{2};
  std::optional<ConfusionMatrix> band_cm;
  std::size_t fallback_pixels = 0;
  MetricsReport report;
};

/// Predicts every image in `indices` and pools the confusion matrices. With
/// a band, also pools the confusion matrix of the boundary band.
EvalResult evaluate(const Model& model, const Dataset& dataset, const std::vector<std::size_t>& indices,
                    const RegionConfig& regions, std::optional<double> band = std::nullopt);

struct EpochRecord {
  int epoch = 0;
  int phase = 1;
  double lr = 0.0;
  double loss = 0.0;
  std::optional<MetricsReport> metrics;
};

/// `epoch=E phase=P lr=L loss=X global_acc=G class_acc=A miou=M`; metrics
/// print as `-` on epochs without validation.
std::string format_record(const EpochRecord& record);

struct TrainResult {
  Model model;
  std::vector<EpochRecord> log;
};

/// Thrown when the loss or a gradient stops being finite. Carries the state
/// at the end of the last finished epoch.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, Model last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const Model& last_good() const { return last_good_; }

 private:
  Model last_good_;
};

/// Phase-1 epochs then phase-2 epochs of SGD with momentum, one image per
/// step. Each finished record is also written to `log` when given.
TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const RegionConfig& region_config, const Dataset& dataset, std::ostream* log = nullptr);

}  // namespace regseg
