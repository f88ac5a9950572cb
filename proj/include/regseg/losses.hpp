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

#include <string>
#include <vector>

#include "regseg/region_to_pixel.hpp"
#include "regseg/regions.hpp"
#include "regseg/tensor.hpp"

namespace regseg {

enum class LossMode { kBalanced, kUnbalanced };

std::string to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& text);

/// Per-class pixel weights for one training image.
struct ClassWeights {
  LossMode mode = LossMode::kUnbalanced;
  std::vector<double> w;
  double z = 1.0;  // renormalization factor (balanced mode)
};

/// Inverse-frequency weights renormalized so that sum_c w[c] * P_c = 1:
/// w[c] = 1 / (Z * P_c) with Z the number of classes present. Absent classes
/// get weight 0.
ClassWeights balanced_weights(const LabelMap& gt, int num_classes);

/// w[c] = 1 / P for every class, P the number of labeled pixels.
ClassWeights unbalanced_weights(const LabelMap& gt, int num_classes);

ClassWeights class_weights(LossMode mode, const LabelMap& gt, int num_classes);

struct LossResult {
  double value = 0.0;
  Tensor grad;  // P x C for pixel losses, R x C for region-level ones
};

/// Weighted pixel log-loss L = -sum_p w[y_p] log softmax_{y_p}(S_p) with
/// its gradient with respect to the pixel scores. VOID pixels are skipped; a
/// labeled pixel with no covering region is an error.
LossResult pixel_loss(const PixelScoreMap& pix, const LabelMap& gt, const ClassWeights& w);

/// The same loss composed with the region-to-pixel layer, evaluated pixel by
/// pixel; the gradient is with respect to the region scores.
LossResult pixel_loss_naive(const Tensor& region_scores, const RegionSet& regions,
                            const LabelMap& gt, const ClassWeights& w);

/// The same loss evaluated once per partition cell and scaled by the cell's
/// pixel count. Value and region gradient equal the per-pixel path.
LossResult pixel_loss_partitioned(const Tensor& region_scores, const RegionSet& regions,
                                  const LossPartition& partition, const ClassWeights& w);

/// Loss for the softmax-before-max variant: each pixel's probability for its
/// label is the max over covering regions of the per-region softmax, and the
/// loss is -sum_p w[y_p] log of it. Gradient with respect to region scores.
LossResult softmax_then_max_loss(const Tensor& region_scores, const RegionSet& regions,
                                 const LossPartition& partition, const ClassWeights& w);

inline constexpr int kIgnore = -1;

/// Mean over labeled regions of -log softmax at the region's label.
LossResult region_loss(const Tensor& region_scores, const std::vector<int>& region_labels);

struct OverlapPolicy {
  double pos_overlap = 0.5;
  double neg_overlap = 0.0;
  /// Label given to regions whose majority overlap is below neg_overlap;
  /// kIgnore disables negatives.
  int background_class = kIgnore;
};

/// Majority class when its overlap reaches pos_overlap; background when below
/// neg_overlap (if a background class is configured); kIgnore otherwise.
std::vector<int> assign_region_labels(const RegionSet& regions, const LabelMap& gt,
                                      const OverlapPolicy& policy);

}  // namespace regseg
