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

#include <cstddef>
#include <cstdint>
#include <vector>

#include "regseg/regions.hpp"
#include "regseg/tensor.hpp"

namespace regseg {

/// Score of a (pixel, class) pair that no region covers. Never reaches a loss.
inline constexpr double kUncoveredScore = -1e30;
inline constexpr std::int32_t kNoRegion = -1;

/// Pixel-level scores S(p, c) = max over regions r containing p of S(r, c),
/// with the winning region per (p, c).
struct PixelScoreMap {
  int width = 0;
  int height = 0;
  Tensor scores;                     // P x C
  std::vector<std::int32_t> winner;  // P x C, kNoRegion where uncovered

  std::size_t pixel_count() const { return scores.dim(0); }
  std::size_t class_count() const { return scores.dim(1); }
  bool covered(std::size_t p) const { return winner[p * class_count()] != kNoRegion; }
};

/// Per-class max over covering regions; equal scores go to the lowest region id.
PixelScoreMap r2p_forward(const Tensor& region_scores, const RegionSet& regions);

/// Routes each pixel-level gradient to the region that won that (pixel, class)
/// in the forward pass and sums per region. Regions that win nothing get zero.
Tensor r2p_backward(const Tensor& pix_grad, const PixelScoreMap& pix, std::size_t region_count);

struct Prediction {
  LabelMap labels;
  /// Pixels no region covered, labeled from their nearest covered pixel.
  std::size_t fallback_pixels = 0;
};

/// argmax_c softmax_c max_{r contains p} S(r, c).
Prediction predict_endtoend(const PixelScoreMap& pix);

/// argmax_c max_{r contains p} softmax_c S(r, c): per-region softmax first.
Prediction predict_baseline(const Tensor& region_scores, const RegionSet& regions);

/// Labels every uncovered pixel with the label of the nearest covered pixel
/// (Euclidean; ties to the smaller pixel index). Returns how many were filled.
std::size_t fill_uncovered(LabelMap& labels, const std::vector<bool>& covered);

}  // namespace regseg
