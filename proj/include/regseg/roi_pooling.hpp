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
#include <vector>

#include "regseg/regions.hpp"
#include "regseg/tensor.hpp"

namespace regseg {

/// A region at feature-map resolution: the cells j with delta(j, r) = 1.
struct ConvRegionMask {
  int fm_width = 0;
  int fm_height = 0;
  std::vector<std::int32_t> cells;  // ascending linear feature-map indices
  BBox bbox_fm;                     // the region's box on the feature map

  bool contains(std::int32_t cell) const;
};

/// Downscales an image-resolution region by the backbone stride. A cell is in
/// the mask iff at least half of its stride x stride footprint lies in the
/// region; if no cell qualifies the single cell with the largest overlap is
/// used (ties to the lowest index), so the mask is never empty.
ConvRegionMask rasterize_mask(const RegionMask& region, int image_width, int image_height,
                              int fm_width, int fm_height);

/// Every cell of `bbox_fm`.
ConvRegionMask full_box_mask(const BBox& bbox_fm, int fm_width, int fm_height);

struct PooledSize {
  int height = 6;
  int width = 6;
  int bins() const { return height * width; }
};

inline constexpr std::int32_t kNoCell = -1;

struct RoiFeature {
  Tensor values;                    // pooled.height x pooled.width x D
  std::vector<std::int32_t> argmax;  // per (bin, channel): source cell or kNoCell
  int fm_width = 0;
  int fm_height = 0;
};

/// Max over the in-bin, in-mask cells of each pooled bin. Bins split the
/// mask's box proportionally (floor for the start, ceil for the end). Bins
/// with no in-mask cell output 0 and route no gradient.
RoiFeature freeform_roi_pool_forward(const Tensor& convmap, const ConvRegionMask& mask,
                                     PooledSize size);

/// Adds the routed gradient of one region into `grad_convmap`.
void freeform_roi_pool_backward_into(const RoiFeature& roi, const Tensor& grad_out,
                                     Tensor& grad_convmap);

Tensor freeform_roi_pool_backward(const RoiFeature& roi, const Tensor& grad_out,
                                  const std::vector<std::size_t>& convmap_shape);

/// Standard box pooling: free-form pooling with the full-box mask.
RoiFeature bbox_roi_pool(const Tensor& convmap, const BBox& bbox_fm, PooledSize size);

}  // namespace regseg
