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


#include "regseg/roi_pooling.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace regseg {

bool ConvRegionMask::contains(std::int32_t cell) const {
  return std::binary_search(cells.begin(), cells.end(), cell);
}

ConvRegionMask rasterize_mask(const RegionMask& region, int image_width, int image_height,
                              int fm_width, int fm_height) {
  if (fm_width <= 0 || fm_height <= 0 || image_width % fm_width != 0 ||
      image_height % fm_height != 0 || image_width / fm_width != image_height / fm_height) {
    throw ShapeError("rasterize_mask: feature map " + std::to_string(fm_width) + "x" +
                     std::to_string(fm_height) + " is not an integer downscaling of " +
                     std::to_string(image_width) + "x" + std::to_string(image_height));
  }
  const int stride = image_width / fm_width;
  if (region.bbox().x1 >= image_width || region.bbox().y1 >= image_height) {
    throw std::out_of_range("rasterize_mask: region lies outside the image");
  }
  ConvRegionMask mask;
  mask.fm_width = fm_width;
  mask.fm_height = fm_height;
  const BBox& b = region.bbox();
  mask.bbox_fm = {b.x0 / stride, b.y0 / stride, b.x1 / stride, b.y1 / stride};

  const int bw = mask.bbox_fm.width();
  std::vector<int> overlap(static_cast<std::size_t>(bw * mask.bbox_fm.height()), 0);
  for (PixelIndex p : region.pixels()) {
    const int cx = (p % image_width) / stride - mask.bbox_fm.x0;
    const int cy = (p / image_width) / stride - mask.bbox_fm.y0;
    ++overlap[static_cast<std::size_t>(cy * bw + cx)];
  }
  const int footprint = stride * stride;
  int best = -1;
  std::int32_t best_cell = kNoCell;
  for (int cy = 0; cy < mask.bbox_fm.height(); ++cy) {
    for (int cx = 0; cx < bw; ++cx) {
      const int n = overlap[static_cast<std::size_t>(cy * bw + cx)];
      const auto cell = static_cast<std::int32_t>((cy + mask.bbox_fm.y0) * fm_width + cx + mask.bbox_fm.x0);
      if (2 * n >= footprint) mask.cells.push_back(cell);
      if (n > best) {
        best = n;
        best_cell = cell;
      }
    }
  }
  if (mask.cells.empty()) mask.cells.push_back(best_cell);
  return mask;
}

ConvRegionMask full_box_mask(const BBox& bbox_fm, int fm_width, int fm_height) {
  if (bbox_fm.x0 < 0 || bbox_fm.y0 < 0 || bbox_fm.x1 >= fm_width || bbox_fm.y1 >= fm_height ||
      bbox_fm.x1 < bbox_fm.x0 || bbox_fm.y1 < bbox_fm.y0) {
    throw std::out_of_range("full_box_mask: box outside the feature map");
  }
  ConvRegionMask mask;
  mask.fm_width = fm_width;
  mask.fm_height = fm_height;
  mask.bbox_fm = bbox_fm;
  for (int y = bbox_fm.y0; y <= bbox_fm.y1; ++y) {
    for (int x = bbox_fm.x0; x <= bbox_fm.x1; ++x) mask.cells.push_back(y * fm_width + x);
  }
  return mask;
}

RoiFeature freeform_roi_pool_forward(const Tensor& convmap, const ConvRegionMask& mask,
                                     PooledSize size) {
  if (convmap.rank() != 3) throw ShapeError("roi pooling: convmap must be H x W x D");
  const int fh = static_cast<int>(convmap.dim(0));
  const int fw = static_cast<int>(convmap.dim(1));
  const std::size_t depth = convmap.dim(2);
  if (fh != mask.fm_height || fw != mask.fm_width) {
    throw ShapeError("roi pooling: mask was rasterized for a different feature map");
  }
  if (size.height < 1 || size.width < 1) throw std::invalid_argument("roi pooling: empty output size");
  if (mask.cells.empty()) throw std::invalid_argument("roi pooling: empty mask");

  const BBox& box = mask.bbox_fm;
  const int bh = box.height();
  const int bw = box.width();
  std::vector<char> inside(static_cast<std::size_t>(bh * bw), 0);
  for (std::int32_t c : mask.cells) {
    const int x = c % fw - box.x0;
    const int y = c / fw - box.y0;
    if (x < 0 || y < 0 || x >= bw || y >= bh) {
      throw std::invalid_argument("roi pooling: mask cell outside its box");
    }
    inside[static_cast<std::size_t>(y * bw + x)] = 1;
  }

  RoiFeature roi;
  roi.fm_width = fw;
  roi.fm_height = fh;
  roi.values = Tensor({static_cast<std::size_t>(size.height), static_cast<std::size_t>(size.width), depth});
  roi.argmax.assign(roi.values.size(), kNoCell);
  const double* fm = convmap.raw();
  for (int i = 0; i < size.height; ++i) {
    const int y_start = (i * bh) / size.height;
    const int y_end = ((i + 1) * bh + size.height - 1) / size.height;
    for (int j = 0; j < size.width; ++j) {
      const int x_start = (j * bw) / size.width;
      const int x_end = ((j + 1) * bw + size.width - 1) / size.width;
      const std::size_t out_off = static_cast<std::size_t>(i * size.width + j) * depth;
      double* out = roi.values.raw() + out_off;
      std::int32_t* arg = roi.argmax.data() + out_off;
      for (int y = y_start; y < y_end; ++y) {
        for (int x = x_start; x < x_end; ++x) {
          if (!inside[static_cast<std::size_t>(y * bw + x)]) continue;
          const auto cell = static_cast<std::int32_t>((y + box.y0) * fw + x + box.x0);
          const double* v = fm + static_cast<std::size_t>(cell) * depth;
          for (std::size_t d = 0; d < depth; ++d) {
            // Row-major scan with strict '>' keeps the lowest index on ties.
            if (arg[d] == kNoCell || v[d] > out[d]) {
              out[d] = v[d];
              arg[d] = cell;
            }
          }
        }
      }
    }
  }
  return roi;
}

void freeform_roi_pool_backward_into(const RoiFeature& roi, const Tensor& grad_out,
                                     Tensor& grad_convmap) {
  if (!grad_out.same_shape(roi.values)) {
    throw ShapeError("roi pooling backward: grad " + grad_out.shape_string() +
                     " does not match pooled output " + roi.values.shape_string());
  }
  if (grad_convmap.rank() != 3 || static_cast<int>(grad_convmap.dim(0)) != roi.fm_height ||
      static_cast<int>(grad_convmap.dim(1)) != roi.fm_width ||
      grad_convmap.dim(2) != roi.values.dim(2)) {
    throw ShapeError("roi pooling backward: convmap shape " + grad_convmap.shape_string() +
                     " does not match the forward pass");
  }
  const std::size_t depth = roi.values.dim(2);
  for (std::size_t k = 0; k < roi.argmax.size(); ++k) {
    const std::int32_t cell = roi.argmax[k];
    if (cell == kNoCell) continue;
    grad_convmap[static_cast<std::size_t>(cell) * depth + k % depth] += grad_out[k];
  }
}

Tensor freeform_roi_pool_backward(const RoiFeature& roi, const Tensor& grad_out,
                                  const std::vector<std::size_t>& convmap_shape) {
  Tensor grad(convmap_shape);
  freeform_roi_pool_backward_into(roi, grad_out, grad);
  return grad;
}

RoiFeature bbox_roi_pool(const Tensor& convmap, const BBox& bbox_fm, PooledSize size) {
  if (convmap.rank() != 3) throw ShapeError("roi pooling: convmap must be H x W x D");
  return freeform_roi_pool_forward(
      convmap,
      full_box_mask(bbox_fm, static_cast<int>(convmap.dim(1)), static_cast<int>(convmap.dim(0))),
      size);
}

}  // namespace regseg
