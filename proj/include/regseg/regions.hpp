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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "regseg/tensor.hpp"

namespace regseg {

using PixelIndex = std::int32_t;

/// Label value for unlabeled pixels; excluded from every loss and metric.
inline constexpr int kVoid = 255;
inline constexpr int kNoHint = -1;

/// Per-pixel class ids (or kVoid), row-major.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height, int fill = 0);
  LabelMap(int width, int height, std::vector<int> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }

  int operator[](std::size_t p) const { return labels_[p]; }
  int& operator[](std::size_t p) { return labels_[p]; }
  int at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  int& at(int x, int y) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const int> labels() const { return labels_; }

  bool is_void(std::size_t p) const { return labels_[p] == kVoid; }
  std::size_t labeled_count() const;
  /// Pixel count per class id in [0, num_classes); VOID is not counted.
  std::vector<std::size_t> class_counts(int num_classes) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<int> labels_;
};

/// Inclusive pixel bounds.
struct BBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// A free-form region: sorted, distinct linear pixel indices and their tight box.
class RegionMask {
 public:
  RegionMask(std::vector<PixelIndex> pixels, int image_width, int image_height);
  static RegionMask rectangle(const BBox& box, int image_width, int image_height);

  std::span<const PixelIndex> pixels() const { return pixels_; }
  const BBox& bbox() const { return bbox_; }
  std::size_t size() const { return pixels_.size(); }
  bool contains(PixelIndex p) const;

  friend bool operator==(const RegionMask&, const RegionMask&) = default;

 private:
  std::vector<PixelIndex> pixels_;
  BBox bbox_;
};

enum class RegionSource {
  kProposalsA,
  kProposalsB,
  kProposalsC,
  kOversegmentation,
  kGroundTruth,
  kMixed,
};

std::string to_string(RegionSource source);
RegionSource parse_region_source(const std::string& text);

struct RegionSet {
  int width = 0;
  int height = 0;
  RegionSource source = RegionSource::kMixed;
  std::vector<RegionMask> regions;
  /// Parallel to `regions`: class id for ground-truth regions, kNoHint otherwise.
  std::vector<int> hints;

  std::size_t size() const { return regions.size(); }
  bool empty() const { return regions.empty(); }
  void add(RegionMask region, int hint = kNoHint);
};

/// Concatenation of `a` and `b` (ids of `b` follow those of `a`).
RegionSet merge(const RegionSet& a, const RegionSet& b);

/// Throws std::logic_error describing the first violated invariant: mask
/// validity, and for oversegmentation / ground-truth sources disjointness.
void check_region_set(const RegionSet& set);

/// For each pixel, the ascending ids of the regions containing it (CSR layout).
class CoverageIndex {
 public:
  explicit CoverageIndex(const RegionSet& set);
  std::span<const std::int32_t> covering(std::size_t pixel) const {
    return {ids_.data() + offsets_[pixel], ids_.data() + offsets_[pixel + 1]};
  }
  std::size_t pixel_count() const { return offsets_.size() - 1; }
  std::size_t uncovered_count() const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::int32_t> ids_;
};

// --- proposals --------------------------------------------------------------

/// Square windows of each scale stepped by round(scale * stride_fraction),
/// starting at `offset_fraction` of a step. The first and last in-image
/// positions are always included, so every scale covers the whole image.
RegionSet grid_proposals(int width, int height, const std::vector<int>& scales,
                         double stride_fraction, double offset_fraction = 0.0,
                         RegionSource source = RegionSource::kProposalsA);

struct ProposalConfig {
  std::vector<int> scales{8, 16, 32};
  double stride_fraction = 0.5;
};

/// The three rotating proposal sets (A, B, C): grid variants offset by 0,
/// 1/3 and 2/3 of a step.
std::vector<RegionSet> rotating_proposal_sets(int width, int height,
                                              const ProposalConfig& config);

/// Greedy agglomeration of 4-connected pixels: edges are visited in order of
/// increasing color difference and two segments merge while their mean colors
/// are closer than `merge_threshold`. Segments smaller than `min_size` are
/// then absorbed along the same edge order. Result is a disjoint cover.
RegionSet oversegment(const Tensor& image, double merge_threshold, int min_size = 16);

/// One region per 4-connected component of each class, VOID excluded.
RegionSet ground_truth_regions(const LabelMap& gt);

struct RegionLabel {
  int label = kNoHint;  // kNoHint when the region is entirely VOID
  double overlap = 0.0;
  bool labeled() const { return label != kNoHint; }
};

/// Majority non-VOID class inside the region (ties to the lower id) and its
/// fraction of the region's area.
RegionLabel region_label_and_overlap(const RegionMask& region, const LabelMap& gt);

// --- loss partition ---------------------------------------------------------

struct LossCell {
  std::vector<PixelIndex> pixels;
  int label = 0;
  /// Ascending ids of the regions covering every pixel of the cell.
  std::vector<std::int32_t> covering;
  std::size_t count() const { return pixels.size(); }
};

/// Non-overlapping single-class cells: pixels grouped by (ground-truth class,
/// set of covering regions). Within a cell the winning region of every class
/// is therefore the same for all pixels.
struct LossPartition {
  int width = 0;
  int height = 0;
  std::size_t region_count = 0;
  std::vector<LossCell> cells;
};

LossPartition build_loss_partition(const RegionSet& regions, const LabelMap& gt);

// --- text format ------------------------------------------------------------

void write_regions(std::ostream& out, const RegionSet& set);
RegionSet read_regions(std::istream& in);

}  // namespace regseg
