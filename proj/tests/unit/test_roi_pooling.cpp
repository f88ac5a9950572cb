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


#include <doctest.h>

#include "oracles.hpp"
#include "regseg/roi_pooling.hpp"

using namespace regseg;

namespace {

ConvRegionMask random_mask(int fw, int fh, Rng& rng) {
  const RegionMask r = oracle::random_region(fw * 2, fh * 2, rng);
  return rasterize_mask(r, fw * 2, fh * 2, fw, fh);
}

}  // namespace

TEST_CASE("free-form pooling equals the per-bin max over the mask") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int fw = rng.uniform_int(1, 9), fh = rng.uniform_int(1, 9);
    const Tensor fm = oracle::random_tensor({std::size_t(fh), std::size_t(fw), 3}, rng);
    const ConvRegionMask mask = random_mask(fw, fh, rng);
    const PooledSize size{rng.uniform_int(1, 6), rng.uniform_int(1, 6)};
    const RoiFeature got = freeform_roi_pool_forward(fm, mask, size);
    const oracle::Pooled want = oracle::roi_pool(fm, mask, size);
    for (std::size_t i = 0; i < want.values.size(); ++i) {
      CHECK(got.values[i] == want.values[i]);
      CHECK(got.argmax[i] == want.argmax[i]);
    }
  }
}

TEST_CASE("empty bins output zero and route nothing") {
  // Two cells at opposite corners of a 4x4 box pooled to 4x4: most bins are empty.
  ConvRegionMask mask;
  mask.fm_width = 4;
  mask.fm_height = 4;
  mask.cells = {0, 15};
  mask.bbox_fm = {0, 0, 3, 3};
  const Tensor fm({4, 4, 1}, 7.0);
  const RoiFeature roi = freeform_roi_pool_forward(fm, mask, {4, 4});
  CHECK(roi.values[0] == 7.0);
  CHECK(roi.values[15] == 7.0);
  CHECK(roi.values[5] == 0.0);
  CHECK(roi.argmax[5] == kNoCell);
  const Tensor g = freeform_roi_pool_backward(roi, Tensor({4, 4, 1}, 1.0), fm.shape());
  CHECK(g[0] == 1.0);
  CHECK(g[15] == 1.0);
  CHECK(g[5] == 0.0);
}

TEST_CASE("bbox pooling is free-form pooling on the full box") {
  Rng rng(4);
  const Tensor fm = oracle::random_tensor({6, 5, 2}, rng);
  const BBox box{1, 2, 4, 5};
  const RoiFeature a = bbox_roi_pool(fm, box, {3, 2});
  const RoiFeature b = freeform_roi_pool_forward(fm, full_box_mask(box, 5, 6), {3, 2});
  CHECK(a.values == b.values);
  CHECK(a.argmax == b.argmax);
}

TEST_CASE("rasterized masks keep cells at least half inside the region") {
  // Region: the left column of a 4x4 image. Each 2x2 cell is half covered.
  const RegionMask col({0, 4, 8, 12}, 4, 4);
  const ConvRegionMask m = rasterize_mask(col, 4, 4, 2, 2);
  CHECK(m.cells == std::vector<std::int32_t>{0, 2});
  // A single pixel keeps the one cell it touches.
  const ConvRegionMask one = rasterize_mask(RegionMask({15}, 4, 4), 4, 4, 2, 2);
  CHECK(one.cells == std::vector<std::int32_t>{3});
  CHECK_THROWS_AS(rasterize_mask(col, 4, 4, 3, 3), ShapeError);
}

TEST_CASE("pooling ignores cells outside the mask") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor fm = oracle::random_tensor({7, 7, 2}, rng);
    const ConvRegionMask mask = random_mask(7, 7, rng);
    const RoiFeature before = freeform_roi_pool_forward(fm, mask, {3, 3});
    for (std::size_t c = 0; c < 49; ++c) {
      if (mask.contains(std::int32_t(c))) continue;
      fm[c * 2] = 1e6;
      fm[c * 2 + 1] = -1e6;
    }
    const RoiFeature after = freeform_roi_pool_forward(fm, mask, {3, 3});
    CHECK(before.values == after.values);
    CHECK(before.argmax == after.argmax);
  }
}

TEST_CASE("backward conserves gradient mass") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor fm = oracle::random_tensor({6, 8, 3}, rng);
    const ConvRegionMask mask = random_mask(8, 6, rng);
    const RoiFeature roi = freeform_roi_pool_forward(fm, mask, {4, 4});
    const Tensor g = oracle::random_tensor({4, 4, 3}, rng);
    const Tensor gin = freeform_roi_pool_backward(roi, g, fm.shape());
    double routed = 0.0, total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (roi.argmax[i] != kNoCell) routed += g[i];
    }
    for (std::size_t i = 0; i < gin.size(); ++i) {
      total += gin[i];
      if (gin[i] != 0.0) CHECK(mask.contains(std::int32_t(i / 3)));
    }
    CHECK(total == doctest::Approx(routed).epsilon(1e-12));
  }
}
