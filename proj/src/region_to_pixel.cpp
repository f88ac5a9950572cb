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


#include "regseg/region_to_pixel.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "regseg/layers.hpp"

namespace regseg {

PixelScoreMap r2p_forward(const Tensor& region_scores, const RegionSet& regions) {
  if (region_scores.rank() != 2 || region_scores.dim(0) != regions.size()) {
    throw ShapeError("r2p_forward: scores " + region_scores.shape_string() + " for " +
                     std::to_string(regions.size()) + " regions");
  }
  const std::size_t classes = region_scores.dim(1);
  const std::size_t pixels = static_cast<std::size_t>(regions.width) * static_cast<std::size_t>(regions.height);
  PixelScoreMap pix;
  pix.width = regions.width;
  pix.height = regions.height;
  pix.scores = Tensor({pixels, classes}, kUncoveredScore);
  pix.winner.assign(pixels * classes, kNoRegion);
  // Regions in ascending id order with a strict comparison: ties keep the lower id.
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const double* s = region_scores.raw() + r * classes;
    for (PixelIndex p : regions.regions[r].pixels()) {
      const std::size_t base = static_cast<std::size_t>(p) * classes;
      double* ps = pix.scores.raw() + base;
      std::int32_t* pw = pix.winner.data() + base;
      for (std::size_t c = 0; c < classes; ++c) {
        if (pw[c] == kNoRegion || s[c] > ps[c]) {
          ps[c] = s[c];
          pw[c] = static_cast<std::int32_t>(r);
        }
      }
    }
  }
  return pix;
}

Tensor r2p_backward(const Tensor& pix_grad, const PixelScoreMap& pix, std::size_t region_count) {
  if (!pix_grad.same_shape(pix.scores)) {
    throw ShapeError("r2p_backward: grad " + pix_grad.shape_string() + " vs pixel scores " +
                     pix.scores.shape_string());
  }
  const std::size_t classes = pix.class_count();
  Tensor grad({region_count, classes});
  for (std::size_t k = 0; k < pix.winner.size(); ++k) {
    const std::int32_t r = pix.winner[k];
    if (r == kNoRegion) continue;
    if (static_cast<std::size_t>(r) >= region_count) {
      throw ShapeError("r2p_backward: winner id exceeds region count");
    }
    grad[static_cast<std::size_t>(r) * classes + k % classes] += pix_grad[k];
  }
  return grad;
}

std::size_t fill_uncovered(LabelMap& labels, const std::vector<bool>& covered) {
  const int w = labels.width();
  std::vector<std::size_t> sources;
  std::vector<std::size_t> targets;
  for (std::size_t p = 0; p < labels.size(); ++p) (covered[p] ? sources : targets).push_back(p);
  for (std::size_t p : targets) {
    if (sources.empty()) {
      labels[p] = 0;
      continue;
    }
    const long px = static_cast<long>(p) % w, py = static_cast<long>(p) / w;
    long best = std::numeric_limits<long>::max();
    std::size_t best_src = sources.front();
    for (std::size_t q : sources) {  // ascending, strict '<' keeps the smaller index
      const long dx = static_cast<long>(q) % w - px, dy = static_cast<long>(q) / w - py;
      const long d2 = dx * dx + dy * dy;
      if (d2 < best) {
        best = d2;
        best_src = q;
      }
    }
    labels[p] = labels[best_src];
  }
  return targets.size();
}

namespace {

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

Prediction predict_endtoend(const PixelScoreMap& pix) {
  const std::size_t classes = pix.class_count();
  Prediction pred{LabelMap(pix.width, pix.height, 0), 0};
  std::vector<bool> covered(pix.pixel_count());
  std::vector<double> probs(classes);
  for (std::size_t p = 0; p < pix.pixel_count(); ++p) {
    covered[p] = pix.covered(p);
    if (!covered[p]) continue;
    const auto row = pix.scores.row(p);
    softmax_into(row, probs);
    const std::size_t by_prob = argmax(probs);
    const std::size_t by_score = argmax(row);
    // softmax is monotone; the two can only disagree when rounding makes
    // probabilities tie, in which case both labels are equally probable.
    if (by_prob != by_score && probs[by_prob] != probs[by_score]) {
      throw std::logic_error("predict_endtoend: softmax argmax disagrees with score argmax");
    }
    pred.labels[p] = static_cast<int>(by_score);
  }
  pred.fallback_pixels = fill_uncovered(pred.labels, covered);
  return pred;
}

Prediction predict_baseline(const Tensor& region_scores, const RegionSet& regions) {
  const PixelScoreMap probs = r2p_forward(softmax_rows(region_scores), regions);
  Prediction pred{LabelMap(regions.width, regions.height, 0), 0};
  std::vector<bool> covered(probs.pixel_count());
  for (std::size_t p = 0; p < probs.pixel_count(); ++p) {
    covered[p] = probs.covered(p);
    if (covered[p]) pred.labels[p] = static_cast<int>(argmax(probs.scores.row(p)));
  }
  pred.fallback_pixels = fill_uncovered(pred.labels, covered);
  return pred;
}

}  // namespace regseg
