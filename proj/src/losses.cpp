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


#include "regseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "regseg/layers.hpp"

namespace regseg {

std::string to_string(LossMode mode) {
  return mode == LossMode::kBalanced ? "balanced" : "unbalanced";
}

LossMode parse_loss_mode(const std::string& text) {
  if (text == "balanced") return LossMode::kBalanced;
  if (text == "unbalanced") return LossMode::kUnbalanced;
  throw std::invalid_argument("unknown loss mode '" + text + "' (balanced|unbalanced)");
}

ClassWeights balanced_weights(const LabelMap& gt, int num_classes) {
  const auto counts = gt.class_counts(num_classes);
  ClassWeights weights;
  weights.mode = LossMode::kBalanced;
  weights.w.assign(counts.size(), 0.0);
  const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t n) { return n > 0; });
  if (present == 0) throw std::invalid_argument("balanced_weights: no labeled pixels");
  // sum_c (1/P_c) * P_c = present, so Z = present normalizes the sum to 1.
  weights.z = static_cast<double>(present);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) weights.w[c] = 1.0 / (weights.z * static_cast<double>(counts[c]));
  }
  return weights;
}

ClassWeights unbalanced_weights(const LabelMap& gt, int num_classes) {
  const std::size_t labeled = gt.labeled_count();
  if (labeled == 0) throw std::invalid_argument("unbalanced_weights: no labeled pixels");
  ClassWeights weights;
  weights.mode = LossMode::kUnbalanced;
  weights.w.assign(static_cast<std::size_t>(num_classes), 1.0 / static_cast<double>(labeled));
  return weights;
}

ClassWeights class_weights(LossMode mode, const LabelMap& gt, int num_classes) {
  return mode == LossMode::kBalanced ? balanced_weights(gt, num_classes)
                                     : unbalanced_weights(gt, num_classes);
}

namespace {

// -w * log softmax_label(scores); writes w * (softmax - onehot) into grad.
double weighted_log_loss(std::span<const double> scores, int label, double weight,
                         std::span<double> grad) {
  const double peak = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    grad[c] = std::exp(scores[c] - peak);
    total += grad[c];
  }
  const double log_prob = scores[static_cast<std::size_t>(label)] - peak - std::log(total);
  for (std::size_t c = 0; c < scores.size(); ++c) {
    grad[c] = weight * (grad[c] / total - (static_cast<int>(c) == label ? 1.0 : 0.0));
  }
  return -weight * log_prob;
}

void check_label(int label, std::size_t classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    throw std::out_of_range("loss: label " + std::to_string(label) + " outside the class range");
  }
}

void check_partition(const Tensor& region_scores, const RegionSet& regions,
                     const LossPartition& partition, const ClassWeights& w) {
  if (region_scores.rank() != 2 || region_scores.dim(0) != regions.size()) {
    throw ShapeError("partitioned loss: scores " + region_scores.shape_string() + " for " +
                     std::to_string(regions.size()) + " regions");
  }
  if (partition.region_count != regions.size() || partition.width != regions.width ||
      partition.height != regions.height) {
    throw std::invalid_argument("partitioned loss: partition was built for a different region set");
  }
  if (w.w.size() != region_scores.dim(1)) throw ShapeError("partitioned loss: weight count mismatch");
}

// Per-class max and winning region over the rows listed in `covering`
// (ascending ids; strict '>' keeps the lowest id on ties). Classes are taken
// four at a time so the running maxima stay in registers.
void covering_max(const double* scores, std::size_t classes, std::span<const std::int32_t> covering,
                  std::vector<double>& maxed, std::vector<std::int32_t>& winner) {
  const std::int32_t head = covering.front();
  const double* first = scores + static_cast<std::size_t>(head) * classes;
  std::size_t c = 0;
  for (; c + 4 <= classes; c += 4) {
    double m0 = first[c], m1 = first[c + 1], m2 = first[c + 2], m3 = first[c + 3];
    std::int32_t w0 = head, w1 = head, w2 = head, w3 = head;
    for (std::size_t k = 1; k < covering.size(); ++k) {
      const std::int32_t id = covering[k];
      const double* row = scores + static_cast<std::size_t>(id) * classes + c;
      if (row[0] > m0) { m0 = row[0]; w0 = id; }
      if (row[1] > m1) { m1 = row[1]; w1 = id; }
      if (row[2] > m2) { m2 = row[2]; w2 = id; }
      if (row[3] > m3) { m3 = row[3]; w3 = id; }
    }
    const double m[4] = {m0, m1, m2, m3};
    const std::int32_t wins[4] = {w0, w1, w2, w3};
    std::copy(m, m + 4, maxed.begin() + static_cast<std::ptrdiff_t>(c));
    std::copy(wins, wins + 4, winner.begin() + static_cast<std::ptrdiff_t>(c));
  }
  for (; c < classes; ++c) {
    maxed[c] = first[c];
    winner[c] = head;
    for (std::size_t k = 1; k < covering.size(); ++k) {
      const double v = scores[static_cast<std::size_t>(covering[k]) * classes + c];
      if (v > maxed[c]) {
        maxed[c] = v;
        winner[c] = covering[k];
      }
    }
  }
}

}  // namespace

LossResult pixel_loss(const PixelScoreMap& pix, const LabelMap& gt, const ClassWeights& w) {
  if (static_cast<std::size_t>(pix.width) * static_cast<std::size_t>(pix.height) != gt.size() ||
      pix.width != gt.width()) {
    throw ShapeError("pixel_loss: label map does not match pixel scores");
  }
  const std::size_t classes = pix.class_count();
  if (w.w.size() != classes) throw ShapeError("pixel_loss: weight count mismatch");
  LossResult result;
  result.grad = Tensor::zeros_like(pix.scores);
  for (std::size_t p = 0; p < gt.size(); ++p) {
    if (gt.is_void(p)) continue;
    if (!pix.covered(p)) {
      throw std::runtime_error("pixel_loss: labeled pixel " + std::to_string(p) +
                               " is covered by no region");
    }
    check_label(gt[p], classes);
    result.value += weighted_log_loss(pix.scores.row(p), gt[p],
                                      w.w[static_cast<std::size_t>(gt[p])], result.grad.row(p));
  }
  return result;
}

LossResult pixel_loss_naive(const Tensor& region_scores, const RegionSet& regions,
                            const LabelMap& gt, const ClassWeights& w) {
  const PixelScoreMap pix = r2p_forward(region_scores, regions);
  LossResult pixel = pixel_loss(pix, gt, w);
  return {pixel.value, r2p_backward(pixel.grad, pix, regions.size())};
}

LossResult pixel_loss_partitioned(const Tensor& region_scores, const RegionSet& regions,
                                  const LossPartition& partition, const ClassWeights& w) {
  check_partition(region_scores, regions, partition, w);
  const std::size_t classes = region_scores.dim(1);
  LossResult result;
  result.grad = Tensor::zeros_like(region_scores);
  std::vector<double> maxed(classes), grad(classes);
  std::vector<std::int32_t> winner(classes);
  for (const LossCell& cell : partition.cells) {
    if (cell.covering.empty()) {
      throw std::runtime_error("pixel_loss_partitioned: labeled pixel " +
                               std::to_string(cell.pixels.front()) + " is covered by no region");
    }
    check_label(cell.label, classes);
    covering_max(region_scores.raw(), classes, cell.covering, maxed, winner);
    const double n = static_cast<double>(cell.count());
    result.value += n * weighted_log_loss(maxed, cell.label,
                                          w.w[static_cast<std::size_t>(cell.label)], grad);
    for (std::size_t c = 0; c < classes; ++c) {
      result.grad.at(static_cast<std::size_t>(winner[c]), c) += n * grad[c];
    }
  }
  return result;
}

LossResult softmax_then_max_loss(const Tensor& region_scores, const RegionSet& regions,
                                 const LossPartition& partition, const ClassWeights& w) {
  check_partition(region_scores, regions, partition, w);
  const std::size_t classes = region_scores.dim(1);
  // log softmax per region
  Tensor log_probs = Tensor::zeros_like(region_scores);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto row = region_scores.row(r);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double s : row) total += std::exp(s - peak);
    const double log_total = std::log(total);
    for (std::size_t c = 0; c < classes; ++c) log_probs.at(r, c) = row[c] - peak - log_total;
  }
  LossResult result;
  result.grad = Tensor::zeros_like(region_scores);
  for (const LossCell& cell : partition.cells) {
    if (cell.covering.empty()) {
      throw std::runtime_error("softmax_then_max_loss: labeled pixel is covered by no region");
    }
    check_label(cell.label, classes);
    const auto y = static_cast<std::size_t>(cell.label);
    std::int32_t best = cell.covering.front();
    for (std::int32_t r : cell.covering) {
      if (log_probs.at(static_cast<std::size_t>(r), y) > log_probs.at(static_cast<std::size_t>(best), y)) best = r;
    }
    const double scale = static_cast<double>(cell.count()) * w.w[y];
    const auto rb = static_cast<std::size_t>(best);
    result.value -= scale * log_probs.at(rb, y);
    for (std::size_t c = 0; c < classes; ++c) {
      result.grad.at(rb, c) += scale * (std::exp(log_probs.at(rb, c)) - (c == y ? 1.0 : 0.0));
    }
  }
  return result;
}

LossResult region_loss(const Tensor& region_scores, const std::vector<int>& region_labels) {
  if (region_scores.rank() != 2 || region_scores.dim(0) != region_labels.size()) {
    throw ShapeError("region_loss: scores " + region_scores.shape_string() + " for " +
                     std::to_string(region_labels.size()) + " labels");
  }
  const auto labeled = std::count_if(region_labels.begin(), region_labels.end(),
                                     [](int l) { return l != kIgnore; });
  if (labeled == 0) throw std::invalid_argument("region_loss: every region is ignored");
  const double weight = 1.0 / static_cast<double>(labeled);
  LossResult result;
  result.grad = Tensor::zeros_like(region_scores);
  for (std::size_t r = 0; r < region_labels.size(); ++r) {
    if (region_labels[r] == kIgnore) continue;
    check_label(region_labels[r], region_scores.dim(1));
    result.value += weighted_log_loss(region_scores.row(r), region_labels[r], weight,
                                      result.grad.row(r));
  }
  return result;
}

std::vector<int> assign_region_labels(const RegionSet& regions, const LabelMap& gt,
                                      const OverlapPolicy& policy) {
  if (!(0.0 <= policy.neg_overlap && policy.neg_overlap <= policy.pos_overlap &&
        policy.pos_overlap <= 1.0)) {
    throw std::invalid_argument("assign_region_labels: need 0 <= neg <= pos <= 1");
  }
  std::vector<int> labels(regions.size(), kIgnore);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const RegionLabel rl = region_label_and_overlap(regions.regions[r], gt);
    if (!rl.labeled()) continue;
    if (rl.overlap >= policy.pos_overlap) {
      labels[r] = rl.label;
    } else if (rl.overlap < policy.neg_overlap) {
      labels[r] = policy.background_class;
    }
  }
  return labels;
}

}  // namespace regseg
