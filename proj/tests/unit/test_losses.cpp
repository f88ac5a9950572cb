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

#include <cmath>

#include "oracles.hpp"
#include "regseg/losses.hpp"
#include "regseg/synth.hpp"

using namespace regseg;

TEST_CASE("balanced weights on a hand example") {
  // Class 0: 3 pixels, class 2: 1 pixel, class 1 absent, one VOID.
  const LabelMap gt(5, 1, std::vector<int>{0, 0, 2, 0, kVoid});
  const ClassWeights w = balanced_weights(gt, 3);
  CHECK(w.z == 2.0);
  CHECK(w.w[0] == doctest::Approx(1.0 / 6.0));
  CHECK(w.w[1] == 0.0);
  CHECK(w.w[2] == doctest::Approx(0.5));
  const ClassWeights u = unbalanced_weights(gt, 3);
  for (double x : u.w) CHECK(x == doctest::Approx(0.25));
}

TEST_CASE("balanced weights sum to one over pixels on random and generated maps") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const LabelMap gt = oracle::random_labels(rng.uniform_int(1, 20), rng.uniform_int(1, 20), 6, rng, 0.05);
    if (gt.labeled_count() == 0) continue;
    const ClassWeights w = balanced_weights(gt, 6);
    const auto counts = gt.class_counts(6);
    double s = 0.0;
    for (int c = 0; c < 6; ++c) s += w.w[std::size_t(c)] * double(counts[std::size_t(c)]);
    CHECK(std::abs(s - 1.0) < 1e-10);
  }
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Scene s = synthesize(SceneSpec{}, i);
    const ClassWeights w = balanced_weights(s.gt, 8);
    const auto counts = s.gt.class_counts(8);
    double sum = 0.0;
    for (int c = 0; c < 8; ++c) sum += w.w[std::size_t(c)] * double(counts[std::size_t(c)]);
    CHECK(std::abs(sum - 1.0) < 1e-10);
  }
}

TEST_CASE("pixel loss value on a two-pixel example") {
  // Two pixels, one region each, two classes, unit weights.
  RegionSet set{2, 1, RegionSource::kMixed, {}, {}};
  set.add(RegionMask({0}, 2, 1));
  set.add(RegionMask({1}, 2, 1));
  const Tensor scores({2, 2}, std::vector<double>{1.0, 0.0, 0.0, 2.0});
  const LabelMap gt(2, 1, std::vector<int>{0, 0});
  const ClassWeights w{LossMode::kUnbalanced, {1.0, 1.0}, 1.0};
  const double want = std::log(1.0 + std::exp(-1.0)) + std::log(1.0 + std::exp(2.0));
  CHECK(pixel_loss_naive(scores, set, gt, w).value == doctest::Approx(want).epsilon(1e-14));
  CHECK(pixel_loss_partitioned(scores, set, build_loss_partition(set, gt), w).value ==
        doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("partitioned, naive and reference pixel losses agree") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int w = rng.uniform_int(2, 12), h = rng.uniform_int(2, 12);
    const RegionSet set = oracle::random_covering_set(w, h, rng.uniform_int(2, 15), rng);
    const LabelMap gt = oracle::random_labels(w, h, 5, rng, 0.1);
    if (gt.labeled_count() == 0) continue;
    const Tensor scores = oracle::random_tensor({set.size(), 5}, rng, -3, 3);
    for (LossMode mode : {LossMode::kBalanced, LossMode::kUnbalanced}) {
      const ClassWeights cw = class_weights(mode, gt, 5);
      const LossResult ref = oracle::pixel_loss(scores, set, gt, cw.w);
      const LossResult naive = pixel_loss_naive(scores, set, gt, cw);
      const LossResult part = pixel_loss_partitioned(scores, set, build_loss_partition(set, gt), cw);
      CHECK(std::abs(naive.value - ref.value) < 1e-10);
      CHECK(std::abs(part.value - ref.value) < 1e-10);
      for (std::size_t i = 0; i < ref.grad.size(); ++i) {
        CHECK(std::abs(naive.grad[i] - ref.grad[i]) < 1e-10);
        CHECK(std::abs(part.grad[i] - ref.grad[i]) < 1e-10);
      }
    }
  }
}

TEST_CASE("an uncovered labeled pixel is an error") {
  RegionSet set{2, 1, RegionSource::kMixed, {}, {}};
  set.add(RegionMask({0}, 2, 1));
  const LabelMap gt(2, 1, 0);
  const ClassWeights w = unbalanced_weights(gt, 2);
  CHECK_THROWS(pixel_loss_naive(Tensor({1, 2}), set, gt, w));
  CHECK_THROWS(pixel_loss_partitioned(Tensor({1, 2}), set, build_loss_partition(set, gt), w));
}

TEST_CASE("softmax-then-max loss takes the best region's log-probability") {
  RegionSet set{1, 1, RegionSource::kMixed, {}, {}};
  set.add(RegionMask({0}, 1, 1));
  set.add(RegionMask({0}, 1, 1));
  const Tensor scores({2, 2}, std::vector<double>{0.0, 1.0, 2.0, 0.0});
  const LabelMap gt(1, 1, 0);
  const ClassWeights w{LossMode::kUnbalanced, {1.0, 1.0}, 1.0};
  const LossResult r = softmax_then_max_loss(scores, set, build_loss_partition(set, gt), w);
  // Region 1 gives class 0 the higher probability.
  CHECK(r.value == doctest::Approx(std::log(1.0 + std::exp(-2.0))).epsilon(1e-14));
  CHECK(r.grad.at(0, 0) == 0.0);
  CHECK(r.grad.at(0, 1) == 0.0);
  CHECK(r.grad.at(1, 0) + r.grad.at(1, 1) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("region loss averages over labeled regions") {
  const Tensor scores({3, 2}, std::vector<double>{0.0, 0.0, 3.0, 1.0, 5.0, 5.0});
  const LossResult r = region_loss(scores, {0, kIgnore, 1});
  CHECK(r.value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(r.grad.at(1, 0) == 0.0);
  CHECK(r.grad.at(0, 0) == doctest::Approx(-0.25));
  CHECK_THROWS(region_loss(scores, {kIgnore, kIgnore, kIgnore}));
}

TEST_CASE("region labels follow the overlap policy") {
  const LabelMap gt(4, 1, std::vector<int>{1, 1, 1, 2});
  RegionSet set{4, 1, RegionSource::kMixed, {}, {}};
  set.add(RegionMask({0, 1, 2, 3}, 4, 1));  // class 1 at 0.75
  set.add(RegionMask({2, 3}, 4, 1));        // tie 1/2 at 0.5 -> class 1
  set.add(RegionMask({0, 1, 2, 3}, 4, 1));
  OverlapPolicy p;
  p.pos_overlap = 0.7;
  p.neg_overlap = 0.6;
  p.background_class = 0;
  CHECK(assign_region_labels(set, gt, p) == std::vector<int>{1, 0, 1});
  p.background_class = kIgnore;
  CHECK(assign_region_labels(set, gt, p) == std::vector<int>{1, kIgnore, 1});
  p.neg_overlap = 0.9;
  CHECK_THROWS(assign_region_labels(set, gt, p));
}
