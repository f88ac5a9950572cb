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

#include <map>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "regseg/regions.hpp"
#include "regseg/synth.hpp"

using namespace regseg;

TEST_CASE("region masks sort, dedupe and find their box") {
  const RegionMask r({13, 2, 13, 7}, 5, 4);
  CHECK(r.size() == 3);
  CHECK(r.bbox() == BBox{2, 0, 3, 2});
  CHECK(r.contains(7));
  CHECK_FALSE(r.contains(8));
  CHECK_THROWS(RegionMask({}, 5, 4));
  CHECK_THROWS(RegionMask({20}, 5, 4));
}

TEST_CASE("grid proposals stay inside the image and cover every pixel at every scale") {
  for (int w : {16, 23, 32}) {
    for (double offset : {0.0, 1.0 / 3.0, 2.0 / 3.0}) {
      const RegionSet set = grid_proposals(w, 16, {5, 8, 16}, 0.5, offset);
      CHECK_NOTHROW(check_region_set(set));
      std::map<int, std::vector<int>> cover;
      for (const RegionMask& r : set.regions) {
        const int scale = r.bbox().width();
        CHECK(r.bbox().height() == scale);
        CHECK(r.size() == std::size_t(scale * scale));
        auto& c = cover[scale];
        c.resize(std::size_t(w * 16), 0);
        for (PixelIndex p : r.pixels()) ++c[std::size_t(p)];
      }
      CHECK(cover.size() == 3);
      for (const auto& [scale, c] : cover) {
        for (int n : c) CHECK(n > 0);
      }
    }
  }
}

TEST_CASE("grid proposals reject windows that do not fit") {
  CHECK_THROWS(grid_proposals(8, 8, {9}, 0.5));
  CHECK_THROWS(grid_proposals(8, 8, {4}, 0.0));
}

TEST_CASE("rotating sets differ by their offsets") {
  const auto sets = rotating_proposal_sets(32, 32, {});
  REQUIRE(sets.size() == 3);
  CHECK(sets[0].source == RegionSource::kProposalsA);
  CHECK(sets[2].source == RegionSource::kProposalsC);
  CHECK_FALSE(sets[0].regions == sets[1].regions);
}

TEST_CASE("ground-truth regions: one per connected component") {
  // Two separate blobs of class 3 on class 0, one VOID pixel.
  LabelMap gt(6, 3, 0);
  gt.at(0, 0) = 3;
  gt.at(1, 0) = 3;
  gt.at(4, 2) = 3;
  gt.at(5, 0) = kVoid;
  const RegionSet set = ground_truth_regions(gt);
  CHECK_NOTHROW(check_region_set(set));
  std::multiset<int> hints(set.hints.begin(), set.hints.end());
  CHECK(hints.count(3) == 2);
  CHECK(hints.count(0) == 1);
  std::size_t covered = 0;
  for (const RegionMask& r : set.regions) covered += r.size();
  CHECK(covered == gt.labeled_count());
}

TEST_CASE("oversegmentation is a disjoint cover on random scenes") {
  SceneSpec spec;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const Scene s = synthesize(spec, i);
    for (double t : {0.06, 0.12, 0.25}) {
      const RegionSet set = oversegment(s.image, t, 16);
      CHECK_NOTHROW(check_region_set(set));
      std::size_t total = 0;
      for (const RegionMask& r : set.regions) total += r.size();
      CHECK(total == s.gt.size());
    }
  }
}

TEST_CASE("coarser merge thresholds give no more segments") {
  const Scene s = synthesize(SceneSpec{}, 4);
  CHECK(oversegment(s.image, 0.25).size() <= oversegment(s.image, 0.06).size());
}

TEST_CASE("check_region_set rejects overlapping segments") {
  RegionSet set{4, 4, RegionSource::kOversegmentation, {}, {}};
  set.add(RegionMask::rectangle({0, 0, 1, 1}, 4, 4));
  set.add(RegionMask::rectangle({1, 1, 3, 3}, 4, 4));
  CHECK_THROWS_AS(check_region_set(set), std::logic_error);
  set.source = RegionSource::kMixed;
  CHECK_NOTHROW(check_region_set(set));
}

TEST_CASE("coverage index lists exactly the containing regions") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const RegionSet set = oracle::random_region_set(9, 7, 12, rng);
    const CoverageIndex idx(set);
    std::size_t uncovered = 0;
    for (std::size_t p = 0; p < 63; ++p) {
      std::vector<std::int32_t> want;
      for (std::size_t r = 0; r < set.size(); ++r) {
        if (set.regions[r].contains(PixelIndex(p))) want.push_back(std::int32_t(r));
      }
      const auto got = idx.covering(p);
      CHECK(std::vector<std::int32_t>(got.begin(), got.end()) == want);
      uncovered += want.empty();
    }
    CHECK(idx.uncovered_count() == uncovered);
  }
}

TEST_CASE("region label is the majority class with ties to the lower id") {
  LabelMap gt(4, 1, std::vector<int>{2, 1, 1, 2});
  const RegionLabel l = region_label_and_overlap(RegionMask::rectangle({0, 0, 3, 0}, 4, 1), gt);
  CHECK(l.label == 1);
  CHECK(l.overlap == 0.5);
  LabelMap all_void(2, 1, kVoid);
  CHECK_FALSE(region_label_and_overlap(RegionMask({0, 1}, 2, 1), all_void).labeled());
}

TEST_CASE("loss partition groups pixels by label and covering set") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const RegionSet set = oracle::random_region_set(10, 8, 8, rng);
    const LabelMap gt = oracle::random_labels(10, 8, 4, rng, 0.1);
    const LossPartition part = build_loss_partition(set, gt);
    std::vector<int> seen(gt.size(), 0);
    std::set<std::pair<int, std::vector<std::int32_t>>> keys;
    for (const LossCell& cell : part.cells) {
      CHECK(keys.insert({cell.label, cell.covering}).second);
      for (PixelIndex p : cell.pixels) {
        ++seen[std::size_t(p)];
        CHECK(gt[std::size_t(p)] == cell.label);
        std::vector<std::int32_t> want;
        for (std::size_t r = 0; r < set.size(); ++r) {
          if (set.regions[r].contains(p)) want.push_back(std::int32_t(r));
        }
        CHECK(want == cell.covering);
      }
    }
    for (std::size_t p = 0; p < gt.size(); ++p) CHECK(seen[p] == (gt.is_void(p) ? 0 : 1));
  }
}

TEST_CASE("region sets round-trip through text") {
  Rng rng(2);
  RegionSet set = oracle::random_region_set(7, 5, 6, rng);
  set.hints[2] = 4;
  std::stringstream ss;
  write_regions(ss, set);
  const RegionSet back = read_regions(ss);
  CHECK(back.regions == set.regions);
  CHECK(back.hints == set.hints);
  CHECK(back.source == set.source);
  std::istringstream bad("regseg-regions 1\nsize 7 5\nsource nowhere\n");
  CHECK_THROWS(read_regions(bad));
}
