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
#include "regseg/log.hpp"
#include "regseg/metrics.hpp"

using namespace regseg;

namespace {

// Collects warnings for the lifetime of the object.
struct CaptureWarnings {
  std::vector<std::string> seen;
  WarningSink previous;
  CaptureWarnings() : previous(set_warning_sink([this](const std::string& m) { seen.push_back(m); })) {}
  ~CaptureWarnings() { set_warning_sink(previous); }
};

}  // namespace

TEST_CASE("metrics on a hand-built confusion matrix") {
  // gt:   0 0 0 1 1 2
  // pred: 0 0 1 1 0 2
  const LabelMap gt(6, 1, std::vector<int>{0, 0, 0, 1, 1, 2});
  const LabelMap pred(6, 1, std::vector<int>{0, 0, 1, 1, 0, 2});
  ConfusionMatrix cm(4);
  cm.add(pred, gt);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.total() == 6);
  CHECK(global_accuracy(cm) == doctest::Approx(4.0 / 6.0));
  // recalls 2/3, 1/2, 1; class 3 absent
  CHECK(class_average_accuracy(cm) == doctest::Approx((2.0 / 3.0 + 0.5 + 1.0) / 3.0));
  // IoU: class 0: 2/(3+3-2)=0.5, class 1: 1/(2+2-1)=1/3, class 2: 1
  CHECK(mean_iou(cm) == doctest::Approx((0.5 + 1.0 / 3.0 + 1.0) / 3.0));
  CHECK(mean_iou(cm, IouClasses::kAll) == doctest::Approx((0.5 + 1.0 / 3.0 + 1.0) / 4.0));
}

TEST_CASE("VOID ground truth is never counted") {
  const LabelMap gt(3, 1, std::vector<int>{kVoid, 1, 1});
  const LabelMap pred(3, 1, std::vector<int>{0, 1, 0});
  ConfusionMatrix cm(2);
  cm.add(pred, gt);
  CHECK(cm.total() == 2);
  CHECK(global_accuracy(cm) == 0.5);
}

TEST_CASE("boundary band equals the brute-force distance test") {
  CaptureWarnings quiet;
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const LabelMap gt = oracle::random_labels(rng.uniform_int(2, 20), rng.uniform_int(2, 20), 4, rng,
                                              trial % 2 ? 0.05 : 0.0);
    for (double band : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, rng.uniform(0.0, 5.0)}) {
      CHECK(boundary_band(gt, band) == oracle::boundary_band(gt, band));
    }
  }
}

TEST_CASE("band zero selects exactly the pixels next to a label change") {
  const LabelMap gt(4, 1, std::vector<int>{1, 1, 2, 2});
  CHECK(boundary_band(gt, 0.0) == std::vector<bool>{false, true, true, false});
  CHECK(boundary_band(gt, 1.5) == std::vector<bool>{true, true, true, true});
}

TEST_CASE("perfect predictions score one in the band") {
  CaptureWarnings warnings;
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const LabelMap gt = oracle::random_labels(16, 16, 5, rng);
    const auto acc = boundary_class_accuracy(gt, gt, 5, 2.0);
    if (acc) CHECK(*acc == 1.0);
  }
  const LabelMap flat(4, 4, 2);
  warnings.seen.clear();
  CHECK_FALSE(boundary_class_accuracy(flat, flat, 3, 2.0).has_value());
  CHECK(warnings.seen.size() == 1);
}

TEST_CASE("report formats carry every metric") {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 3);
  cm.add(1, 0, 1);
  MetricsReport r = summarize(cm);
  r.band = 2.0;
  r.band_class_accuracy = 0.5;
  const std::string rec = format_records(r);
  CHECK(rec.find("global_acc=0.75") != std::string::npos);
  CHECK(format_table(r).find("boundary class-avg (2px)") != std::string::npos);
}
