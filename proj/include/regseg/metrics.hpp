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
#include <optional>
#include <string>
#include <vector>

#include "regseg/regions.hpp"

namespace regseg {

/// Rows are ground truth, columns prediction. VOID ground-truth pixels are
/// never counted.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  /// Adds every non-VOID pixel, or only those with mask[p] set.
  void add(const LabelMap& pred, const LabelMap& gt, const std::vector<bool>* mask = nullptr);
  void add(int gt_class, int pred_class, std::uint64_t n = 1);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  int num_classes() const { return classes_; }
  std::uint64_t at(int gt_class, int pred_class) const {
    return counts_[static_cast<std::size_t>(gt_class * classes_ + pred_class)];
  }
  std::uint64_t row_sum(int c) const;
  std::uint64_t col_sum(int c) const;
  std::uint64_t total() const;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

double global_accuracy(const ConfusionMatrix& cm);

/// Mean per-class recall over classes with ground-truth pixels.
double class_average_accuracy(const ConfusionMatrix& cm);

enum class IouClasses {
  kPresent,  // classes occurring in ground truth or prediction
  kAll,
};

double mean_iou(const ConfusionMatrix& cm, IouClasses which = IouClasses::kPresent);

/// Non-VOID pixels whose center lies within `band` pixels (Euclidean) of a
/// ground-truth label-change edge, i.e. a unit edge between two 4-neighbors
/// carrying different non-VOID labels. Boundary pixels sit half a pixel from
/// their edge, so band 0 selects exactly the boundary pixels.
std::vector<bool> boundary_band(const LabelMap& gt, double band);

/// Class-average accuracy on the band of `gt`; nullopt when the band is empty.
std::optional<double> boundary_class_accuracy(const LabelMap& pred, const LabelMap& gt,
                                              int num_classes, double band = 4.0);

struct MetricsReport {
  double global_accuracy = 0.0;
  double class_average_accuracy = 0.0;
  double mean_iou = 0.0;
  std::uint64_t pixels = 0;
  std::optional<double> band_class_accuracy;
  std::optional<double> band;
};

MetricsReport summarize(const ConfusionMatrix& cm);

/// Aligned two-column table for people.
std::string format_table(const MetricsReport& report);
/// One `key=value` record per line for scripts.
std::string format_records(const MetricsReport& report);

}  // namespace regseg
