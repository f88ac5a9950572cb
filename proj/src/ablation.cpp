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


#include "regseg/ablation.hpp"

#include <array>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace regseg {

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kEndToEndVsBaseline: return "e2e-vs-baseline";
    case Ablation::kSoftmaxOrder: return "softmax-order";
    case Ablation::kRegionShape: return "region-shape";
    case Ablation::kPoolingMode: return "pooling-mode";
    case Ablation::kLossMode: return "loss-mode";
  }
  return "e2e-vs-baseline";
}

Ablation parse_ablation(const std::string& text) {
  for (Ablation a : {Ablation::kEndToEndVsBaseline, Ablation::kSoftmaxOrder, Ablation::kRegionShape,
                     Ablation::kPoolingMode, Ablation::kLossMode}) {
    if (to_string(a) == text) return a;
  }
  throw std::invalid_argument("unknown ablation '" + text + "'");
}

std::vector<Arm> ablation_arms(Ablation which, const ModelConfig& model, const RegionConfig& regions) {
  ModelConfig e2e = model;
  e2e.arch = Architecture::kEndToEnd;
  std::vector<Arm> arms;
  switch (which) {
    case Ablation::kEndToEndVsBaseline: {
      ModelConfig base = e2e;
      base.arch = Architecture::kBaseline;
      base.fusion = Fusion::kBoxOnly;
      base.softmax_order = SoftmaxOrder::kMaxThenSoftmax;
      e2e.fusion = Fusion::kBoxOnly;
      e2e.softmax_order = SoftmaxOrder::kMaxThenSoftmax;
      arms.push_back({"baseline", base, regions});
      arms.push_back({"endtoend", e2e, regions});
      break;
    }
    case Ablation::kSoftmaxOrder:
      for (SoftmaxOrder order : {SoftmaxOrder::kSoftmaxThenMax, SoftmaxOrder::kMaxThenSoftmax}) {
        e2e.softmax_order = order;
        arms.push_back({to_string(order), e2e, regions});
      }
      break;
    case Ablation::kRegionShape:
      for (RegionPlan plan : {RegionPlan::kOversegmentation, RegionPlan::kMultiScale}) {
        RegionConfig r = regions;
        r.plan = plan;
        arms.push_back({to_string(plan), e2e, r});
      }
      break;
    case Ablation::kPoolingMode:
      for (Fusion f : {Fusion::kBoxOnly, Fusion::kRegionOnly, Fusion::kTied, Fusion::kSeparate}) {
        e2e.fusion = f;
        arms.push_back({to_string(f), e2e, regions});
      }
      break;
    case Ablation::kLossMode:
      for (LossMode mode : {LossMode::kUnbalanced, LossMode::kBalanced}) {
        e2e.loss = mode;
        arms.push_back({to_string(mode), e2e, regions});
      }
      break;
  }
  return arms;
}

std::vector<ArmResult> run_arms(const std::vector<Arm>& arms, const TrainConfig& train_config, const Dataset& dataset,
                                std::ostream* progress) {
  if (dataset.test.empty()) throw std::invalid_argument("ablation: dataset has no test images");
  std::vector<ArmResult> results;
  for (const Arm& arm : arms) {
    TrainResult trained = train(arm.model, train_config, arm.regions, dataset);
    ArmResult r{arm, {}, trained.log};
    r.metrics = trained.log.empty() || !trained.log.back().metrics
                    ? evaluate(trained.model, dataset, dataset.test, arm.regions).report
                    : *trained.log.back().metrics;
    if (progress) {
      *progress << "arm " << arm.name << " global_acc=" << r.metrics.global_accuracy << " class_acc=" << r.metrics.class_average_accuracy
                << " miou=" << r.metrics.mean_iou << '\n'
                << std::flush;
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::string format_ablation(const std::vector<ArmResult>& results) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(18) << "arm" << std::right << std::setw(10) << "global" << std::setw(10)
     << "class-avg" << std::setw(10) << "mIoU" << std::setw(12) << "d.global" << std::setw(12) << "d.class-avg"
     << std::setw(10) << "d.mIoU" << '\n';
  for (const ArmResult& r : results) {
    const MetricsReport& m = r.metrics;
    const MetricsReport& ref = results.front().metrics;
    os << std::left << std::setw(18) << r.arm.name << std::right << std::setw(10) << 100.0 * m.global_accuracy
       << std::setw(10) << 100.0 * m.class_average_accuracy << std::setw(10) << 100.0 * m.mean_iou << std::showpos
       << std::setw(12) << 100.0 * (m.global_accuracy - ref.global_accuracy) << std::setw(12)
       << 100.0 * (m.class_average_accuracy - ref.class_average_accuracy) << std::setw(10)
       << 100.0 * (m.mean_iou - ref.mean_iou) << std::noshowpos << '\n';
  }
  return os.str();
}

}  // namespace regseg
