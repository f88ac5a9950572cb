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


#include "regseg/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <ostream>
#include <sstream>

#include "regseg/random.hpp"

namespace regseg {

std::string to_string(RegionPlan plan) {
  return plan == RegionPlan::kMultiScale ? "multiscale" : "overseg";
}

RegionPlan parse_region_plan(const std::string& text) {
  if (text == "multiscale") return RegionPlan::kMultiScale;
  if (text == "overseg") return RegionPlan::kOversegmentation;
  throw std::invalid_argument("unknown region plan '" + text + "'");
}

std::vector<RegionSet> training_region_sets(const RegionConfig& config, const Scene& scene) {
  if (config.plan == RegionPlan::kOversegmentation) {
    return {oversegment(scene.image, config.overseg_threshold, config.overseg_min_size)};
  }
  std::vector<RegionSet> sets = rotating_proposal_sets(scene.gt.width(), scene.gt.height(), config.proposals);
  for (double level : config.overseg_levels) {
    const RegionSet segments = oversegment(scene.image, level, config.overseg_min_size);
    for (RegionSet& set : sets) {
      const RegionSource source = set.source;
      set = merge(set, segments);
      set.source = source;
    }
  }
  return sets;
}

RegionSet test_regions(const RegionConfig& config, const Scene& scene) {
  const std::vector<RegionSet> sets = training_region_sets(config, scene);
  RegionSet out{scene.gt.width(), scene.gt.height(), sets.size() == 1 ? sets.front().source : RegionSource::kMixed,
                {}, {}};
  std::set<std::vector<PixelIndex>> seen;
  for (const RegionSet& set : sets) {
    for (const RegionMask& r : set.regions) {
      if (seen.emplace(r.pixels().begin(), r.pixels().end()).second) out.add(r);
    }
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(lr_phase1 >= 0.0) || !(lr_phase2 >= 0.0)) throw std::invalid_argument("train: learning rates must be >= 0");
  if (epochs_phase1 < 0 || epochs_phase2 < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight decay must be >= 0");
  if (images_per_batch != 1) throw std::invalid_argument("train: only one image per batch is supported");
  if (!(overlap.neg_overlap >= 0.0 && overlap.neg_overlap <= overlap.pos_overlap && overlap.pos_overlap <= 1.0)) {
    throw std::invalid_argument("train: need 0 <= neg_overlap <= pos_overlap <= 1");
  }
}

std::string config_text(const TrainConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "lr_phase1 " << c.lr_phase1 << '\n'
     << "epochs_phase1 " << c.epochs_phase1 << '\n'
     << "lr_phase2 " << c.lr_phase2 << '\n'
     << "epochs_phase2 " << c.epochs_phase2 << '\n'
     << "momentum " << c.momentum << '\n'
     << "weight_decay " << c.weight_decay << '\n'
     << "seed " << c.seed << '\n'
     << "images_per_batch " << c.images_per_batch << '\n'
     << "shuffle " << (c.shuffle ? 1 : 0) << '\n'
     << "pos_overlap " << c.overlap.pos_overlap << '\n'
     << "neg_overlap " << c.overlap.neg_overlap << '\n'
     << "background_class " << c.overlap.background_class << '\n';
  return os.str();
}

std::string config_text(const RegionConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "regions " << to_string(c.plan) << '\n' << "scales";
  for (int s : c.proposals.scales) os << ' ' << s;
  os << '\n'
     << "stride_fraction " << c.proposals.stride_fraction << '\n'
     << "overseg_threshold " << c.overseg_threshold << '\n'
     << "overseg_levels";
  for (double l : c.overseg_levels) os << ' ' << l;
  os << '\n'
     << "overseg_min_size " << c.overseg_min_size << '\n';
  return os.str();
}

void sgd_step(std::vector<Param>& params, double lr, double momentum, double weight_decay) {
  for (const Param& p : params) {
    if (!p.grad.all_finite()) throw std::runtime_error("sgd_step: non-finite gradient in '" + p.name + "'");
  }
  for (Param& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      p.momentum[i] = momentum * p.momentum[i] - lr * (p.grad[i] + weight_decay * p.value[i]);
      p.value[i] += p.momentum[i];
    }
    p.zero_grad();
  }
}

Batch assemble_batch(const Scene& scene, std::size_t image_index, std::size_t batch_counter,
                     const std::vector<RegionSet>& proposal_sets) {
  if (proposal_sets.empty()) throw std::invalid_argument("assemble_batch: no proposal sets");
  Batch b;
  b.image = image_index;
  b.proposal_set = batch_counter % proposal_sets.size();
  b.regions = merge(proposal_sets[b.proposal_set], ground_truth_regions(scene.gt));
  return b;
}

std::vector<std::size_t> epoch_order(const std::vector<std::size_t>& indices, std::uint64_t seed, int epoch,
                                     bool shuffle) {
  std::vector<std::size_t> order = indices;
  if (!shuffle) return order;
  Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(epoch));
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

EvalResult evaluate(const Model& model, const Dataset& dataset, const std::vector<std::size_t>& indices,
                    const RegionConfig& regions, std::optional<double> band) {
  const int classes = model.config().num_classes;
  EvalResult out;
  out.cm = ConfusionMatrix(classes);
  if (band) out.band_cm = ConfusionMatrix(classes);
  for (std::size_t i : indices) {
    const Scene& scene = dataset.scenes.at(i);
    const Prediction pred = model.predict(scene.image, test_regions(regions, scene));
    out.fallback_pixels += pred.fallback_pixels;
    out.cm.add(pred.labels, scene.gt);
    if (band) {
      const std::vector<bool> mask = boundary_band(scene.gt, *band);
      out.band_cm->add(pred.labels, scene.gt, &mask);
    }
  }
  out.report = summarize(out.cm);
  if (band) {
    out.report.band = band;
    if (out.band_cm->total() > 0) out.report.band_class_accuracy = class_average_accuracy(*out.band_cm);
  }
  return out;
}

std::string format_record(const EpochRecord& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "epoch=" << r.epoch << " phase=" << r.phase << " lr=" << r.lr << " loss=" << r.loss;
  if (r.metrics) {
    os << " global_acc=" << r.metrics->global_accuracy << " class_acc=" << r.metrics->class_average_accuracy
       << " miou=" << r.metrics->mean_iou;
  } else {
    os << " global_acc=- class_acc=- miou=-";
  }
  return os.str();
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& tc, const RegionConfig& region_config,
                  const Dataset& dataset, std::ostream* log) {
  tc.validate();
  if (dataset.train.empty()) throw std::invalid_argument("train: dataset has no training images");
  TrainResult result{Model(model_config), {}};
  Model& model = result.model;
  const bool endtoend = model_config.arch == Architecture::kEndToEnd;

  // Proposal sets and loss partitions depend only on (image, set).
  struct Prepared {
    RegionSet regions;
    LossPartition partition;
  };
  std::map<std::size_t, std::vector<RegionSet>> proposals;
  std::map<std::pair<std::size_t, std::size_t>, Prepared> prepared;

  const int total_epochs = tc.epochs_phase1 + tc.epochs_phase2;
  std::size_t counter = 0;
  Model last_good = model;
  for (int epoch = 1; epoch <= total_epochs; ++epoch) {
    const int phase = epoch <= tc.epochs_phase1 ? 1 : 2;
    const double lr = phase == 1 ? tc.lr_phase1 : tc.lr_phase2;
    double loss_sum = 0.0;
    const auto order = epoch_order(dataset.train, tc.seed, epoch, tc.shuffle);
    for (std::size_t image : order) {
      const Scene& scene = dataset.scenes.at(image);
      auto sets = proposals.find(image);
      if (sets == proposals.end()) sets = proposals.emplace(image, training_region_sets(region_config, scene)).first;
      const std::size_t set = counter % sets->second.size();
      auto key = std::make_pair(image, set);
      auto it = prepared.find(key);
      if (it == prepared.end()) {
        Batch batch = assemble_batch(scene, image, counter, sets->second);
        Prepared p{std::move(batch.regions), {}};
        if (endtoend) p.partition = build_loss_partition(p.regions, scene.gt);
        it = prepared.emplace(key, std::move(p)).first;
      }
      ++counter;

      ForwardCache cache;
      const Tensor scores = model.forward(scene.image, it->second.regions, &cache);
      LossInputs inputs;
      inputs.regions = &it->second.regions;
      inputs.gt = &scene.gt;
      inputs.partition = endtoend ? &it->second.partition : nullptr;
      inputs.overlap = tc.overlap;
      const LossResult loss = model_loss(model_config, scores, inputs);
      if (!std::isfinite(loss.value)) {
        throw TrainingDiverged("training diverged: loss is " + std::to_string(loss.value) + " in epoch " +
                                   std::to_string(epoch),
                               last_good);
      }
      loss_sum += loss.value;
      model.backward(cache, loss.grad);
      try {
        sgd_step(model.params(), lr, tc.momentum, tc.weight_decay);
      } catch (const std::runtime_error& e) {
        throw TrainingDiverged(std::string("training diverged: ") + e.what() + " in epoch " + std::to_string(epoch),
                               last_good);
      }
    }
    EpochRecord record{epoch, phase, lr, loss_sum / static_cast<double>(order.size()), std::nullopt};
    if (!dataset.test.empty() && (tc.validate_every_epoch || epoch == total_epochs)) {
      record.metrics = evaluate(model, dataset, dataset.test, region_config).report;
    }
    if (log) *log << format_record(record) << '\n' << std::flush;
    result.log.push_back(record);
    last_good = model;
  }
  return result;
}

}  // namespace regseg
