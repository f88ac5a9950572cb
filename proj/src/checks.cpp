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


#include "regseg/checks.hpp"

#include <cmath>

#include "regseg/layers.hpp"
#include "regseg/losses.hpp"
#include "regseg/random.hpp"
#include "regseg/region_to_pixel.hpp"
#include "regseg/roi_pooling.hpp"
#include "regseg/synth.hpp"

namespace regseg {

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero with random sign.
Tensor signed_away_from_zero(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  return t;
}

std::uint64_t hash_ids(const std::vector<std::int32_t>& ids, std::uint64_t h = 0) {
  for (std::int32_t id : ids) h = Rng::mix(h ^ static_cast<std::uint64_t>(id + 2));
  return h;
}

std::uint64_t hash_roi(const RoiFeature& roi) { return hash_ids(roi.argmax); }

CheckResult op_check(std::string label, const TensorFn& fwd, const BackwardFn& bwd, const Tensor& x,
                     std::uint64_t seed, const SignatureFn& sig = {}) {
  return {std::move(label), gradcheck_op(fwd, bwd, x, seed, {}, sig), kLayerTolerance};
}

Tensor log_softmax_rows(const Tensor& scores) {
  Tensor out = softmax_rows(scores);
  for (double& v : out.data()) v = std::log(v);
  return out;
}

}  // namespace

std::vector<CheckResult> layer_gradchecks(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CheckResult> out;

  {  // conv2d, both operands
    const Tensor x = random_tensor({6, 6, 2}, rng);
    const Tensor k = random_tensor({3, 3, 2, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    out.push_back(op_check(
        "conv2d.input", [&](const Tensor& v) { return conv2d(v, k, b, 1, 1); },
        [&](const Tensor& v, const Tensor& g) { return conv2d_backward(v, k, g, true, 1, 1).input; }, x, seed + 1));
    out.push_back(op_check(
        "conv2d.kernels", [&](const Tensor& v) { return conv2d(x, v, b, 1, 1); },
        [&](const Tensor& v, const Tensor& g) { return conv2d_backward(x, v, g, true, 1, 1).kernels; }, k,
        seed + 2));
    out.push_back(op_check(
        "conv2d.bias", [&](const Tensor& v) { return conv2d(x, k, v, 1, 1); },
        [&](const Tensor&, const Tensor& g) { return conv2d_backward(x, k, g, true, 1, 1).bias; }, b, seed + 3));
    out.push_back(op_check(
        "conv2d.strided", [&](const Tensor& v) { return conv2d(v, k, b, 2, 0); },
        [&](const Tensor& v, const Tensor& g) { return conv2d_backward(v, k, g, true, 2, 0).input; }, x, seed + 4));
  }
  {
    const Tensor x = signed_away_from_zero({5, 4, 3}, rng);
    out.push_back(op_check("relu", relu, relu_backward, x, seed + 5));
  }
  {
    const Tensor x = random_tensor({4, 4, 2}, rng);
    out.push_back(op_check(
        "maxpool2", [](const Tensor& v) { return maxpool2(v).output; },
        [](const Tensor& v, const Tensor& g) { return maxpool2_backward(maxpool2(v), g); }, x, seed + 6,
        [](const Tensor& v) {
          std::uint64_t h = 0;
          for (std::size_t a : maxpool2(v).argmax) h = Rng::mix(h ^ a);
          return h;
        }));
  }
  {
    const Tensor x = random_tensor({4}, rng);
    const Tensor w = random_tensor({4, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    out.push_back(op_check(
        "linear.input", [&](const Tensor& v) { return linear(v, w, b); },
        [&](const Tensor& v, const Tensor& g) { return linear_backward(v, w, g).input; }, x, seed + 7));
    out.push_back(op_check(
        "linear.weights", [&](const Tensor& v) { return linear(x, v, b); },
        [&](const Tensor& v, const Tensor& g) { return linear_backward(x, v, g).weights; }, w, seed + 8));
    out.push_back(op_check(
        "linear.bias", [&](const Tensor& v) { return linear(x, w, v); },
        [&](const Tensor&, const Tensor& g) { return linear_backward(x, w, g).bias; }, b, seed + 9));
  }
  {  // softmax + log-loss
    const Tensor x = random_tensor({5}, rng, -3.0, 3.0);
    const int label = 2;
    const ScalarFn f = [&](const Tensor& v) { return -std::log(softmax(v.data())[label]); };
    Tensor grad({5}, softmax(x.data()));
    grad[label] -= 1.0;
    out.push_back({"softmax_log_loss", gradcheck(f, grad, x), kLayerTolerance});
  }
  {  // ROI pooling on a random 8 x 8 x 3 map
    const Tensor map = random_tensor({8, 8, 3}, rng);
    std::vector<PixelIndex> pixels;
    for (PixelIndex p = 0; p < 256; ++p) {
      const int x = p % 16, y = p / 16;
      if (x >= 2 && y >= 3 && x < 14 && rng.uniform() < 0.6) pixels.push_back(p);
    }
    const ConvRegionMask mask = rasterize_mask(RegionMask(pixels, 16, 16), 16, 16, 8, 8);
    const PooledSize size{3, 3};
    out.push_back(op_check(
        "roi_pool.freeform", [&](const Tensor& v) { return freeform_roi_pool_forward(v, mask, size).values; },
        [&](const Tensor& v, const Tensor& g) {
          return freeform_roi_pool_backward(freeform_roi_pool_forward(v, mask, size), g, v.shape());
        },
        map, seed + 10, [&](const Tensor& v) { return hash_roi(freeform_roi_pool_forward(v, mask, size)); }));
    const BBox box{1, 2, 6, 7};
    out.push_back(op_check(
        "roi_pool.bbox", [&](const Tensor& v) { return bbox_roi_pool(v, box, size).values; },
        [&](const Tensor& v, const Tensor& g) {
          return freeform_roi_pool_backward(bbox_roi_pool(v, box, size), g, v.shape());
        },
        map, seed + 11, [&](const Tensor& v) { return hash_roi(bbox_roi_pool(v, box, size)); }));
  }
  {  // region-level losses on random overlapping regions of a 12 x 12 image
    const int w = 12, h = 12, classes = 4;
    RegionSet regions = grid_proposals(w, h, {4, 8, 12}, 0.5);
    LabelMap gt(w, h);
    for (std::size_t p = 0; p < gt.size(); ++p) gt[p] = rng.uniform() < 0.1 ? kVoid : rng.uniform_int(0, classes - 1);
    const Tensor scores = random_tensor({regions.size(), static_cast<std::size_t>(classes)}, rng, -2.0, 2.0);
    const LossPartition partition = build_loss_partition(regions, gt);
    const SignatureFn winners = [&](const Tensor& s) { return hash_ids(r2p_forward(s, regions).winner); };
    const SignatureFn prob_winners = [&](const Tensor& s) {
      return hash_ids(r2p_forward(log_softmax_rows(s), regions).winner);
    };
    for (LossMode mode : {LossMode::kBalanced, LossMode::kUnbalanced}) {
      const ClassWeights cw = class_weights(mode, gt, classes);
      const std::string tag = "." + to_string(mode);
      out.push_back({"r2p_pixel_loss" + tag,
                     gradcheck([&](const Tensor& s) { return pixel_loss_naive(s, regions, gt, cw).value; },
                               pixel_loss_naive(scores, regions, gt, cw).grad, scores, {}, winners),
                     kLayerTolerance});
      out.push_back({"partitioned_loss" + tag,
                     gradcheck([&](const Tensor& s) { return pixel_loss_partitioned(s, regions, partition, cw).value; },
                               pixel_loss_partitioned(scores, regions, partition, cw).grad, scores, {}, winners),
                     kLayerTolerance});
      out.push_back({"softmax_then_max_loss" + tag,
                     gradcheck([&](const Tensor& s) { return softmax_then_max_loss(s, regions, partition, cw).value; },
                               softmax_then_max_loss(scores, regions, partition, cw).grad, scores, {}, prob_winners),
                     kLayerTolerance});
    }
    const std::vector<int> labels = assign_region_labels(regions, gt, {0.3, 0.0, kIgnore});
    out.push_back({"region_loss",
                   gradcheck([&](const Tensor& s) { return region_loss(s, labels).value; },
                             region_loss(scores, labels).grad, scores),
                   kLayerTolerance});
  }
  return out;
}

std::vector<ModelConfig> gradcheck_configs() {
  std::vector<ModelConfig> configs;
  for (LossMode loss : {LossMode::kBalanced, LossMode::kUnbalanced}) {
    for (Fusion fusion : {Fusion::kBoxOnly, Fusion::kRegionOnly, Fusion::kTied, Fusion::kSeparate}) {
      ModelConfig c;
      c.fusion = fusion;
      c.loss = loss;
      configs.push_back(c);
    }
  }
  ModelConfig smax;
  smax.softmax_order = SoftmaxOrder::kSoftmaxThenMax;
  configs.push_back(smax);
  ModelConfig base;
  base.arch = Architecture::kBaseline;
  base.fusion = Fusion::kBoxOnly;
  base.loss = LossMode::kUnbalanced;
  configs.push_back(base);
  return configs;
}

std::string config_label(const ModelConfig& c) {
  std::string label = "model." + to_string(c.arch) + "." + to_string(c.fusion);
  if (c.arch == Architecture::kEndToEnd) {
    label += "." + to_string(c.loss);
    if (c.softmax_order == SoftmaxOrder::kSoftmaxThenMax) label += ".softmax-then-max";
  }
  return label;
}

CheckResult model_gradcheck(const ModelConfig& config, std::uint64_t seed, std::size_t per_param,
                            double grad_scale) {
  SceneSpec spec;
  spec.width = 16;
  spec.height = 16;
  spec.num_classes = config.num_classes;
  spec.min_objects = 2;
  spec.max_objects = 3;
  spec.min_object_size = 4;
  spec.max_object_size = 10;
  spec.seed = seed;
  Scene scene = synthesize(spec, 0);
  for (std::uint64_t i = 1; scene.gt.class_counts(spec.num_classes)[static_cast<std::size_t>(spec.background_class)] ==
                                scene.gt.size();
       ++i) {
    scene = synthesize(spec, i);  // want at least two classes in view
  }
  const RegionSet regions = merge(grid_proposals(16, 16, {8, 16}, 0.5), ground_truth_regions(scene.gt));

  ModelConfig c = config;
  c.init_seed = seed;
  Model model(c);
  // Nonzero biases so no layer sits exactly at a relu kink.
  Rng rng(seed ^ 0x5eedULL);
  for (Param& p : model.params()) {
    if (p.value.rank() == 1) {
      for (double& v : p.value.data()) v = rng.uniform(-0.05, 0.1);
    }
  }
  LossInputs inputs;
  inputs.regions = &regions;
  inputs.gt = &scene.gt;
  const LossPartition partition = build_loss_partition(regions, scene.gt);
  inputs.partition = &partition;
  inputs.overlap = {0.5, 0.0, kIgnore};

  ForwardCache cache;
  const Tensor scores = model.forward(scene.image, regions, &cache);
  model.zero_grad();
  model.backward(cache, model_loss(c, scores, inputs).grad);

  auto loss_at = [&]() { return model_loss(c, model.forward(scene.image, regions), inputs).value; };
  auto signature_at = [&]() {
    ForwardCache probe;
    const Tensor s = model.forward(scene.image, regions, &probe);
    std::uint64_t h = model.routing_signature(probe);
    if (c.arch == Architecture::kEndToEnd) {
      const Tensor routed = c.softmax_order == SoftmaxOrder::kSoftmaxThenMax ? log_softmax_rows(s) : s;
      h = hash_ids(r2p_forward(routed, regions).winner, h);
    }
    return h;
  };

  CheckResult result{config_label(config), {}, kModelTolerance};
  std::uint64_t k = 0;
  for (Param& p : model.params()) {
    const Tensor original = p.value;
    Tensor analytic = p.grad;
    analytic *= grad_scale;
    GradcheckOptions options;
    options.coordinates = sample_coordinates(p.value.size(), per_param, seed + (++k));
    const GradcheckReport r = gradcheck(
        [&](const Tensor& v) {
          p.value = v;
          return loss_at();
        },
        analytic, original, options,
        [&](const Tensor& v) {
          p.value = v;
          return signature_at();
        });
    p.value = original;
    result.report.checked += r.checked;
    result.report.skipped.insert(result.report.skipped.end(), r.skipped.begin(), r.skipped.end());
    result.report.max_rel_error = std::max(result.report.max_rel_error, r.max_rel_error);
  }
  return result;
}

}  // namespace regseg
