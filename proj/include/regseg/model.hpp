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
#include <filesystem>
#include <string>
#include <vector>

#include "regseg/layers.hpp"
#include "regseg/losses.hpp"
#include "regseg/region_to_pixel.hpp"
#include "regseg/regions.hpp"
#include "regseg/roi_pooling.hpp"
#include "regseg/tensor.hpp"

namespace regseg {

enum class Architecture {
  kEndToEnd,  // region-to-pixel layer + pixel loss
  kBaseline,  // region classification with a region loss
};

/// Which pooled representation feeds the classifier.
enum class Fusion {
  kBoxOnly,
  kRegionOnly,
  kTied,      // one head applied to both; classification scores added
  kSeparate,  // concatenated features into a wider first layer
};

enum class SoftmaxOrder { kMaxThenSoftmax, kSoftmaxThenMax };

std::string to_string(Architecture a);
std::string to_string(Fusion f);
std::string to_string(SoftmaxOrder s);
Architecture parse_architecture(const std::string& text);
Fusion parse_fusion(const std::string& text);
SoftmaxOrder parse_softmax_order(const std::string& text);

struct ModelConfig {
  Architecture arch = Architecture::kEndToEnd;
  Fusion fusion = Fusion::kSeparate;
  LossMode loss = LossMode::kBalanced;
  SoftmaxOrder softmax_order = SoftmaxOrder::kMaxThenSoftmax;
  PooledSize pooled;
  int conv1_channels = 16;
  int conv2_channels = 32;
  int head_width = 64;
  int num_classes = 8;
  std::uint64_t init_seed = 1;

  void validate() const;
  /// Width of one pooled representation.
  std::size_t pooled_features() const;
  /// Input width of the first fully-connected layer.
  std::size_t head_input() const;
  /// Total downsampling of the backbone.
  static constexpr int kStride = 2;
};

/// `key value` lines, one per field.
std::string config_text(const ModelConfig& config);
ModelConfig parse_model_config(const std::string& text);

/// Everything backward needs from one forward pass.
struct ForwardCache {
  Tensor image;
  Tensor conv1_out;  // pre-activation
  MaxPoolRecord pool1;
  Tensor conv2_in;  // pooled relu output
  Tensor conv2_out;
  Tensor convmap;  // relu(conv2_out)
  std::vector<RoiFeature> region_rois;
  std::vector<RoiFeature> box_rois;
  // One entry for box-only, region-only and separate; two (region, box) for tied.
  std::vector<Tensor> head_in;   // R x head_input
  std::vector<Tensor> fc_out;    // R x head_width, pre-activation
  std::vector<Tensor> hidden;    // relu(fc_out)
  Tensor scores;                 // R x C
  std::size_t region_count = 0;
};

class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  Param& param(const std::string& name);
  const Param& param(const std::string& name) const;

  /// Region scores (R x C). Fills `cache` when given.
  Tensor forward(const Tensor& image, const RegionSet& regions, ForwardCache* cache = nullptr) const;
  /// Adds d(loss)/d(param) into every Param's grad.
  void backward(const ForwardCache& cache, const Tensor& grad_scores);
  void zero_grad();

  /// Label map from region scores, following the architecture and softmax order.
  Prediction predict_from_scores(const Tensor& scores, const RegionSet& regions) const;
  Prediction predict(const Tensor& image, const RegionSet& regions) const;

  /// Hash of every discrete routing choice in a cached forward pass.
  std::uint64_t routing_signature(const ForwardCache& cache) const;

  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  std::vector<Param> params_;
};

/// What the training loss of one image needs beyond the scores.
struct LossInputs {
  const RegionSet* regions = nullptr;
  const LabelMap* gt = nullptr;
  const LossPartition* partition = nullptr;  // end-to-end only; built when null
  OverlapPolicy overlap;                     // baseline only
};

/// The training loss selected by the config: pixel loss (balanced or not,
/// either softmax order) for end-to-end, region loss for the baseline.
LossResult model_loss(const ModelConfig& config, const Tensor& scores, const LossInputs& inputs);

}  // namespace regseg
