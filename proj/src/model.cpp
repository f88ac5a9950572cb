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


#include "regseg/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <stdexcept>

#include "regseg/random.hpp"

namespace regseg {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const std::array<Enum, N>& values, const char* what) {
  for (Enum v : values) {
    if (to_string(v) == text) return v;
  }
  throw std::invalid_argument(std::string("unknown ") + what + " '" + text + "'");
}

}  // namespace

std::string to_string(Architecture a) {
  return a == Architecture::kEndToEnd ? "endtoend" : "baseline";
}

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::kBoxOnly: return "box";
    case Fusion::kRegionOnly: return "region";
    case Fusion::kTied: return "tied";
    case Fusion::kSeparate: return "separate";
  }
  return "separate";
}

std::string to_string(SoftmaxOrder s) {
  return s == SoftmaxOrder::kMaxThenSoftmax ? "max-then-softmax" : "softmax-then-max";
}

Architecture parse_architecture(const std::string& text) {
  return parse_enum(text, std::array{Architecture::kEndToEnd, Architecture::kBaseline}, "architecture");
}

Fusion parse_fusion(const std::string& text) {
  return parse_enum(text, std::array{Fusion::kBoxOnly, Fusion::kRegionOnly, Fusion::kTied, Fusion::kSeparate},
                    "fusion mode");
}

SoftmaxOrder parse_softmax_order(const std::string& text) {
  return parse_enum(text, std::array{SoftmaxOrder::kMaxThenSoftmax, SoftmaxOrder::kSoftmaxThenMax},
                    "softmax order");
}

void ModelConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("model: need at least 2 classes");
  if (pooled.height < 1 || pooled.width < 1) throw std::invalid_argument("model: pooled size must be positive");
  if (conv1_channels < 1 || conv2_channels < 1 || head_width < 1) {
    throw std::invalid_argument("model: layer widths must be positive");
  }
  if (arch == Architecture::kBaseline && fusion != Fusion::kBoxOnly) {
    throw std::invalid_argument("model: the baseline pools bounding boxes only (fusion must be 'box')");
  }
}

std::size_t ModelConfig::pooled_features() const {
  return static_cast<std::size_t>(pooled.bins()) * static_cast<std::size_t>(conv2_channels);
}

std::size_t ModelConfig::head_input() const {
  return fusion == Fusion::kSeparate ? 2 * pooled_features() : pooled_features();
}

std::string config_text(const ModelConfig& c) {
  std::ostringstream os;
  os << "arch " << to_string(c.arch) << '\n'
     << "fusion " << to_string(c.fusion) << '\n'
     << "loss " << to_string(c.loss) << '\n'
     << "softmax_order " << to_string(c.softmax_order) << '\n'
     << "pooled " << c.pooled.height << ' ' << c.pooled.width << '\n'
     << "conv1_channels " << c.conv1_channels << '\n'
     << "conv2_channels " << c.conv2_channels << '\n'
     << "head_width " << c.head_width << '\n'
     << "classes " << c.num_classes << '\n'
     << "init_seed " << c.init_seed << '\n';
  return os.str();
}

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key, value;
    ls >> key;
    if (key.empty()) continue;
    if (key == "pooled") {
      ls >> c.pooled.height >> c.pooled.width;
    } else {
      ls >> value;
      if (key == "arch") c.arch = parse_architecture(value);
      else if (key == "fusion") c.fusion = parse_fusion(value);
      else if (key == "loss") c.loss = parse_loss_mode(value);
      else if (key == "softmax_order") c.softmax_order = parse_softmax_order(value);
      else if (key == "conv1_channels") c.conv1_channels = std::stoi(value);
      else if (key == "conv2_channels") c.conv2_channels = std::stoi(value);
      else if (key == "head_width") c.head_width = std::stoi(value);
      else if (key == "classes") c.num_classes = std::stoi(value);
      else if (key == "init_seed") c.init_seed = std::stoull(value);
      else throw std::invalid_argument("model config: unknown key '" + key + "'");
    }
    if (ls.fail()) throw std::invalid_argument("model config: bad line '" + line + "'");
  }
  c.validate();
  return c;
}

// --- parameters ---------------------------------------------------------------

namespace {

Tensor glorot(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

BBox fm_box(const BBox& b) {
  const int s = ModelConfig::kStride;
  return {b.x0 / s, b.y0 / s, b.x1 / s, b.y1 / s};
}

// Copies each pooled feature into row `r` of `dst` starting at `offset`.
void put_row(Tensor& dst, std::size_t r, std::size_t offset, const Tensor& values) {
  std::copy(values.raw(), values.raw() + values.size(), dst.raw() + r * dst.dim(1) + offset);
}

Tensor take_row(const Tensor& src, std::size_t r, std::size_t offset, const std::vector<std::size_t>& shape) {
  Tensor out(shape);
  const double* from = src.raw() + r * src.dim(1) + offset;
  std::copy(from, from + out.size(), out.raw());
  return out;
}

}  // namespace

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.init_seed);
  const auto c1 = static_cast<std::size_t>(config_.conv1_channels);
  const auto c2 = static_cast<std::size_t>(config_.conv2_channels);
  const auto hw = static_cast<std::size_t>(config_.head_width);
  const auto nc = static_cast<std::size_t>(config_.num_classes);
  const std::size_t in = config_.head_input();
  params_.emplace_back("conv1.w", glorot({3, 3, 3, c1}, 9 * 3, 9 * c1, rng));
  params_.emplace_back("conv1.b", Tensor({c1}));
  params_.emplace_back("conv2.w", glorot({3, 3, c1, c2}, 9 * c1, 9 * c2, rng));
  params_.emplace_back("conv2.b", Tensor({c2}));
  params_.emplace_back("fc.w", glorot({in, hw}, in, hw, rng));
  params_.emplace_back("fc.b", Tensor({hw}));
  params_.emplace_back("cls.w", glorot({hw, nc}, hw, nc, rng));
  params_.emplace_back("cls.b", Tensor({nc}));
}

Param& Model::param(const std::string& name) {
  for (Param& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("model has no parameter '" + name + "'");
}

const Param& Model::param(const std::string& name) const {
  return const_cast<Model*>(this)->param(name);
}

void Model::zero_grad() {
  for (Param& p : params_) p.zero_grad();
}

Tensor Model::forward(const Tensor& image, const RegionSet& regions, ForwardCache* cache) const {
  if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("model: image must be H x W x 3");
  const int w = static_cast<int>(image.dim(1)), h = static_cast<int>(image.dim(0));
  if (regions.width != w || regions.height != h) {
    throw std::invalid_argument("model: region set is for a different image size");
  }
  if (regions.empty()) throw std::invalid_argument("model: no regions");
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.image = image;
  c.region_count = regions.size();

  c.conv1_out = conv2d(image, param("conv1.w").value, param("conv1.b").value, 1, 1);
  c.pool1 = maxpool2(relu(c.conv1_out));
  c.conv2_in = c.pool1.output;
  c.conv2_out = conv2d(c.conv2_in, param("conv2.w").value, param("conv2.b").value, 1, 1);
  c.convmap = relu(c.conv2_out);
  const int fw = static_cast<int>(c.convmap.dim(1)), fh = static_cast<int>(c.convmap.dim(0));

  const bool use_region = config_.fusion != Fusion::kBoxOnly;
  const bool use_box = config_.fusion != Fusion::kRegionOnly;
  for (const RegionMask& r : regions.regions) {
    if (use_region) {
      c.region_rois.push_back(freeform_roi_pool_forward(c.convmap, rasterize_mask(r, w, h, fw, fh), config_.pooled));
    }
    if (use_box) c.box_rois.push_back(bbox_roi_pool(c.convmap, fm_box(r.bbox()), config_.pooled));
  }

  const std::size_t n = regions.size();
  const std::size_t f = config_.pooled_features();
  auto stack = [&](const std::vector<RoiFeature>& rois) {
    Tensor t({n, f});
    for (std::size_t r = 0; r < n; ++r) put_row(t, r, 0, rois[r].values);
    return t;
  };
  switch (config_.fusion) {
    case Fusion::kBoxOnly: c.head_in.push_back(stack(c.box_rois)); break;
    case Fusion::kRegionOnly: c.head_in.push_back(stack(c.region_rois)); break;
    case Fusion::kTied:
      c.head_in.push_back(stack(c.region_rois));
      c.head_in.push_back(stack(c.box_rois));
      break;
    case Fusion::kSeparate: {
      Tensor t({n, 2 * f});
      for (std::size_t r = 0; r < n; ++r) {
        put_row(t, r, 0, c.region_rois[r].values);
        put_row(t, r, f, c.box_rois[r].values);
      }
      c.head_in.push_back(std::move(t));
      break;
    }
  }

  c.scores = Tensor({n, static_cast<std::size_t>(config_.num_classes)});
  for (const Tensor& x : c.head_in) {
    c.fc_out.push_back(linear(x, param("fc.w").value, param("fc.b").value));
    c.hidden.push_back(relu(c.fc_out.back()));
    c.scores += linear(c.hidden.back(), param("cls.w").value, param("cls.b").value);
  }
  return c.scores;
}

void Model::backward(const ForwardCache& c, const Tensor& grad_scores) {
  if (c.head_in.empty()) throw std::invalid_argument("model backward: empty forward cache");
  if (!grad_scores.same_shape(c.scores)) {
    throw ShapeError("model backward: grad " + grad_scores.shape_string() + " does not match scores " +
                     c.scores.shape_string());
  }
  if (c.head_in[0].dim(1) != config_.head_input()) {
    throw std::invalid_argument("model backward: cache was produced by a different configuration");
  }
  const std::size_t n = c.region_count;
  const std::size_t f = config_.pooled_features();
  const std::vector<std::size_t> roi_shape{static_cast<std::size_t>(config_.pooled.height),
                                           static_cast<std::size_t>(config_.pooled.width),
                                           static_cast<std::size_t>(config_.conv2_channels)};
  Tensor grad_convmap = Tensor::zeros_like(c.convmap);
  for (std::size_t branch = 0; branch < c.head_in.size(); ++branch) {
    LinearGrads cls = linear_backward(c.hidden[branch], param("cls.w").value, grad_scores);
    param("cls.w").grad += cls.weights;
    param("cls.b").grad += cls.bias;
    LinearGrads fc = linear_backward(c.head_in[branch], param("fc.w").value,
                                     relu_backward(c.fc_out[branch], cls.input));
    param("fc.w").grad += fc.weights;
    param("fc.b").grad += fc.bias;

    // Which pooled features this branch saw, and where in the row they sit.
    std::vector<std::pair<const std::vector<RoiFeature>*, std::size_t>> parts;
    switch (config_.fusion) {
      case Fusion::kBoxOnly: parts = {{&c.box_rois, 0}}; break;
      case Fusion::kRegionOnly: parts = {{&c.region_rois, 0}}; break;
      case Fusion::kTied: parts = {{branch == 0 ? &c.region_rois : &c.box_rois, 0}}; break;
      case Fusion::kSeparate: parts = {{&c.region_rois, 0}, {&c.box_rois, f}}; break;
    }
    for (const auto& [rois, offset] : parts) {
      for (std::size_t r = 0; r < n; ++r) {
        freeform_roi_pool_backward_into((*rois)[r], take_row(fc.input, r, offset, roi_shape), grad_convmap);
      }
    }
  }

  Conv2dGrads g2 = conv2d_backward(c.conv2_in, param("conv2.w").value,
                                   relu_backward(c.conv2_out, grad_convmap), true, 1, 1, true);
  param("conv2.w").grad += g2.kernels;
  param("conv2.b").grad += g2.bias;
  Tensor g1 = relu_backward(c.conv1_out, maxpool2_backward(c.pool1, g2.input));
  Conv2dGrads g1c = conv2d_backward(c.image, param("conv1.w").value, g1, true, 1, 1, false);
  param("conv1.w").grad += g1c.kernels;
  param("conv1.b").grad += g1c.bias;
}

Prediction Model::predict_from_scores(const Tensor& scores, const RegionSet& regions) const {
  if (config_.arch == Architecture::kEndToEnd && config_.softmax_order == SoftmaxOrder::kMaxThenSoftmax) {
    return predict_endtoend(r2p_forward(scores, regions));
  }
  return predict_baseline(scores, regions);
}

Prediction Model::predict(const Tensor& image, const RegionSet& regions) const {
  return predict_from_scores(forward(image, regions), regions);
}

std::uint64_t Model::routing_signature(const ForwardCache& c) const {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  auto mix = [&](std::uint64_t v) { h = Rng::mix(h ^ v); };
  auto gates = [&](const Tensor& t) {
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      word = (word << 1) | (t[i] > 0.0 ? 1U : 0U);
      if (i % 64 == 63) mix(word), word = 0;
    }
    mix(word);
  };
  gates(c.conv1_out);
  for (std::size_t a : c.pool1.argmax) mix(a);
  gates(c.conv2_out);
  for (const auto* rois : {&c.region_rois, &c.box_rois}) {
    for (const RoiFeature& roi : *rois) {
      for (std::int32_t a : roi.argmax) mix(static_cast<std::uint64_t>(a));
    }
  }
  for (const Tensor& t : c.fc_out) gates(t);
  return h;
}

// --- checkpoints --------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::string string() {
    const auto len = static_cast<std::size_t>(uint(4));
    need(len);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(source_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

void Model::save(const std::filesystem::path& path) const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_string(out, config_text(config_));
  put_u32(out, static_cast<std::uint32_t>(params_.size()));
  for (const Param& p : params_) {
    put_string(out, p.name);
    put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put_u64(out, d);
    for (double v : p.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write checkpoint " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("short write to " + path.string());
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()};
  ByteReader in(bytes, path.string());
  for (char m : kMagic) {
    if (static_cast<char>(in.uint(1)) != m) in.fail("not a regseg checkpoint");
  }
  if (in.uint(4) != kVersion) in.fail("unsupported checkpoint version");
  Model model(parse_model_config(in.string()));
  const auto count = in.uint(4);
  if (count != model.params_.size()) in.fail("parameter count does not match the configuration");
  for (Param& p : model.params_) {
    if (in.string() != p.name) in.fail("expected parameter '" + p.name + "'");
    std::vector<std::size_t> shape(static_cast<std::size_t>(in.uint(4)));
    for (std::size_t& d : shape) d = static_cast<std::size_t>(in.uint(8));
    if (shape != p.value.shape()) in.fail("parameter '" + p.name + "' has the wrong shape");
    for (double& v : p.value.data()) v = std::bit_cast<double>(in.uint(8));
    if (!p.value.all_finite()) in.fail("parameter '" + p.name + "' holds non-finite values");
  }
  if (!in.done()) in.fail("trailing bytes");
  return model;
}

// --- loss -----------------------------------------------------------------------

LossResult model_loss(const ModelConfig& config, const Tensor& scores, const LossInputs& inputs) {
  if (!inputs.regions || !inputs.gt) throw std::invalid_argument("model_loss: regions and gt are required");
  if (config.arch == Architecture::kBaseline) {
    return region_loss(scores, assign_region_labels(*inputs.regions, *inputs.gt, inputs.overlap));
  }
  LossPartition built;
  const LossPartition* partition = inputs.partition;
  if (!partition) {
    built = build_loss_partition(*inputs.regions, *inputs.gt);
    partition = &built;
  }
  const ClassWeights w = class_weights(config.loss, *inputs.gt, config.num_classes);
  if (config.softmax_order == SoftmaxOrder::kSoftmaxThenMax) {
    return softmax_then_max_loss(scores, *inputs.regions, *partition, w);
  }
  return pixel_loss_partitioned(scores, *inputs.regions, *partition, w);
}

}  // namespace regseg
