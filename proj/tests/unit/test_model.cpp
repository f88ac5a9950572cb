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

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "regseg/checks.hpp"
#include "regseg/model.hpp"
#include "regseg/netpbm.hpp"

using namespace regseg;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config(Fusion fusion) {
  ModelConfig c;
  c.fusion = fusion;
  c.conv1_channels = 4;
  c.conv2_channels = 6;
  c.head_width = 8;
  c.num_classes = 3;
  c.pooled = {3, 3};
  return c;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "regseg_unit";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("parameter shapes follow the fusion mode") {
  const Model box(ModelConfig{});
  CHECK(box.param("conv1.w").value.shape() == std::vector<std::size_t>{3, 3, 3, 16});
  CHECK(box.param("conv2.w").value.shape() == std::vector<std::size_t>{3, 3, 16, 32});
  ModelConfig sep;
  sep.fusion = Fusion::kSeparate;
  CHECK(Model(sep).param("fc.w").value.shape() == std::vector<std::size_t>{2 * 6 * 6 * 32, 64});
  ModelConfig tied;
  tied.fusion = Fusion::kTied;
  CHECK(Model(tied).param("fc.w").value.shape() == std::vector<std::size_t>{6 * 6 * 32, 64});
  CHECK(Model(tied).param("cls.b").value.shape() == std::vector<std::size_t>{8});
  CHECK_THROWS_AS(box.param("nope"), std::out_of_range);
}

TEST_CASE("the baseline must pool boxes") {
  ModelConfig c;
  c.arch = Architecture::kBaseline;
  c.fusion = Fusion::kSeparate;
  CHECK_THROWS(c.validate());
}

TEST_CASE("initialization is seeded") {
  ModelConfig a = small_config(Fusion::kBoxOnly);
  ModelConfig b = a;
  b.init_seed = 2;
  CHECK(Model(a).param("fc.w").value == Model(a).param("fc.w").value);
  CHECK_FALSE(Model(a).param("fc.w").value == Model(b).param("fc.w").value);
}

TEST_CASE("tied fusion doubles box scores when masks are full boxes") {
  // Even-aligned square windows rasterize to their full boxes, so the
  // region and box representations coincide.
  Rng rng(6);
  const Tensor image = oracle::random_tensor({16, 16, 3}, rng, 0.0, 1.0);
  const RegionSet regions = grid_proposals(16, 16, {8}, 0.5);
  const Tensor box = Model(small_config(Fusion::kBoxOnly)).forward(image, regions);
  const Tensor tied = Model(small_config(Fusion::kTied)).forward(image, regions);
  const Tensor region = Model(small_config(Fusion::kRegionOnly)).forward(image, regions);
  REQUIRE(box.shape() == std::vector<std::size_t>{regions.size(), 3});
  for (std::size_t i = 0; i < box.size(); ++i) {
    CHECK(region[i] == box[i]);
    CHECK(tied[i] == doctest::Approx(2.0 * box[i]).epsilon(1e-12));
  }
}

TEST_CASE("config text round-trips") {
  ModelConfig c = small_config(Fusion::kTied);
  c.loss = LossMode::kUnbalanced;
  c.softmax_order = SoftmaxOrder::kSoftmaxThenMax;
  c.init_seed = 99;
  const ModelConfig back = parse_model_config(config_text(c));
  CHECK(config_text(back) == config_text(c));
  CHECK_THROWS(parse_model_config("arch endtoend\nwings 2\n"));
}

TEST_CASE("checkpoints round-trip bit-exactly and reject damage") {
  Model m(small_config(Fusion::kSeparate));
  m.param("fc.b").value[0] = 0.1 + 0.2;
  const fs::path path = temp_path("m.ckpt");
  m.save(path);
  const Model back = Model::load(path);
  CHECK(config_text(back.config()) == config_text(m.config()));
  for (std::size_t i = 0; i < m.params().size(); ++i) CHECK(back.params()[i].value == m.params()[i].value);

  std::vector<std::uint8_t> bytes = read_file(path);
  const fs::path bad = temp_path("bad.ckpt");
  write_file(bad, std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 3));
  CHECK_THROWS(Model::load(bad));
  bytes.push_back(0);
  write_file(bad, bytes);
  CHECK_THROWS(Model::load(bad));
  bytes.assign({'n', 'o', 'p', 'e'});
  write_file(bad, bytes);
  CHECK_THROWS(Model::load(bad));
}

TEST_CASE("baseline loss is the region loss of overlap labels") {
  Rng rng(7);
  ModelConfig c = small_config(Fusion::kBoxOnly);
  c.arch = Architecture::kBaseline;
  const RegionSet regions = grid_proposals(8, 8, {4}, 0.5);
  const LabelMap gt = oracle::random_labels(8, 8, 3, rng);
  const Tensor scores = oracle::random_tensor({regions.size(), 3}, rng);
  LossInputs in;
  in.regions = &regions;
  in.gt = &gt;
  in.overlap.pos_overlap = 0.5;
  const LossResult a = model_loss(c, scores, in);
  const LossResult b = region_loss(scores, assign_region_labels(regions, gt, in.overlap));
  CHECK(a.value == b.value);
  CHECK(a.grad == b.grad);
}

TEST_CASE("whole-model gradients match finite differences") {
  for (const ModelConfig& c : {ModelConfig{}, [] {
                                 ModelConfig t;
                                 t.fusion = Fusion::kTied;
                                 t.loss = LossMode::kUnbalanced;
                                 return t;
                               }()}) {
    const CheckResult r = model_gradcheck(c, 3, 4);
    INFO(r.label << " err=" << r.report.max_rel_error);
    CHECK(r.passed());
  }
}

TEST_CASE("a perturbed gradient fails the whole-model check") {
  const CheckResult r = model_gradcheck(ModelConfig{}, 3, 4, 1.001);
  CHECK_FALSE(r.passed());
}
