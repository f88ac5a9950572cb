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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "regseg/netpbm.hpp"
#include "regseg/synth.hpp"

using namespace regseg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "regseg_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("PPM round-trips images quantized to 1/255") {
  Tensor img({2, 3, 3});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = double(i * 13 % 256) / 255.0;
  CHECK(decode_ppm(encode_ppm(img)) == img);
}

TEST_CASE("PGM round-trips labels including VOID") {
  const LabelMap l(3, 2, std::vector<int>{0, 1, 2, kVoid, 7, 0});
  CHECK(decode_pgm(encode_pgm(l)) == l);
}

TEST_CASE("netpbm headers with comments parse") {
  const std::string text = "P5\n# made by hand\n2 1\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.push_back(3);
  bytes.push_back(kVoid);
  CHECK(decode_pgm(bytes) == LabelMap(2, 1, std::vector<int>{3, kVoid}));
}

TEST_CASE("malformed netpbm input reports where it failed") {
  const std::string wrong_magic = "P6\n1 1\n255\nabc";
  try {
    decode_pgm(std::vector<std::uint8_t>(wrong_magic.begin(), wrong_magic.end()));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 0);
  }
  const std::string truncated = "P5\n4 4\n255\nab";
  CHECK_THROWS_AS(decode_pgm(std::vector<std::uint8_t>(truncated.begin(), truncated.end())), ParseError);
  const std::string maxval = "P5\n1 1\n65535\nab";
  CHECK_THROWS_AS(decode_pgm(std::vector<std::uint8_t>(maxval.begin(), maxval.end())), ParseError);
}

TEST_CASE("scenes are deterministic in seed and index") {
  SceneSpec spec;
  const Scene a = synthesize(spec, 5);
  CHECK(a.image == synthesize(spec, 5).image);
  CHECK(a.gt == synthesize(spec, 5).gt);
  CHECK_FALSE(a.image == synthesize(spec, 6).image);
  spec.seed = 2;
  CHECK_FALSE(a.image == synthesize(spec, 5).image);
}

TEST_CASE("scene pixels are valid 8-bit values and labels are in range") {
  const SceneSpec spec;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Scene s = synthesize(spec, i);
    CHECK(s.image.shape() == std::vector<std::size_t>{32, 32, 3});
    for (std::size_t k = 0; k < s.image.size(); ++k) {
      const double v = s.image[k] * 255.0;
      CHECK(v == std::round(v));
      CHECK(v >= 0.0);
      CHECK(v <= 255.0);
    }
    for (int l : s.gt.labels()) CHECK((l >= 0 && l < spec.num_classes));
  }
}

TEST_CASE("class pixel frequencies fall with class rank") {
  const SceneSpec spec;
  std::vector<double> total(8, 0.0);
  for (std::uint64_t i = 0; i < 3000; ++i) {
    const auto counts = synthesize(spec, i).gt.class_counts(8);
    for (int c = 0; c < 8; ++c) total[std::size_t(c)] += double(counts[std::size_t(c)]);
  }
  for (int c = 2; c < 8; ++c) CHECK(total[std::size_t(c)] < total[std::size_t(c - 1)]);
  CHECK(total[0] > total[1]);
  // Rank 1 against rank 2 under exponent 2: about 4x, with area noise.
  CHECK(total[1] / total[2] > 2.5);
  CHECK(total[1] / total[2] < 6.0);
}

TEST_CASE("invalid scene specs are rejected") {
  SceneSpec spec;
  spec.min_objects = 5;
  spec.max_objects = 2;
  CHECK_THROWS(spec.validate());
  spec = SceneSpec{};
  spec.num_classes = 1;
  CHECK_THROWS(spec.validate());
}

TEST_CASE("datasets split off the last scenes for testing and round-trip on disk") {
  SceneSpec spec;
  spec.width = 20;
  spec.height = 16;
  const Dataset ds = make_dataset(spec, 7, 2);
  CHECK(ds.train == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(ds.test == std::vector<std::size_t>{5, 6});
  const fs::path dir = fresh_dir("ds");
  write_dataset(dir, ds);
  const Dataset back = read_dataset(dir);
  CHECK(manifest_text(back) == manifest_text(ds));
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(back.scenes[i].image == ds.scenes[i].image);
    CHECK(back.scenes[i].gt == ds.scenes[i].gt);
  }
}

TEST_CASE("a manifest whose spec was edited is rejected") {
  SceneSpec spec;
  spec.width = 16;
  spec.height = 16;
  const fs::path dir = fresh_dir("edited");
  write_dataset(dir, make_dataset(spec, 2, 1));
  std::ifstream in(dir / "manifest.txt");
  std::stringstream text;
  text << in.rdbuf();
  in.close();
  std::string s = text.str();
  const auto pos = s.find("color_noise");
  REQUIRE(pos != std::string::npos);
  s.replace(pos, s.find('\n', pos) - pos, "color_noise 0.5");
  std::ofstream(dir / "manifest.txt") << s;
  try {
    read_dataset(dir);
    FAIL("expected a hash mismatch");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("hash") != std::string::npos);
  }
}

TEST_CASE("colorized labels use the palette") {
  const auto palette = default_palette(3);
  const Tensor img = colorize_labels(LabelMap(1, 1, 2), palette);
  CHECK(img.at(0, 0, 0) == palette[2][0] / 255.0);
}
