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


#include "regseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "regseg/netpbm.hpp"
#include "regseg/random.hpp"

namespace regseg {

std::string to_string(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kRectangle: return "rectangle";
    case ShapeFamily::kDisc: return "disc";
    case ShapeFamily::kTriangle: return "triangle";
  }
  return "rectangle";
}

namespace {

ShapeFamily parse_shape(const std::string& text) {
  for (auto f : {ShapeFamily::kRectangle, ShapeFamily::kDisc, ShapeFamily::kTriangle}) {
    if (to_string(f) == text) return f;
  }
  throw std::invalid_argument("unknown shape family '" + text + "'");
}

std::string spec_text(const SceneSpec& spec) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "width " << spec.width << '\n'
     << "height " << spec.height << '\n'
     << "classes " << spec.num_classes << '\n'
     << "frequency_exponent " << spec.frequency_exponent << '\n'
     << "objects " << spec.min_objects << ' ' << spec.max_objects << '\n'
     << "object_size " << spec.min_object_size << ' ' << spec.max_object_size << '\n'
     << "background " << spec.background_class << '\n'
     << "color_noise " << spec.color_noise << '\n'
     << "object_jitter " << spec.object_jitter << '\n'
     << "shading " << spec.shading << '\n'
     << "seed " << spec.seed << '\n';
  const auto appearance = spec.appearance.empty()
                              ? default_appearance(spec.num_classes, spec.background_class)
                              : spec.appearance;
  for (std::size_t c = 0; c < appearance.size(); ++c) {
    os << "class " << c << ' ' << to_string(appearance[c].shape) << ' '
       << appearance[c].color[0] << ' ' << appearance[c].color[1] << ' '
       << appearance[c].color[2] << '\n';
  }
  return os.str();
}

double quantize(double v) { return std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

bool inside_shape(ShapeFamily shape, double x, double y, double cx, double cy, double w, double h) {
  switch (shape) {
    case ShapeFamily::kRectangle:
      return std::abs(x - cx) <= w / 2 && std::abs(y - cy) <= h / 2;
    case ShapeFamily::kDisc: {
      const double r = w / 2;
      return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
    }
    case ShapeFamily::kTriangle: {
      // Apex up, base at the bottom of a w x h box.
      const double top = cy - h / 2;
      const double t = (y - top) / h;
      return t >= 0.0 && t <= 1.0 && std::abs(x - cx) <= t * w / 2;
    }
  }
  return false;
}

// Linear brightness ramp: `amplitude` from one side of an extent to the other.
struct Shading {
  double gx = 0.0, gy = 0.0;
  double at(double dx, double dy) const { return gx * dx + gy * dy; }
};

Shading random_shading(Rng& rng, double amplitude, double extent) {
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double slope = amplitude / std::max(extent, 1.0);
  return {slope * std::cos(angle), slope * std::sin(angle)};
}

}  // namespace

void SceneSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("scene spec: need at least 2 classes");
  if (num_classes > 254) throw std::invalid_argument("scene spec: class ids must fit below the VOID byte");
  if (width < 16 || height < 16) throw std::invalid_argument("scene spec: image must be at least 16x16");
  if (background_class < 0 || background_class >= num_classes) {
    throw std::invalid_argument("scene spec: background class out of range");
  }
  if (min_objects < 0 || max_objects < min_objects) throw std::invalid_argument("scene spec: bad object count range");
  if (min_object_size < 1 || max_object_size < min_object_size) {
    throw std::invalid_argument("scene spec: bad object size range");
  }
  if (color_noise < 0.0 || object_jitter < 0.0 || shading < 0.0) throw std::invalid_argument("scene spec: negative noise");
  if (!appearance.empty() && static_cast<int>(appearance.size()) != num_classes) {
    throw std::invalid_argument("scene spec: appearance must list every class");
  }
}

std::uint64_t SceneSpec::hash() const {
  // FNV-1a over the canonical text form.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : spec_text(*this)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<ClassAppearance> default_appearance(int num_classes, int background_class) {
  // Object colors come in pairs; the two classes of a pair differ in shape.
  static constexpr std::array<std::array<double, 3>, 5> kColors{{
      {0.85, 0.25, 0.20},
      {0.20, 0.70, 0.30},
      {0.25, 0.35, 0.85},
      {0.85, 0.75, 0.20},
      {0.70, 0.30, 0.75},
  }};
  static constexpr std::array<ShapeFamily, 3> kShapes{ShapeFamily::kRectangle, ShapeFamily::kDisc,
                                                      ShapeFamily::kTriangle};
  std::vector<ClassAppearance> out(static_cast<std::size_t>(num_classes));
  int k = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (c == background_class) {
      out[static_cast<std::size_t>(c)] = {ShapeFamily::kRectangle, {0.50, 0.50, 0.50}};
      continue;
    }
    out[static_cast<std::size_t>(c)] = {kShapes[static_cast<std::size_t>(k % 3)],
                                        kColors[static_cast<std::size_t>((k / 2) % 5)]};
    ++k;
  }
  return out;
}

Scene synthesize(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  const auto appearance = spec.appearance.empty()
                              ? default_appearance(spec.num_classes, spec.background_class)
                              : spec.appearance;
  Rng rng = Rng::derive(spec.seed, index);
  const auto w = static_cast<std::size_t>(spec.width);
  const auto h = static_cast<std::size_t>(spec.height);

  std::vector<int> object_classes;
  std::vector<double> cumulative;
  double total = 0.0;
  int rank = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    if (c == spec.background_class) continue;
    total += std::pow(static_cast<double>(++rank), -spec.frequency_exponent);
    cumulative.push_back(total);
    object_classes.push_back(c);
  }

  Scene scene{Tensor({h, w, 3}), LabelMap(spec.width, spec.height, spec.background_class)};
  std::vector<std::array<double, 3>> base(w * h, appearance[static_cast<std::size_t>(spec.background_class)].color);
  const Shading backdrop = random_shading(rng, spec.shading, std::max(spec.width, spec.height));
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double s = backdrop.at(x - spec.width / 2.0, y - spec.height / 2.0);
      for (double& ch : base[y * w + x]) ch += s;
    }
  }

  const int objects = rng.uniform_int(spec.min_objects, spec.max_objects);
  for (int o = 0; o < objects; ++o) {
    const double u = rng.uniform() * total;
    const auto pick = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const int cls = object_classes[std::min(pick, object_classes.size() - 1)];
    const ClassAppearance& look = appearance[static_cast<std::size_t>(cls)];
    // Discs and triangles are enlarged so every family has the same expected area.
    const double area_scale = look.shape == ShapeFamily::kDisc       ? std::sqrt(4.0 / std::numbers::pi)
                              : look.shape == ShapeFamily::kTriangle ? std::sqrt(2.0)
                                                                     : 1.0;
    const double ow = area_scale * rng.uniform_int(spec.min_object_size, spec.max_object_size);
    const double oh = look.shape == ShapeFamily::kDisc
                          ? ow
                          : area_scale * rng.uniform_int(spec.min_object_size, spec.max_object_size);
    const double cx = rng.uniform(0.0, spec.width - 1.0);
    const double cy = rng.uniform(0.0, spec.height - 1.0);
    std::array<double, 3> color = look.color;
    for (double& ch : color) ch += rng.uniform(-spec.object_jitter, spec.object_jitter);
    const Shading shade = random_shading(rng, spec.shading, std::max(ow, oh));
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double px = static_cast<double>(x), py = static_cast<double>(y);
        if (!inside_shape(look.shape, px, py, cx, cy, ow, oh)) continue;
        scene.gt[y * w + x] = cls;  // later objects occlude earlier ones
        const double s = shade.at(px - cx, py - cy);
        for (std::size_t ch = 0; ch < 3; ++ch) base[y * w + x][ch] = color[ch] + s;
      }
    }
  }
  for (std::size_t p = 0; p < w * h; ++p) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      scene.image[p * 3 + ch] = quantize(base[p][ch] + spec.color_noise * rng.normal());
    }
  }
  return scene;
}

std::vector<Rgb> default_palette(int num_classes) {
  std::vector<Rgb> palette;
  for (int c = 0; c < num_classes; ++c) {
    // Spread hues with a golden-angle walk; brightness alternates.
    const double hue = std::fmod(c * 0.61803398875, 1.0) * 6.0;
    const double v = c % 2 == 0 ? 0.95 : 0.7;
    const double f = hue - std::floor(hue);
    const double p = v * 0.25, q = v * (1.0 - 0.75 * f), t = v * (0.25 + 0.75 * f);
    std::array<double, 3> rgb{};
    switch (static_cast<int>(hue)) {
      case 0: rgb = {v, t, p}; break;
      case 1: rgb = {q, v, p}; break;
      case 2: rgb = {p, v, t}; break;
      case 3: rgb = {p, q, v}; break;
      case 4: rgb = {t, p, v}; break;
      default: rgb = {v, p, q}; break;
    }
    Rgb px{};
    for (std::size_t i = 0; i < 3; ++i) px[i] = static_cast<std::uint8_t>(std::lround(rgb[i] * 255.0));
    // Keep every class visibly distinct from the VOID color.
    if (px == Rgb{0, 0, 0}) px = {16, 16, 16};
    palette.push_back(px);
  }
  return palette;
}

Tensor colorize_labels(const LabelMap& labels, const std::vector<Rgb>& palette) {
  Tensor image({static_cast<std::size_t>(labels.height()), static_cast<std::size_t>(labels.width()), 3});
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const int l = labels[p];
    if (l == kVoid) continue;  // black
    if (l < 0 || static_cast<std::size_t>(l) >= palette.size()) {
      throw std::out_of_range("colorize_labels: no palette entry for class " + std::to_string(l));
    }
    for (std::size_t ch = 0; ch < 3; ++ch) image[p * 3 + ch] = palette[static_cast<std::size_t>(l)][ch] / 255.0;
  }
  return image;
}

Dataset make_dataset(const SceneSpec& spec, std::size_t count, std::size_t test_count) {
  spec.validate();
  if (test_count > count) throw std::invalid_argument("make_dataset: test split larger than dataset");
  Dataset ds;
  ds.spec = spec;
  ds.scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ds.scenes.push_back(synthesize(spec, i));
    (i < count - test_count ? ds.train : ds.test).push_back(i);
  }
  return ds;
}

namespace {

std::string file_stem(std::size_t index) {
  std::ostringstream os;
  os << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

}  // namespace

std::string manifest_text(const Dataset& dataset) {
  std::ostringstream os;
  os << "regseg-dataset 1\n";
  os << spec_text(dataset.spec);
  os << "spec_hash " << std::hex << dataset.spec.hash() << std::dec << '\n';
  os << "count " << dataset.scenes.size() << '\n';
  os << "train";
  for (auto i : dataset.train) os << ' ' << i;
  os << "\ntest";
  for (auto i : dataset.test) os << ' ' << i;
  os << '\n';
  return os.str();
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "labels");
  for (std::size_t i = 0; i < dataset.scenes.size(); ++i) {
    write_image(dir / "images" / (file_stem(i) + ".ppm"), dataset.scenes[i].image);
    write_labels(dir / "labels" / (file_stem(i) + ".pgm"), dataset.scenes[i].gt);
  }
  std::ofstream out(dir / "manifest.txt", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << manifest_text(dataset);
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw std::runtime_error("no manifest.txt in " + dir.string());
  std::string line;
  if (!std::getline(in, line) || line != "regseg-dataset 1") {
    throw std::runtime_error("manifest: missing 'regseg-dataset 1' header");
  }
  Dataset ds;
  SceneSpec& spec = ds.spec;
  std::size_t count = 0;
  std::string declared_hash;
  std::vector<ClassAppearance> appearance;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key.empty()) continue;
    if (key == "width") ls >> spec.width;
    else if (key == "height") ls >> spec.height;
    else if (key == "classes") ls >> spec.num_classes;
    else if (key == "frequency_exponent") ls >> spec.frequency_exponent;
    else if (key == "objects") ls >> spec.min_objects >> spec.max_objects;
    else if (key == "object_size") ls >> spec.min_object_size >> spec.max_object_size;
    else if (key == "background") ls >> spec.background_class;
    else if (key == "color_noise") ls >> spec.color_noise;
    else if (key == "object_jitter") ls >> spec.object_jitter;
    else if (key == "shading") ls >> spec.shading;
    else if (key == "seed") ls >> spec.seed;
    else if (key == "class") {
      std::size_t id = 0;
      std::string shape;
      ClassAppearance a;
      ls >> id >> shape >> a.color[0] >> a.color[1] >> a.color[2];
      a.shape = parse_shape(shape);
      if (id != appearance.size()) throw std::runtime_error("manifest: class lines out of order");
      appearance.push_back(a);
    } else if (key == "spec_hash") ls >> declared_hash;
    else if (key == "count") ls >> count;
    else if (key == "train") for (std::size_t i; ls >> i;) ds.train.push_back(i);
    else if (key == "test") for (std::size_t i; ls >> i;) ds.test.push_back(i);
    else throw std::runtime_error("manifest: unknown key '" + key + "'");
    if (ls.fail() && !ls.eof()) throw std::runtime_error("manifest: bad value on line '" + line + "'");
  }
  spec.appearance = appearance;
  spec.validate();
  std::ostringstream hash;
  hash << std::hex << spec.hash();
  if (!declared_hash.empty() && declared_hash != hash.str()) {
    throw std::runtime_error("manifest: spec hash mismatch (" + declared_hash + " vs " + hash.str() + ")");
  }
  for (std::size_t i = 0; i < count; ++i) {
    Scene s{read_image(dir / "images" / (file_stem(i) + ".ppm")),
            read_labels(dir / "labels" / (file_stem(i) + ".pgm"))};
    if (s.gt.width() != static_cast<int>(s.image.dim(1)) || s.gt.height() != static_cast<int>(s.image.dim(0))) {
      throw std::runtime_error("dataset: image and labels " + file_stem(i) + " differ in size");
    }
    ds.scenes.push_back(std::move(s));
  }
  for (auto i : ds.train) {
    if (i >= count) throw std::runtime_error("manifest: train index out of range");
  }
  for (auto i : ds.test) {
    if (i >= count) throw std::runtime_error("manifest: test index out of range");
  }
  return ds;
}

}  // namespace regseg
