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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "regseg/regions.hpp"
#include "regseg/tensor.hpp"

namespace regseg {

enum class ShapeFamily { kRectangle, kDisc, kTriangle };

std::string to_string(ShapeFamily family);

struct ClassAppearance {
  ShapeFamily shape = ShapeFamily::kRectangle;
  std::array<double, 3> color{0.5, 0.5, 0.5};
};

/// Parameters of a synthetic scene family. Object classes are drawn with
/// probability proportional to rank^-frequency_exponent, rank 1 being the
/// lowest non-background class id.
struct SceneSpec {
  int width = 32;
  int height = 32;
  int num_classes = 8;
  double frequency_exponent = 2.0;
  int min_objects = 1;
  int max_objects = 4;
  int min_object_size = 5;
  int max_object_size = 18;
  int background_class = 0;
  double color_noise = 0.06;    // per-pixel Gaussian sigma
  double object_jitter = 0.05;  // per-object uniform color shift
  double shading = 0.2;         // brightness ramp across each object and the backdrop
  std::uint64_t seed = 1;
  /// Per-class shape family and mean color; filled by default_appearance when empty.
  std::vector<ClassAppearance> appearance;

  void validate() const;
  /// Stable hash of every field, used in dataset manifests.
  std::uint64_t hash() const;
};

/// Palette in which several class pairs share a color and differ only in
/// shape, so labeling requires more than per-pixel color.
std::vector<ClassAppearance> default_appearance(int num_classes, int background_class);

struct Scene {
  Tensor image;  // H x W x 3, values are multiples of 1/255
  LabelMap gt;
};

/// Deterministic in (spec.seed, index).
Scene synthesize(const SceneSpec& spec, std::uint64_t index);

using Rgb = std::array<std::uint8_t, 3>;

/// Distinct color per class; VOID renders black.
std::vector<Rgb> default_palette(int num_classes);
Tensor colorize_labels(const LabelMap& labels, const std::vector<Rgb>& palette);

struct Dataset {
  SceneSpec spec;
  std::vector<Scene> scenes;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Scenes 0..count-1; the last `test_count` form the test split.
Dataset make_dataset(const SceneSpec& spec, std::size_t count, std::size_t test_count);

/// Writes images/NNNNN.ppm, labels/NNNNN.pgm and manifest.txt.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& dir);

std::string manifest_text(const Dataset& dataset);

}  // namespace regseg
