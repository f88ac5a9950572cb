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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "regseg/regions.hpp"
#include "regseg/tensor.hpp"

namespace regseg {

/// Malformed or truncated netpbm data; `offset` is the byte where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), detail_(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

/// Binary PPM (P6, maxval 255). Image tensors are H x W x 3 with values in
/// [0, 1]; each channel is stored as round(255 * v).
std::vector<std::uint8_t> encode_ppm(const Tensor& image);
Tensor decode_ppm(const std::vector<std::uint8_t>& bytes);

/// Binary PGM (P5, maxval 255) holding class ids; 255 is VOID.
std::vector<std::uint8_t> encode_pgm(const LabelMap& labels);
LabelMap decode_pgm(const std::vector<std::uint8_t>& bytes);

void write_image(const std::filesystem::path& path, const Tensor& image);
Tensor read_image(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_labels(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace regseg
