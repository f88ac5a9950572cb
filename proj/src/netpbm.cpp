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


#include "regseg/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace regseg {

namespace {

struct Header {
  int width = 0;
  int height = 0;
  std::size_t payload = 0;  // offset of the first raster byte
};

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void expect_magic(const char* magic) {
    if (bytes_.size() < 2 || bytes_[0] != magic[0] || bytes_[1] != magic[1]) {
      throw ParseError(std::string("expected magic '") + magic + "'", 0);
    }
    pos_ = 2;
  }

  int read_int(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) throw ParseError(std::string("truncated header: missing ") + what, pos_);
    if (!std::isdigit(bytes_[pos_])) throw ParseError(std::string("expected ") + what, pos_);
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) throw ParseError(std::string(what) + " too large", pos_);
      ++pos_;
    }
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t end_of_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ParseError("expected whitespace after maxval", pos_);
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

Header parse_header(const std::vector<std::uint8_t>& bytes, const char* magic, std::size_t channels) {
  HeaderReader reader(bytes);
  reader.expect_magic(magic);
  Header h;
  h.width = reader.read_int("width");
  h.height = reader.read_int("height");
  const int maxval = reader.read_int("maxval");
  if (h.width <= 0 || h.height <= 0) throw ParseError("image dimensions must be positive", 2);
  if (maxval != 255) throw ParseError("unsupported maxval " + std::to_string(maxval), 2);
  h.payload = reader.end_of_header();
  const std::size_t need = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height) * channels;
  if (bytes.size() < h.payload + need) {
    throw ParseError("truncated raster: expected " + std::to_string(need) + " bytes", bytes.size());
  }
  if (bytes.size() > h.payload + need) throw ParseError("trailing bytes after raster", h.payload + need);
  return h;
}

std::vector<std::uint8_t> header_bytes(const char* magic, std::size_t width, std::size_t height) {
  const std::string text = std::string(magic) + "\n" + std::to_string(width) + " " +
                           std::to_string(height) + "\n255\n";
  return {text.begin(), text.end()};
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw ShapeError("encode_ppm: image must be H x W x 3");
  auto bytes = header_bytes("P6", image.dim(1), image.dim(0));
  bytes.reserve(bytes.size() + image.size());
  for (double v : image.data()) {
    bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return bytes;
}

Tensor decode_ppm(const std::vector<std::uint8_t>& bytes) {
  const Header h = parse_header(bytes, "P6", 3);
  Tensor image({static_cast<std::size_t>(h.height), static_cast<std::size_t>(h.width), 3});
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = bytes[h.payload + i] / 255.0;
  return image;
}

std::vector<std::uint8_t> encode_pgm(const LabelMap& labels) {
  auto bytes = header_bytes("P5", static_cast<std::size_t>(labels.width()),
                            static_cast<std::size_t>(labels.height()));
  for (int l : labels.labels()) {
    if (l < 0 || l > 255) throw std::out_of_range("encode_pgm: label " + std::to_string(l) + " not a byte");
    bytes.push_back(static_cast<std::uint8_t>(l));
  }
  return bytes;
}

LabelMap decode_pgm(const std::vector<std::uint8_t>& bytes) {
  const Header h = parse_header(bytes, "P5", 1);
  std::vector<int> labels(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload), bytes.end());
  return LabelMap(h.width, h.height, std::move(labels));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  write_file(path, encode_ppm(image));
}

Tensor read_image(const std::filesystem::path& path) {
  try {
    return decode_ppm(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

void write_labels(const std::filesystem::path& path, const LabelMap& labels) {
  write_file(path, encode_pgm(labels));
}

LabelMap read_labels(const std::filesystem::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace regseg
