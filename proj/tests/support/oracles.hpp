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

// Brute-force reference implementations and random instance generators shared
// by the unit and acceptance tests. Everything here is written from the
// definitions with plain loops and no shared code with the library beyond its
// data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "regseg/losses.hpp"
#include "regseg/random.hpp"
#include "regseg/region_to_pixel.hpp"
#include "regseg/regions.hpp"
#include "regseg/roi_pooling.hpp"
#include "regseg/tensor.hpp"

namespace regseg::oracle {

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Random free-form region: a rectangle with random pixels removed, or a
/// random walk blob. Never empty.
inline RegionMask random_region(int w, int h, Rng& rng) {
  std::vector<PixelIndex> pixels;
  if (rng.uniform() < 0.5) {
    const int x0 = rng.uniform_int(0, w - 1), y0 = rng.uniform_int(0, h - 1);
    const int x1 = rng.uniform_int(x0, w - 1), y1 = rng.uniform_int(y0, h - 1);
    const double keep = rng.uniform(0.4, 1.0);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (rng.uniform() < keep) pixels.push_back(y * w + x);
      }
    }
    if (pixels.empty()) pixels.push_back(y0 * w + x0);
  } else {
    int x = rng.uniform_int(0, w - 1), y = rng.uniform_int(0, h - 1);
    const int steps = rng.uniform_int(1, w * h);
    for (int s = 0; s < steps; ++s) {
      pixels.push_back(y * w + x);
      switch (rng.uniform_int(0, 3)) {
        case 0: x = std::min(w - 1, x + 1); break;
        case 1: x = std::max(0, x - 1); break;
        case 2: y = std::min(h - 1, y + 1); break;
        default: y = std::max(0, y - 1); break;
      }
    }
    std::sort(pixels.begin(), pixels.end());
    pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  }
  return RegionMask(std::move(pixels), w, h);
}

inline RegionSet random_region_set(int w, int h, int count, Rng& rng) {
  RegionSet set{w, h, RegionSource::kMixed, {}, {}};
  for (int i = 0; i < count; ++i) set.add(random_region(w, h, rng));
  return set;
}

/// Random regions plus one full-image region, so every pixel is covered.
inline RegionSet random_covering_set(int w, int h, int count, Rng& rng) {
  RegionSet set = random_region_set(w, h, count - 1, rng);
  set.add(RegionMask::rectangle({0, 0, w - 1, h - 1}, w, h));
  return set;
}

/// Blocky random labels (so there are boundaries and single-class areas),
/// with an optional fraction of VOID pixels.
inline LabelMap random_labels(int w, int h, int classes, Rng& rng, double void_fraction = 0.0) {
  LabelMap gt(w, h, 0);
  const int blocks = rng.uniform_int(1, 6);
  for (int b = 0; b < blocks; ++b) {
    const int c = rng.uniform_int(0, classes - 1);
    const int x0 = rng.uniform_int(0, w - 1), y0 = rng.uniform_int(0, h - 1);
    const int x1 = rng.uniform_int(x0, w - 1), y1 = rng.uniform_int(y0, h - 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) gt.at(x, y) = c;
    }
  }
  for (std::size_t p = 0; p < gt.size(); ++p) {
    if (rng.uniform() < void_fraction) gt[p] = kVoid;
  }
  return gt;
}

// --- region-to-pixel -------------------------------------------------------------------

struct R2P {
  std::vector<double> scores;  // P x C, lowest() where uncovered
  std::vector<int> winner;     // P x C, -1 where uncovered
};

inline R2P r2p(const Tensor& region_scores, const RegionSet& regions) {
  const std::size_t classes = region_scores.dim(1);
  const std::size_t pixels = static_cast<std::size_t>(regions.width) * regions.height;
  R2P out{std::vector<double>(pixels * classes, std::numeric_limits<double>::lowest()),
          std::vector<int>(pixels * classes, -1)};
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t r = 0; r < regions.size(); ++r) {
        if (!regions.regions[r].contains(static_cast<PixelIndex>(p))) continue;
        const double s = region_scores.at(r, c);
        if (out.winner[p * classes + c] < 0 || s > out.scores[p * classes + c]) {
          out.scores[p * classes + c] = s;
          out.winner[p * classes + c] = static_cast<int>(r);
        }
      }
    }
  }
  return out;
}

/// dL/dS(r, c) = sum over pixels p of dL/dS(p, c) for which r won (p, c).
inline std::vector<double> r2p_backward(const std::vector<double>& pix_grad, const R2P& fwd, std::size_t regions,
                                        std::size_t classes) {
  std::vector<double> g(regions * classes, 0.0);
  for (std::size_t r = 0; r < regions; ++r) {
    for (std::size_t c = 0; c < classes; ++c) {
      double sum = 0.0;
      for (std::size_t p = 0; p * classes < fwd.winner.size(); ++p) {
        if (fwd.winner[p * classes + c] == static_cast<int>(r)) sum += pix_grad[p * classes + c];
      }
      g[r * classes + c] = sum;
    }
  }
  return g;
}

// --- ROI pooling --------------------------------------------------------------------------

struct Pooled {
  std::vector<double> values;  // bins x D
  std::vector<int> argmax;     // bins x D, -1 for empty bins
};

/// Per bin and channel, the max over feature-map cells that lie both in the
/// bin and in the mask. Bin i of n over a box of extent L covers
/// [floor(i L / n), ceil((i + 1) L / n)) relative to the box origin.
inline Pooled roi_pool(const Tensor& convmap, const ConvRegionMask& mask, PooledSize size) {
  const int fw = static_cast<int>(convmap.dim(1));
  const std::size_t depth = convmap.dim(2);
  const BBox& b = mask.bbox_fm;
  Pooled out{std::vector<double>(static_cast<std::size_t>(size.bins()) * depth, 0.0),
             std::vector<int>(static_cast<std::size_t>(size.bins()) * depth, -1)};
  for (int i = 0; i < size.height; ++i) {
    for (int j = 0; j < size.width; ++j) {
      const int ys = b.y0 + static_cast<int>(std::floor(double(i) * b.height() / size.height));
      const int ye = b.y0 + static_cast<int>(std::ceil(double(i + 1) * b.height() / size.height));
      const int xs = b.x0 + static_cast<int>(std::floor(double(j) * b.width() / size.width));
      const int xe = b.x0 + static_cast<int>(std::ceil(double(j + 1) * b.width() / size.width));
      for (std::size_t d = 0; d < depth; ++d) {
        const std::size_t o = static_cast<std::size_t>(i * size.width + j) * depth + d;
        for (std::int32_t cell : mask.cells) {
          const int x = cell % fw, y = cell / fw;
          if (x < xs || x >= xe || y < ys || y >= ye) continue;
          const double v = convmap[static_cast<std::size_t>(cell) * depth + d];
          // Cells are ascending, so strict '>' keeps the lowest index.
          if (out.argmax[o] < 0 || v > out.values[o]) {
            out.values[o] = v;
            out.argmax[o] = cell;
          }
        }
      }
    }
  }
  return out;
}

// --- losses -------------------------------------------------------------------------------

/// Weighted per-pixel log loss through the region-to-pixel layer, with the
/// gradient with respect to region scores, straight from the definitions.
inline LossResult pixel_loss(const Tensor& region_scores, const RegionSet& regions, const LabelMap& gt,
                             const std::vector<double>& w) {
  const std::size_t classes = region_scores.dim(1);
  const R2P fwd = r2p(region_scores, regions);
  LossResult out{0.0, Tensor({regions.size(), classes})};
  for (std::size_t p = 0; p < gt.size(); ++p) {
    if (gt.is_void(p)) continue;
    const auto y = static_cast<std::size_t>(gt[p]);
    const double* s = fwd.scores.data() + p * classes;
    double m = s[0];
    for (std::size_t c = 1; c < classes; ++c) m = std::max(m, s[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(s[c] - m);
    out.value -= w[y] * (s[y] - m - std::log(z));
    for (std::size_t c = 0; c < classes; ++c) {
      const double g = w[y] * (std::exp(s[c] - m) / z - (c == y ? 1.0 : 0.0));
      out.grad.at(static_cast<std::size_t>(fwd.winner[p * classes + c]), c) += g;
    }
  }
  return out;
}

// --- metrics ------------------------------------------------------------------------------

/// Pixels within `band` (at least 0.5) of a unit edge separating two
/// 4-neighbors with different non-VOID labels, by point-to-segment distance
/// from the pixel center.
inline std::vector<bool> boundary_band(const LabelMap& gt, double band) {
  const int w = gt.width(), h = gt.height();
  struct Edge {
    double ax, ay, bx, by;
  };
  std::vector<Edge> edges;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int a = gt.at(x, y);
      if (a == kVoid) continue;
      if (x + 1 < w && gt.at(x + 1, y) != kVoid && gt.at(x + 1, y) != a) {
        edges.push_back({x + 0.5, y - 0.5, x + 0.5, y + 0.5});
      }
      if (y + 1 < h && gt.at(x, y + 1) != kVoid && gt.at(x, y + 1) != a) {
        edges.push_back({x - 0.5, y + 0.5, x + 0.5, y + 0.5});
      }
    }
  }
  const double reach = std::max(band, 0.5);
  std::vector<bool> mask(gt.size(), false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (gt.at(x, y) == kVoid) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const Edge& e : edges) {
        const double dx = e.bx - e.ax, dy = e.by - e.ay;
        double t = ((x - e.ax) * dx + (y - e.ay) * dy) / (dx * dx + dy * dy);
        t = std::clamp(t, 0.0, 1.0);
        const double px = e.ax + t * dx - x, py = e.ay + t * dy - y;
        best = std::min(best, std::sqrt(px * px + py * py));
      }
      mask[static_cast<std::size_t>(y * w + x)] = best <= reach + 1e-9;
    }
  }
  return mask;
}

}  // namespace regseg::oracle
