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


#include "regseg/regions.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "regseg/log.hpp"

namespace regseg {

// --- LabelMap ---------------------------------------------------------------

LabelMap::LabelMap(int width, int height, int fill)
    : width_(width), height_(height),
      labels_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("LabelMap: dimensions must be positive");
}

LabelMap::LabelMap(int width, int height, std::vector<int> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("LabelMap: dimensions must be positive");
  if (labels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ShapeError("LabelMap: label count does not match dimensions");
  }
}

std::size_t LabelMap::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels_.begin(), labels_.end(), [](int l) { return l != kVoid; }));
}

std::vector<std::size_t> LabelMap::class_counts(int num_classes) const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int l : labels_) {
    if (l == kVoid) continue;
    if (l < 0 || l >= num_classes) {
      throw std::out_of_range("LabelMap: label " + std::to_string(l) +
                              " outside [0, " + std::to_string(num_classes) + ")");
    }
    ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

// --- RegionMask -------------------------------------------------------------

RegionMask::RegionMask(std::vector<PixelIndex> pixels, int image_width, int image_height)
    : pixels_(std::move(pixels)) {
  if (pixels_.empty()) throw std::invalid_argument("RegionMask: region must be non-empty");
  std::sort(pixels_.begin(), pixels_.end());
  pixels_.erase(std::unique(pixels_.begin(), pixels_.end()), pixels_.end());
  const auto total = static_cast<PixelIndex>(image_width * image_height);
  if (pixels_.front() < 0 || pixels_.back() >= total) {
    throw std::out_of_range("RegionMask: pixel index outside the image");
  }
  bbox_ = {image_width, image_height, -1, -1};
  for (PixelIndex p : pixels_) {
    const int x = p % image_width;
    const int y = p / image_width;
    bbox_.x0 = std::min(bbox_.x0, x);
    bbox_.x1 = std::max(bbox_.x1, x);
    bbox_.y0 = std::min(bbox_.y0, y);
    bbox_.y1 = std::max(bbox_.y1, y);
  }
}

RegionMask RegionMask::rectangle(const BBox& box, int image_width, int image_height) {
  std::vector<PixelIndex> pixels;
  pixels.reserve(static_cast<std::size_t>(box.width()) * static_cast<std::size_t>(box.height()));
  for (int y = box.y0; y <= box.y1; ++y) {
    for (int x = box.x0; x <= box.x1; ++x) pixels.push_back(y * image_width + x);
  }
  return RegionMask(std::move(pixels), image_width, image_height);
}

bool RegionMask::contains(PixelIndex p) const {
  return std::binary_search(pixels_.begin(), pixels_.end(), p);
}

// --- RegionSet --------------------------------------------------------------

std::string to_string(RegionSource source) {
  switch (source) {
    case RegionSource::kProposalsA: return "proposals-A";
    case RegionSource::kProposalsB: return "proposals-B";
    case RegionSource::kProposalsC: return "proposals-C";
    case RegionSource::kOversegmentation: return "oversegmentation";
    case RegionSource::kGroundTruth: return "ground-truth";
    case RegionSource::kMixed: return "mixed";
  }
  return "mixed";
}

RegionSource parse_region_source(const std::string& text) {
  for (auto s : {RegionSource::kProposalsA, RegionSource::kProposalsB,
                 RegionSource::kProposalsC, RegionSource::kOversegmentation,
                 RegionSource::kGroundTruth, RegionSource::kMixed}) {
    if (to_string(s) == text) return s;
  }
  throw std::invalid_argument("unknown region source '" + text + "'");
}

void RegionSet::add(RegionMask region, int hint) {
  regions.push_back(std::move(region));
  hints.push_back(hint);
}

RegionSet merge(const RegionSet& a, const RegionSet& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError("merge: region sets belong to images of different size");
  }
  RegionSet out = a;
  out.source = RegionSource::kMixed;
  out.regions.insert(out.regions.end(), b.regions.begin(), b.regions.end());
  out.hints.insert(out.hints.end(), b.hints.begin(), b.hints.end());
  return out;
}

void check_region_set(const RegionSet& set) {
  if (set.hints.size() != set.regions.size()) {
    throw std::logic_error("region set: hint count differs from region count");
  }
  const std::size_t total = static_cast<std::size_t>(set.width) * static_cast<std::size_t>(set.height);
  std::vector<int> owner(total, -1);
  const bool disjoint = set.source == RegionSource::kOversegmentation ||
                        set.source == RegionSource::kGroundTruth;
  for (std::size_t r = 0; r < set.regions.size(); ++r) {
    const RegionMask& m = set.regions[r];
    if (m.size() == 0) throw std::logic_error("region " + std::to_string(r) + " is empty");
    BBox box{set.width, set.height, -1, -1};
    PixelIndex prev = -1;
    for (PixelIndex p : m.pixels()) {
      if (p < 0 || static_cast<std::size_t>(p) >= total) {
        throw std::logic_error("region " + std::to_string(r) + " has an out-of-image pixel");
      }
      if (p <= prev) throw std::logic_error("region " + std::to_string(r) + " pixels not strictly sorted");
      prev = p;
      box.x0 = std::min(box.x0, p % set.width);
      box.x1 = std::max(box.x1, p % set.width);
      box.y0 = std::min(box.y0, p / set.width);
      box.y1 = std::max(box.y1, p / set.width);
      if (disjoint) {
        if (owner[static_cast<std::size_t>(p)] != -1) {
          throw std::logic_error("regions " + std::to_string(owner[static_cast<std::size_t>(p)]) +
                                 " and " + std::to_string(r) + " overlap");
        }
        owner[static_cast<std::size_t>(p)] = static_cast<int>(r);
      }
    }
    if (!(box == m.bbox())) throw std::logic_error("region " + std::to_string(r) + " bbox is not tight");
  }
  if (set.source == RegionSource::kOversegmentation) {
    for (std::size_t p = 0; p < total; ++p) {
      if (owner[p] == -1) throw std::logic_error("oversegmentation leaves pixel " + std::to_string(p) + " uncovered");
    }
  }
}

CoverageIndex::CoverageIndex(const RegionSet& set) {
  const std::size_t total = static_cast<std::size_t>(set.width) * static_cast<std::size_t>(set.height);
  offsets_.assign(total + 1, 0);
  for (const auto& m : set.regions) {
    for (PixelIndex p : m.pixels()) ++offsets_[static_cast<std::size_t>(p) + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  ids_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t r = 0; r < set.regions.size(); ++r) {
    for (PixelIndex p : set.regions[r].pixels()) {
      ids_[cursor[static_cast<std::size_t>(p)]++] = static_cast<std::int32_t>(r);
    }
  }
}

std::size_t CoverageIndex::uncovered_count() const {
  std::size_t n = 0;
  for (std::size_t p = 0; p + 1 < offsets_.size(); ++p) n += offsets_[p] == offsets_[p + 1];
  return n;
}

// --- proposals --------------------------------------------------------------

namespace {

std::vector<int> window_origins(int extent, int scale, int step, int offset) {
  std::vector<int> origins{0};
  for (int o = offset; o <= extent - scale; o += step) origins.push_back(o);
  origins.push_back(extent - scale);
  std::sort(origins.begin(), origins.end());
  origins.erase(std::unique(origins.begin(), origins.end()), origins.end());
  return origins;
}

}  // namespace

RegionSet grid_proposals(int width, int height, const std::vector<int>& scales,
                         double stride_fraction, double offset_fraction,
                         RegionSource source) {
  if (scales.empty()) throw std::invalid_argument("grid_proposals: scale list is empty");
  if (!(stride_fraction > 0.0 && stride_fraction <= 1.0)) {
    throw std::invalid_argument("grid_proposals: stride fraction must lie in (0, 1]");
  }
  RegionSet set;
  set.width = width;
  set.height = height;
  set.source = source;
  for (int scale : scales) {
    if (scale < 1 || scale > std::min(width, height)) {
      throw std::invalid_argument("grid_proposals: scale " + std::to_string(scale) +
                                  " does not fit a " + std::to_string(width) + "x" +
                                  std::to_string(height) + " image");
    }
    const int step = std::max(1, static_cast<int>(std::lround(scale * stride_fraction)));
    const int offset = static_cast<int>(std::lround(offset_fraction * step)) % step;
    for (int y0 : window_origins(height, scale, step, offset)) {
      for (int x0 : window_origins(width, scale, step, offset)) {
        set.add(RegionMask::rectangle({x0, y0, x0 + scale - 1, y0 + scale - 1}, width, height));
      }
    }
  }
  return set;
}

std::vector<RegionSet> rotating_proposal_sets(int width, int height,
                                              const ProposalConfig& config) {
  const RegionSource tags[] = {RegionSource::kProposalsA, RegionSource::kProposalsB,
                               RegionSource::kProposalsC};
  std::vector<RegionSet> sets;
  for (int k = 0; k < 3; ++k) {
    sets.push_back(grid_proposals(width, height, config.scales, config.stride_fraction,
                                  k / 3.0, tags[k]));
  }
  return sets;
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Returns the surviving root.
  std::size_t unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (size_[a] < size_[b] || (size_[a] == size_[b] && b < a)) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
  }
  std::size_t size(std::size_t x) { return size_[find(x)]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

struct Edge {
  double weight;
  std::uint32_t a, b;
};

}  // namespace

RegionSet oversegment(const Tensor& image, double merge_threshold, int min_size) {
  if (image.rank() != 3) throw ShapeError("oversegment: image must be H x W x D");
  if (!(merge_threshold > 0.0)) throw std::invalid_argument("oversegment: threshold must be > 0");
  const int h = static_cast<int>(image.dim(0));
  const int w = static_cast<int>(image.dim(1));
  const std::size_t depth = image.dim(2);
  const std::size_t total = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);

  auto color_distance = [&](const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t d = 0; d < depth; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return std::sqrt(s);
  };

  std::vector<Edge> edges;
  edges.reserve(2 * total);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = static_cast<std::uint32_t>(y * w + x);
      const double* cp = image.raw() + p * depth;
      if (x + 1 < w) edges.push_back({color_distance(cp, cp + depth), p, p + 1});
      if (y + 1 < h) {
        edges.push_back({color_distance(cp, cp + static_cast<std::size_t>(w) * depth), p,
                         p + static_cast<std::uint32_t>(w)});
      }
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& l, const Edge& r) { return l.weight < r.weight; });

  DisjointSets sets(total);
  std::vector<double> color_sum(total * depth);
  std::copy(image.raw(), image.raw() + total * depth, color_sum.begin());

  auto mean_distance = [&](std::size_t ra, std::size_t rb) {
    const double na = static_cast<double>(sets.size(ra));
    const double nb = static_cast<double>(sets.size(rb));
    double s = 0.0;
    for (std::size_t d = 0; d < depth; ++d) {
      const double diff = color_sum[ra * depth + d] / na - color_sum[rb * depth + d] / nb;
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  auto join = [&](std::size_t ra, std::size_t rb) {
    const std::size_t root = sets.unite(ra, rb);
    const std::size_t other = root == ra ? rb : ra;
    for (std::size_t d = 0; d < depth; ++d) color_sum[root * depth + d] += color_sum[other * depth + d];
  };

  for (const Edge& e : edges) {
    const std::size_t ra = sets.find(e.a), rb = sets.find(e.b);
    if (ra != rb && mean_distance(ra, rb) < merge_threshold) join(ra, rb);
  }
  for (const Edge& e : edges) {
    const std::size_t ra = sets.find(e.a), rb = sets.find(e.b);
    if (ra == rb) continue;
    if (sets.size(ra) < static_cast<std::size_t>(min_size) ||
        sets.size(rb) < static_cast<std::size_t>(min_size)) {
      join(ra, rb);
    }
  }

  RegionSet out;
  out.width = w;
  out.height = h;
  out.source = RegionSource::kOversegmentation;
  // Segments are numbered by their first pixel in row-major order.
  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<std::vector<PixelIndex>> groups;
  for (std::size_t p = 0; p < total; ++p) {
    const std::size_t root = sets.find(p);
    auto [it, inserted] = slot.try_emplace(root, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(static_cast<PixelIndex>(p));
  }
  for (auto& g : groups) out.add(RegionMask(std::move(g), w, h));
  return out;
}

RegionSet ground_truth_regions(const LabelMap& gt) {
  RegionSet out;
  out.width = gt.width();
  out.height = gt.height();
  out.source = RegionSource::kGroundTruth;
  const std::size_t total = gt.size();
  std::vector<bool> seen(total, false);
  std::deque<PixelIndex> queue;
  for (std::size_t start = 0; start < total; ++start) {
    if (seen[start] || gt.is_void(start)) continue;
    const int cls = gt[start];
    std::vector<PixelIndex> component;
    seen[start] = true;
    queue.push_back(static_cast<PixelIndex>(start));
    while (!queue.empty()) {
      const PixelIndex p = queue.front();
      queue.pop_front();
      component.push_back(p);
      const int x = p % gt.width(), y = p / gt.width();
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= gt.width() || ny[k] >= gt.height()) continue;
        const auto q = static_cast<std::size_t>(ny[k] * gt.width() + nx[k]);
        if (!seen[q] && gt[q] == cls) {
          seen[q] = true;
          queue.push_back(static_cast<PixelIndex>(q));
        }
      }
    }
    out.add(RegionMask(std::move(component), gt.width(), gt.height()), cls);
  }
  if (out.empty()) warn("ground_truth_regions: label map has no labeled pixels");
  return out;
}

RegionLabel region_label_and_overlap(const RegionMask& region, const LabelMap& gt) {
  std::map<int, std::size_t> counts;
  for (PixelIndex p : region.pixels()) {
    const int l = gt[static_cast<std::size_t>(p)];
    if (l != kVoid) ++counts[l];
  }
  RegionLabel result;
  std::size_t best = 0;
  for (const auto& [cls, n] : counts) {  // ascending class id: ties keep the lower id
    if (n > best) {
      best = n;
      result.label = cls;
    }
  }
  result.overlap = static_cast<double>(best) / static_cast<double>(region.size());
  return result;
}

// --- loss partition ---------------------------------------------------------

namespace {

struct CellKeyHash {
  std::size_t operator()(const std::pair<int, std::span<const std::int32_t>>& k) const {
    std::size_t h = std::hash<int>()(k.first);
    for (auto id : k.second) h = h * 1000003u ^ static_cast<std::size_t>(id);
    return h;
  }
};

struct CellKeyEq {
  bool operator()(const std::pair<int, std::span<const std::int32_t>>& a,
                  const std::pair<int, std::span<const std::int32_t>>& b) const {
    return a.first == b.first &&
           std::equal(a.second.begin(), a.second.end(), b.second.begin(), b.second.end());
  }
};

}  // namespace

LossPartition build_loss_partition(const RegionSet& regions, const LabelMap& gt) {
  if (regions.empty()) throw std::invalid_argument("build_loss_partition: no regions");
  if (regions.width != gt.width() || regions.height != gt.height()) {
    throw ShapeError("build_loss_partition: regions and label map differ in size");
  }
  const CoverageIndex coverage(regions);
  LossPartition partition;
  partition.width = gt.width();
  partition.height = gt.height();
  partition.region_count = regions.size();
  // Keys view into `coverage`, which outlives the map.
  std::unordered_map<std::pair<int, std::span<const std::int32_t>>, std::size_t, CellKeyHash, CellKeyEq> index;
  for (std::size_t p = 0; p < gt.size(); ++p) {
    if (gt.is_void(p)) continue;
    const auto covering = coverage.covering(p);
    auto [it, inserted] = index.try_emplace({gt[p], covering}, partition.cells.size());
    if (inserted) {
      LossCell cell;
      cell.label = gt[p];
      cell.covering.assign(covering.begin(), covering.end());
      partition.cells.push_back(std::move(cell));
    }
    partition.cells[it->second].pixels.push_back(static_cast<PixelIndex>(p));
  }
  return partition;
}

// --- text format ------------------------------------------------------------

void write_regions(std::ostream& out, const RegionSet& set) {
  out << "regseg-regions 1\n";
  out << "size " << set.width << ' ' << set.height << '\n';
  out << "source " << to_string(set.source) << '\n';
  out << "count " << set.regions.size() << '\n';
  for (std::size_t r = 0; r < set.regions.size(); ++r) {
    const RegionMask& m = set.regions[r];
    if (set.hints[r] != kNoHint) out << set.hints[r] << ' ';
    const BBox& b = m.bbox();
    out << b.x0 << ' ' << b.y0 << ' ' << b.x1 << ' ' << b.y1 << " :";
    const auto px = m.pixels();
    std::size_t i = 0;
    while (i < px.size()) {
      std::size_t j = i + 1;
      while (j < px.size() && px[j] == px[j - 1] + 1) ++j;
      out << ' ' << px[i] << ' ' << (j - i);
      i = j;
    }
    out << '\n';
  }
}

namespace {

[[noreturn]] void format_error(std::size_t line, const std::string& what) {
  throw std::runtime_error("regions line " + std::to_string(line) + ": " + what);
}

template <typename T>
T expect_field(std::istream& in, const std::string& key, std::size_t line) {
  std::string k;
  T value{};
  if (!(in >> k) || k != key || !(in >> value)) format_error(line, "expected '" + key + "'");
  return value;
}

}  // namespace

RegionSet read_regions(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "regseg-regions" || version != 1) {
    format_error(1, "missing 'regseg-regions 1' header");
  }
  RegionSet set;
  std::string size_key;
  if (!(in >> size_key >> set.width >> set.height) || size_key != "size" || set.width <= 0 ||
      set.height <= 0) {
    format_error(2, "bad size line");
  }
  set.source = parse_region_source(expect_field<std::string>(in, "source", 3));
  const auto count = expect_field<std::size_t>(in, "count", 4);
  std::string line;
  std::getline(in, line);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t line_no = 5 + r;
    if (!std::getline(in, line)) format_error(line_no, "truncated: expected " + std::to_string(count) + " regions");
    const auto colon = line.find(':');
    if (colon == std::string::npos) format_error(line_no, "missing ':'");
    std::istringstream head(line.substr(0, colon));
    std::vector<int> fields;
    for (int v; head >> v;) fields.push_back(v);
    if (fields.size() != 4 && fields.size() != 5) format_error(line_no, "expected [hint] x0 y0 x1 y1");
    const int hint = fields.size() == 5 ? fields[0] : kNoHint;
    const std::size_t o = fields.size() - 4;
    const BBox declared{fields[o], fields[o + 1], fields[o + 2], fields[o + 3]};
    std::istringstream runs(line.substr(colon + 1));
    std::vector<PixelIndex> pixels;
    for (long start, len; runs >> start >> len;) {
      if (len <= 0) format_error(line_no, "non-positive run length");
      for (long k = 0; k < len; ++k) pixels.push_back(static_cast<PixelIndex>(start + k));
    }
    if (pixels.empty()) format_error(line_no, "region has no pixels");
    RegionMask mask(std::move(pixels), set.width, set.height);
    if (!(mask.bbox() == declared)) format_error(line_no, "bbox does not match pixel runs");
    set.add(std::move(mask), hint);
  }
  return set;
}

}  // namespace regseg
