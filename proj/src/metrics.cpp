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


#include "regseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "regseg/log.hpp"

namespace regseg {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : classes_(num_classes), counts_(static_cast<std::size_t>(num_classes * num_classes), 0) {
  if (num_classes < 1) throw std::invalid_argument("ConfusionMatrix: need at least one class");
}

void ConfusionMatrix::add(int gt_class, int pred_class, std::uint64_t n) {
  if (gt_class < 0 || gt_class >= classes_ || pred_class < 0 || pred_class >= classes_) {
    throw std::out_of_range("ConfusionMatrix: class id out of range");
  }
  counts_[static_cast<std::size_t>(gt_class * classes_ + pred_class)] += n;
}

void ConfusionMatrix::add(const LabelMap& pred, const LabelMap& gt, const std::vector<bool>* mask) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw std::invalid_argument("ConfusionMatrix: prediction and ground truth differ in size");
  }
  for (std::size_t p = 0; p < gt.size(); ++p) {
    if (gt.is_void(p) || (mask && !(*mask)[p])) continue;
    add(gt[p], pred[p]);
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw std::invalid_argument("ConfusionMatrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::uint64_t ConfusionMatrix::row_sum(int c) const {
  std::uint64_t s = 0;
  for (int p = 0; p < classes_; ++p) s += at(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(int c) const {
  std::uint64_t s = 0;
  for (int g = 0; g < classes_; ++g) s += at(g, c);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

double global_accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("global_accuracy: empty confusion matrix");
  std::uint64_t correct = 0;
  for (int c = 0; c < cm.num_classes(); ++c) correct += cm.at(c, c);
  return static_cast<double>(correct) / static_cast<double>(total);
}

double class_average_accuracy(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < cm.num_classes(); ++c) {
    const std::uint64_t row = cm.row_sum(c);
    if (row == 0) continue;
    sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
    ++present;
  }
  if (present == 0) throw std::invalid_argument("class_average_accuracy: no ground-truth pixels");
  return sum / present;
}

double mean_iou(const ConfusionMatrix& cm, IouClasses which) {
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < cm.num_classes(); ++c) {
    const std::uint64_t uni = cm.row_sum(c) + cm.col_sum(c) - cm.at(c, c);
    if (uni == 0 && which == IouClasses::kPresent) continue;
    sum += uni == 0 ? 0.0 : static_cast<double>(cm.at(c, c)) / static_cast<double>(uni);
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("mean_iou: no ground-truth or predicted pixels");
  return sum / counted;
}

std::vector<bool> boundary_band(const LabelMap& gt, double band) {
  if (band < 0.0) throw std::invalid_argument("boundary_band: band must be >= 0");
  const int w = gt.width(), h = gt.height();
  auto differs = [&](std::size_t a, std::size_t b) {
    return !gt.is_void(a) && !gt.is_void(b) && gt[a] != gt[b];
  };
  // Label-change edges as unit segments in pixel-center coordinates.
  struct Segment {
    double x0, y0, x1, y1;
  };
  std::vector<Segment> edges;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = static_cast<std::size_t>(y * w + x);
      if (x + 1 < w && differs(p, p + 1)) edges.push_back({x + 0.5, y - 0.5, x + 0.5, y + 0.5});
      if (y + 1 < h && differs(p, p + static_cast<std::size_t>(w))) {
        edges.push_back({x - 0.5, y + 0.5, x + 0.5, y + 0.5});
      }
    }
  }
  std::vector<bool> mask(gt.size(), false);
  if (edges.empty()) {
    warn("boundary_band: ground truth has no label boundary");
    return mask;
  }
  // Boundary pixels are 0.5 from their edge.
  const double reach = std::max(band, 0.5);
  const double reach2 = reach * reach + 1e-12;
  for (const Segment& s : edges) {
    const int x_lo = std::max(0, static_cast<int>(std::floor(std::min(s.x0, s.x1) - reach)));
    const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(std::max(s.x0, s.x1) + reach)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min(s.y0, s.y1) - reach)));
    const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(std::max(s.y0, s.y1) + reach)));
    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        const auto p = static_cast<std::size_t>(y * w + x);
        if (mask[p] || gt.is_void(p)) continue;
        // Segments are axis-aligned: clamp the point onto them.
        const double cx = std::clamp(static_cast<double>(x), s.x0, s.x1);
        const double cy = std::clamp(static_cast<double>(y), s.y0, s.y1);
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        if (d2 <= reach2) mask[p] = true;
      }
    }
  }
  return mask;
}

std::optional<double> boundary_class_accuracy(const LabelMap& pred, const LabelMap& gt,
                                              int num_classes, double band) {
  const std::vector<bool> mask = boundary_band(gt, band);
  ConfusionMatrix cm(num_classes);
  cm.add(pred, gt, &mask);
  if (cm.total() == 0) return std::nullopt;
  return class_average_accuracy(cm);
}

MetricsReport summarize(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.pixels = cm.total();
  r.global_accuracy = global_accuracy(cm);
  r.class_average_accuracy = class_average_accuracy(cm);
  r.mean_iou = mean_iou(cm);
  return r;
}

std::string format_table(const MetricsReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "metric                    value\n";
  os << "------------------------  -------\n";
  os << "global accuracy           " << std::setw(6) << 100.0 * report.global_accuracy << "%\n";
  os << "class-average accuracy    " << std::setw(6) << 100.0 * report.class_average_accuracy << "%\n";
  os << "mean IoU                  " << std::setw(6) << 100.0 * report.mean_iou << "%\n";
  if (report.band) {
    std::ostringstream label;
    label << "boundary class-avg (" << *report.band << "px)";
    os << std::left << std::setw(26) << label.str() << std::right;
    if (report.band_class_accuracy) {
      os << std::setw(6) << 100.0 * *report.band_class_accuracy << "%\n";
    } else {
      os << "   n/a\n";
    }
  }
  os << "pixels evaluated          " << report.pixels << '\n';
  return os.str();
}

std::string format_records(const MetricsReport& report) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "global_acc=" << report.global_accuracy << '\n';
  os << "class_acc=" << report.class_average_accuracy << '\n';
  os << "miou=" << report.mean_iou << '\n';
  os << "pixels=" << report.pixels << '\n';
  if (report.band) {
    os << "band=" << *report.band << '\n';
    os << "band_class_acc=";
    if (report.band_class_accuracy) {
      os << *report.band_class_accuracy;
    } else {
      os << "absent";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace regseg
