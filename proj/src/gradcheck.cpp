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


#include "regseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "regseg/random.hpp"

namespace regseg {

GradcheckReport gradcheck(const ScalarFn& f, const Tensor& analytic_grad,
                          const Tensor& input, const GradcheckOptions& options,
                          const SignatureFn& signature) {
  if (!analytic_grad.same_shape(input)) {
    throw ShapeError("gradcheck: analytic grad " + analytic_grad.shape_string() +
                     " vs input " + input.shape_string());
  }
  std::vector<std::size_t> coords = options.coordinates;
  if (coords.empty()) {
    coords.resize(input.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
  }

  GradcheckReport report;
  const double eps = options.eps;
  const std::uint64_t base_sig = signature ? signature(input) : 0;
  const double f0 = signature ? 0.0 : f(input);
  Tensor probe = input;
  for (std::size_t idx : coords) {
    if (idx >= input.size()) throw std::out_of_range("gradcheck: coordinate out of range");
    const double orig = probe[idx];
    probe[idx] = orig + eps;
    const double f_plus = f(probe);
    const std::uint64_t sig_plus = signature ? signature(probe) : 0;
    probe[idx] = orig - eps;
    const double f_minus = f(probe);
    const std::uint64_t sig_minus = signature ? signature(probe) : 0;
    probe[idx] = orig;

    if (signature) {
      if (sig_plus != base_sig || sig_minus != base_sig) {
        report.skipped.push_back(idx);
        continue;
      }
    } else {
      const double fwd = (f_plus - f0) / eps;
      const double bwd = (f0 - f_minus) / eps;
      const double scale = std::max({std::abs(fwd), std::abs(bwd), 1.0});
      if (std::abs(fwd - bwd) > options.kink_tolerance * scale) {
        report.skipped.push_back(idx);
        continue;
      }
    }

    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    const double analytic = analytic_grad[idx];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic - numeric) / denom;
    ++report.checked;
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_coordinate = idx;
    }
  }
  return report;
}

GradcheckReport gradcheck_op(const TensorFn& forward, const BackwardFn& backward,
                             const Tensor& input, std::uint64_t seed,
                             const GradcheckOptions& options,
                             const SignatureFn& signature) {
  const Tensor out = forward(input);
  Tensor weights = Tensor::zeros_like(out);
  Rng rng(seed);
  for (double& v : weights.data()) v = rng.uniform(-1.0, 1.0);
  const Tensor analytic = backward(input, weights);
  const ScalarFn contracted = [&](const Tensor& x) {
    const Tensor y = forward(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += weights[i] * y[i];
    return acc;
  };
  return gradcheck(contracted, analytic, input, options, signature);
}

std::vector<std::size_t> sample_coordinates(std::size_t size, std::size_t count,
                                            std::uint64_t seed) {
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (count >= size) return all;
  Rng rng(seed);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next() % (size - i));
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

std::string format_report(const std::string& label, const GradcheckReport& report) {
  std::ostringstream os;
  os << label << " max_rel_error=" << report.max_rel_error
     << " checked=" << report.checked << " skipped=" << report.skipped.size();
  return os.str();
}

}  // namespace regseg
