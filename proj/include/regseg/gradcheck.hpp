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
#include <functional>
#include <string>
#include <vector>

#include "regseg/tensor.hpp"

namespace regseg {

using ScalarFn = std::function<double(const Tensor&)>;
using TensorFn = std::function<Tensor(const Tensor&)>;
using BackwardFn = std::function<Tensor(const Tensor& input, const Tensor& grad_out)>;

/// Hash of every discrete routing decision (argmax, relu gate) a forward pass
/// makes. Two inputs with the same signature lie on the same linear piece.
using SignatureFn = std::function<std::uint64_t(const Tensor&)>;

struct GradcheckOptions {
  double eps = 1e-5;
  /// Coordinates to probe; empty means all of them.
  std::vector<std::size_t> coordinates;
  /// Used only without a signature: a coordinate is treated as sitting on a
  /// kink when its one-sided slopes differ by more than this (relative).
  double kink_tolerance = 1e-2;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t checked = 0;
  std::vector<std::size_t> skipped;  // coordinates whose perturbation switched a route
};

/// max over probed coordinates of |analytic - central| / max(|analytic|, |central|, 1e-8).
GradcheckReport gradcheck(const ScalarFn& f, const Tensor& analytic_grad,
                          const Tensor& input, const GradcheckOptions& options = {},
                          const SignatureFn& signature = {});

/// Checks a tensor-valued op by contracting its output with a fixed random
/// tensor, so the scalar probe is L(x) = <w, f(x)> and dL/dx = backward(x, w).
GradcheckReport gradcheck_op(const TensorFn& forward, const BackwardFn& backward,
                             const Tensor& input, std::uint64_t seed,
                             const GradcheckOptions& options = {},
                             const SignatureFn& signature = {});

/// Deterministic sample of `count` distinct coordinates out of `size`.
std::vector<std::size_t> sample_coordinates(std::size_t size, std::size_t count,
                                            std::uint64_t seed);

std::string format_report(const std::string& label, const GradcheckReport& report);

}  // namespace regseg
