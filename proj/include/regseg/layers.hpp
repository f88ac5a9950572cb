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
#include <span>
#include <vector>

#include "regseg/tensor.hpp"

namespace regseg {

// Every op here is a pure function of its inputs. Backward functions take the
// forward inputs (or the forward record) and the gradient of the output.

struct Conv2dGrads {
  Tensor input;    // H x W x D_in, empty if not requested
  Tensor kernels;  // k x k x D_in x D_out
  Tensor bias;     // D_out, empty if the forward had no bias
};

/// Cross-correlation of an H x W x D_in input with k x k x D_in x D_out kernels.
/// `bias` may be empty.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              int stride, int pad);

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels,
                            const Tensor& grad_out, bool has_bias, int stride,
                            int pad, bool want_input_grad = true);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

struct MaxPoolRecord {
  Tensor output;
  std::vector<std::size_t> argmax;  // linear input index per output element
  std::vector<std::size_t> input_shape;
};

/// 2x2 non-overlapping max pooling; ties go to the first index in row-major order.
MaxPoolRecord maxpool2(const Tensor& input);
Tensor maxpool2_backward(const MaxPoolRecord& record, const Tensor& grad_out);

struct LinearGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

/// Affine map of a length-N vector or a batch of rows (B x N) through
/// N x M weights and an M-vector bias.
Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias);
LinearGrads linear_backward(const Tensor& input, const Tensor& weights,
                            const Tensor& grad_out, bool want_input_grad = true);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> scores);
void softmax_into(std::span<const double> scores, std::span<double> out);

/// Row-wise softmax of a B x C tensor.
Tensor softmax_rows(const Tensor& scores);

}  // namespace regseg
