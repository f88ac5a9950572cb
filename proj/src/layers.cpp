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


#include "regseg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace regseg {

namespace {

struct ConvGeometry {
  std::size_t in_h, in_w, in_d, k, out_d, out_h, out_w;
};

ConvGeometry check_conv(const Tensor& input, const Tensor& kernels, int stride, int pad) {
  if (input.rank() != 3) throw ShapeError("conv2d: input must be H x W x D, got " + input.shape_string());
  if (kernels.rank() != 4) throw ShapeError("conv2d: kernels must be k x k x D_in x D_out, got " + kernels.shape_string());
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
  const std::size_t k = kernels.dim(0);
  if (kernels.dim(1) != k || k % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square with odd size, got " + kernels.shape_string());
  }
  if (kernels.dim(2) != input.dim(2)) {
    throw ShapeError("conv2d: input depth " + std::to_string(input.dim(2)) +
                     " does not match kernel depth " + std::to_string(kernels.dim(2)));
  }
  const auto padded_h = static_cast<long>(input.dim(0)) + 2 * pad;
  const auto padded_w = static_cast<long>(input.dim(1)) + 2 * pad;
  if (padded_h < static_cast<long>(k) || padded_w < static_cast<long>(k)) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  ConvGeometry g{};
  g.in_h = input.dim(0);
  g.in_w = input.dim(1);
  g.in_d = input.dim(2);
  g.k = k;
  g.out_d = kernels.dim(3);
  g.out_h = static_cast<std::size_t>((padded_h - static_cast<long>(k)) / stride + 1);
  g.out_w = static_cast<std::size_t>((padded_w - static_cast<long>(k)) / stride + 1);
  return g;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              int stride, int pad) {
  const ConvGeometry g = check_conv(input, kernels, stride, pad);
  if (!bias.empty()) require_shape(bias, {g.out_d}, "conv2d bias");

  Tensor out({g.out_h, g.out_w, g.out_d});
  const double* in = input.raw();
  const double* w = kernels.raw();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      double* o = &out.at(oy, ox, 0);
      if (!bias.empty()) std::copy(bias.raw(), bias.raw() + g.out_d, o);
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const long iy = static_cast<long>(oy * stride + ky) - pad;
        if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const long ix = static_cast<long>(ox * stride + kx) - pad;
          if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
          const double* px = in + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_d;
          const double* wk = w + (ky * g.k + kx) * g.in_d * g.out_d;
          for (std::size_t di = 0; di < g.in_d; ++di) {
            const double v = px[di];
            const double* wrow = wk + di * g.out_d;
            for (std::size_t d = 0; d < g.out_d; ++d) o[d] += v * wrow[d];
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels,
                            const Tensor& grad_out, bool has_bias, int stride,
                            int pad, bool want_input_grad) {
  const ConvGeometry g = check_conv(input, kernels, stride, pad);
  require_shape(grad_out, {g.out_h, g.out_w, g.out_d}, "conv2d_backward grad_out");

  Conv2dGrads grads;
  grads.kernels = Tensor::zeros_like(kernels);
  if (has_bias) grads.bias = Tensor({g.out_d});
  if (want_input_grad) grads.input = Tensor::zeros_like(input);

  const double* in = input.raw();
  const double* w = kernels.raw();
  double* gw = grads.kernels.raw();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const double* go = &grad_out.at(oy, ox, 0);
      if (has_bias) {
        for (std::size_t d = 0; d < g.out_d; ++d) grads.bias[d] += go[d];
      }
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const long iy = static_cast<long>(oy * stride + ky) - pad;
        if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const long ix = static_cast<long>(ox * stride + kx) - pad;
          if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
          const std::size_t in_off = (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_d;
          const double* px = in + in_off;
          const std::size_t w_off = (ky * g.k + kx) * g.in_d * g.out_d;
          for (std::size_t di = 0; di < g.in_d; ++di) {
            const double v = px[di];
            double* gwrow = gw + w_off + di * g.out_d;
            for (std::size_t d = 0; d < g.out_d; ++d) gwrow[d] += v * go[d];
          }
          if (want_input_grad) {
            double* gi = grads.input.raw() + in_off;
            for (std::size_t di = 0; di < g.in_d; ++di) {
              const double* wrow = w + w_off + di * g.out_d;
              double acc = 0.0;
              for (std::size_t d = 0; d < g.out_d; ++d) acc += wrow[d] * go[d];
              gi[di] += acc;
            }
          }
        }
      }
    }
  }
  return grads;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  if (!input.same_shape(grad_out)) {
    throw ShapeError("relu_backward: grad " + grad_out.shape_string() +
                     " vs input " + input.shape_string());
  }
  Tensor grad = grad_out;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(input[i] > 0.0)) grad[i] = 0.0;
  }
  return grad;
}

MaxPoolRecord maxpool2(const Tensor& input) {
  if (input.rank() != 3) throw ShapeError("maxpool2: input must be H x W x D");
  const std::size_t h = input.dim(0), w = input.dim(1), d = input.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2: spatial size must be even, got " + input.shape_string());
  }
  MaxPoolRecord rec;
  rec.input_shape = input.shape();
  rec.output = Tensor({h / 2, w / 2, d});
  rec.argmax.resize(rec.output.size());
  for (std::size_t oy = 0; oy < h / 2; ++oy) {
    for (std::size_t ox = 0; ox < w / 2; ++ox) {
      for (std::size_t c = 0; c < d; ++c) {
        std::size_t best = ((2 * oy) * w + 2 * ox) * d + c;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * oy + dy) * w + 2 * ox + dx) * d + c;
            if (input[idx] > input[best]) best = idx;
          }
        }
        const std::size_t o = (oy * (w / 2) + ox) * d + c;
        rec.output[o] = input[best];
        rec.argmax[o] = best;
      }
    }
  }
  return rec;
}

Tensor maxpool2_backward(const MaxPoolRecord& record, const Tensor& grad_out) {
  if (!grad_out.same_shape(record.output)) {
    throw ShapeError("maxpool2_backward: grad " + grad_out.shape_string() +
                     " vs output " + record.output.shape_string());
  }
  Tensor grad(record.input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) grad[record.argmax[o]] += grad_out[o];
  return grad;
}

namespace {

struct LinearGeometry {
  std::size_t batch, in, out;
  bool vector_input;
};

LinearGeometry check_linear(const Tensor& input, const Tensor& weights) {
  if (weights.rank() != 2) throw ShapeError("linear: weights must be N x M, got " + weights.shape_string());
  LinearGeometry g{};
  g.in = weights.dim(0);
  g.out = weights.dim(1);
  if (input.rank() == 1) {
    g.batch = 1;
    g.vector_input = true;
    if (input.dim(0) != g.in) {
      throw ShapeError("linear: input length " + std::to_string(input.dim(0)) +
                       " does not match weights " + weights.shape_string());
    }
  } else if (input.rank() == 2) {
    g.batch = input.dim(0);
    g.vector_input = false;
    if (input.dim(1) != g.in) {
      throw ShapeError("linear: input " + input.shape_string() +
                       " does not match weights " + weights.shape_string());
    }
  } else {
    throw ShapeError("linear: input must be a vector or a batch of rows");
  }
  return g;
}

}  // namespace

Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  const LinearGeometry g = check_linear(input, weights);
  require_shape(bias, {g.out}, "linear bias");
  Tensor out = g.vector_input ? Tensor({g.out}) : Tensor({g.batch, g.out});
  const double* w = weights.raw();
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* x = input.raw() + b * g.in;
    double* o = out.raw() + b * g.out;
    std::copy(bias.raw(), bias.raw() + g.out, o);
    for (std::size_t n = 0; n < g.in; ++n) {
      const double v = x[n];
      if (v == 0.0) continue;
      const double* wrow = w + n * g.out;
      for (std::size_t m = 0; m < g.out; ++m) o[m] += v * wrow[m];
    }
  }
  return out;
}

LinearGrads linear_backward(const Tensor& input, const Tensor& weights,
                            const Tensor& grad_out, bool want_input_grad) {
  const LinearGeometry g = check_linear(input, weights);
  if (grad_out.size() != g.batch * g.out) {
    throw ShapeError("linear_backward: grad_out " + grad_out.shape_string() +
                     " does not match output size");
  }
  LinearGrads grads;
  grads.weights = Tensor::zeros_like(weights);
  grads.bias = Tensor({g.out});
  if (want_input_grad) grads.input = Tensor::zeros_like(input);
  const double* w = weights.raw();
  double* gw = grads.weights.raw();
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* x = input.raw() + b * g.in;
    const double* go = grad_out.raw() + b * g.out;
    for (std::size_t m = 0; m < g.out; ++m) grads.bias[m] += go[m];
    for (std::size_t n = 0; n < g.in; ++n) {
      const double v = x[n];
      double* gwrow = gw + n * g.out;
      const double* wrow = w + n * g.out;
      if (v != 0.0) {
        for (std::size_t m = 0; m < g.out; ++m) gwrow[m] += v * go[m];
      }
      if (want_input_grad) {
        double acc = 0.0;
        for (std::size_t m = 0; m < g.out; ++m) acc += wrow[m] * go[m];
        grads.input[b * g.in + n] = acc;
      }
    }
  }
  return grads;
}

void softmax_into(std::span<const double> scores, std::span<double> out) {
  if (scores.empty()) throw std::invalid_argument("softmax: need at least one class");
  if (out.size() != scores.size()) throw ShapeError("softmax: output size mismatch");
  const double peak = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    out[c] = std::exp(scores[c] - peak);
    total += out[c];
  }
  for (double& v : out) v /= total;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  softmax_into(scores, out);
  return out;
}

Tensor softmax_rows(const Tensor& scores) {
  if (scores.rank() != 2) throw ShapeError("softmax_rows: expected B x C");
  Tensor out = Tensor::zeros_like(scores);
  for (std::size_t r = 0; r < scores.dim(0); ++r) softmax_into(scores.row(r), out.row(r));
  return out;
}

}  // namespace regseg
