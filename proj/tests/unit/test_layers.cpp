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


#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "regseg/checks.hpp"
#include "regseg/gradcheck.hpp"
#include "regseg/layers.hpp"

using namespace regseg;

namespace {

// Direct 7-loop cross-correlation with zero padding.
Tensor naive_conv(const Tensor& in, const Tensor& k, const Tensor& bias, int stride, int pad) {
  const int h = static_cast<int>(in.dim(0)), w = static_cast<int>(in.dim(1));
  const int kk = static_cast<int>(k.dim(0));
  const std::size_t din = in.dim(2), dout = k.dim(3);
  const int oh = (h + 2 * pad - kk) / stride + 1, ow = (w + 2 * pad - kk) / stride + 1;
  Tensor out({std::size_t(oh), std::size_t(ow), dout});
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (std::size_t o = 0; o < dout; ++o) {
        double s = bias.empty() ? 0.0 : bias[o];
        for (int i = 0; i < kk; ++i)
          for (int j = 0; j < kk; ++j) {
            const int iy = y * stride + i - pad, ix = x * stride + j - pad;
            if (iy < 0 || ix < 0 || iy >= h || ix >= w) continue;
            for (std::size_t d = 0; d < din; ++d) {
              s += in.at(std::size_t(iy), std::size_t(ix), d) * k[((std::size_t(i) * kk + j) * din + d) * dout + o];
            }
          }
        out.at(std::size_t(y), std::size_t(x), o) = s;
      }
  return out;
}

}  // namespace

TEST_CASE("conv2d matches the direct sum") {
  Rng rng(3);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      const Tensor in = oracle::random_tensor({7, 6, 3}, rng);
      const Tensor k = oracle::random_tensor({3, 3, 3, 4}, rng);
      const Tensor b = oracle::random_tensor({4}, rng);
      const Tensor got = conv2d(in, k, b, stride, pad);
      const Tensor want = naive_conv(in, k, b, stride, pad);
      REQUIRE(got.shape() == want.shape());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d rejects mismatched depth") {
  CHECK_THROWS_AS(conv2d(Tensor({4, 4, 2}), Tensor({3, 3, 3, 1}), Tensor(), 1, 1), ShapeError);
}

TEST_CASE("maxpool2 picks the first maximum and routes gradient there") {
  // One 2x2 window of equal values: the top-left element wins.
  Tensor in({2, 2, 1}, 1.0);
  const MaxPoolRecord rec = maxpool2(in);
  CHECK(rec.output[0] == 1.0);
  CHECK(rec.argmax[0] == 0);
  const Tensor g = maxpool2_backward(rec, Tensor({1, 1, 1}, 5.0));
  CHECK(g[0] == 5.0);
  CHECK(g[1] + g[2] + g[3] == 0.0);
}

TEST_CASE("relu gates and its backward masks") {
  const Tensor x({4}, std::vector<double>{-1.0, 0.0, 2.0, -0.5});
  const Tensor y = relu(x);
  CHECK(y == Tensor({4}, std::vector<double>{0.0, 0.0, 2.0, 0.0}));
  const Tensor g = relu_backward(x, Tensor({4}, 1.0));
  CHECK(g == Tensor({4}, std::vector<double>{0.0, 0.0, 1.0, 0.0}));
}

TEST_CASE("linear on a batch equals per-row products") {
  Rng rng(5);
  const Tensor x = oracle::random_tensor({3, 4}, rng);
  const Tensor w = oracle::random_tensor({4, 2}, rng);
  const Tensor b = oracle::random_tensor({2}, rng);
  const Tensor y = linear(x, w, b);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t m = 0; m < 2; ++m) {
      double s = b[m];
      for (std::size_t n = 0; n < 4; ++n) s += x.at(r, n) * w.at(n, m);
      CHECK(y.at(r, m) == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("softmax is stable for huge scores and sums to one") {
  const std::vector<double> s{1000.0, 1001.0, -1e300};
  const std::vector<double> p = softmax(s);
  CHECK(std::isfinite(p[0]));
  CHECK(p[2] == 0.0);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
  CHECK(p[1] / p[0] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("gradcheck accepts a correct gradient and flags a wrong one") {
  Rng rng(9);
  const Tensor x = oracle::random_tensor({10}, rng, 0.5, 1.5);
  auto f = [](const Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i] * t[i];
    return s;
  };
  Tensor g = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = 3.0 * x[i] * x[i];
  CHECK(gradcheck(f, g, x).max_rel_error < 1e-8);
  g[4] *= 1.01;
  const GradcheckReport bad = gradcheck(f, g, x);
  CHECK(bad.max_rel_error > 1e-3);
  CHECK(bad.worst_coordinate == 4);
}

TEST_CASE("every layer passes its finite-difference check") {
  for (std::uint64_t seed : {1u, 2u}) {
    for (const CheckResult& r : layer_gradchecks(seed)) {
      INFO(r.label << " err=" << r.report.max_rel_error);
      CHECK(r.passed());
    }
  }
}
