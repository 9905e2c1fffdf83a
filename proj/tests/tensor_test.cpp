/* Copyright 2026 The vcgnn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vcgnn/errors.hpp"
#include "vcgnn/tensor.hpp"

namespace vcgnn {
namespace {

using testing::dense_matmul;
using testing::random_matrix;

TEST(Tensor, MatmulMatchesTripleLoop) {
  CounterRng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const DenseMatrix a = random_matrix(rng, 1 + rng.bounded(20), 1 + rng.bounded(20));
    const DenseMatrix b = random_matrix(rng, a.cols(), 1 + rng.bounded(20));
    KernelCounters counters;
    const DenseMatrix c = matmul(a, b, &counters, 2);
    EXPECT_LT(max_abs_diff(c, dense_matmul(a, b)), 1e-12);
    EXPECT_EQ(counters.combination_macs, a.rows() * a.cols() * b.cols());
  }
}

TEST(Tensor, MatmulShapeMismatch) {
  EXPECT_THROW(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), ShapeMismatchError);
  EXPECT_THROW(DenseMatrix(2, 2, std::vector<double>{1.0}), ShapeMismatchError);
}

TEST(Tensor, MatmulRowsComputesOnlyListedRows) {
  CounterRng rng(2);
  const DenseMatrix a = random_matrix(rng, 6, 4);
  const DenseMatrix b = random_matrix(rng, 4, 3);
  const std::vector<RowIndex> rows{1, 4};
  KernelCounters counters;
  const DenseMatrix c = matmul_rows(a, b, rows, &counters);
  const DenseMatrix full = dense_matmul(a, b);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t j = 0; j < 3; ++j) {
      const bool listed = r == 1 || r == 4;
      EXPECT_NEAR(c(r, j), listed ? full(r, j) : 0.0, 1e-12);
    }
  }
  EXPECT_EQ(counters.combination_macs, 2u * 4 * 3);
  const std::vector<RowIndex> bad{6};
  EXPECT_THROW(matmul_rows(a, b, bad), ShapeMismatchError);
}

TEST(Tensor, TransposedProducts) {
  CounterRng rng(3);
  const DenseMatrix a = random_matrix(rng, 7, 3);
  const DenseMatrix b = random_matrix(rng, 7, 5);
  EXPECT_LT(max_abs_diff(matmul_tn(a, b, {}, true), dense_matmul(transpose(a), b)), 1e-12);
  const DenseMatrix c = random_matrix(rng, 4, 3);
  EXPECT_LT(max_abs_diff(matmul_nt(a, c, {}, true), dense_matmul(a, transpose(c))), 1e-12);

  // Restricting to rows equals zeroing the other rows first.
  const std::vector<RowIndex> rows{0, 2, 5};
  DenseMatrix masked = a;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (r != 0 && r != 2 && r != 5) {
      for (double& v : masked.row(r)) v = 0.0;
    }
  }
  EXPECT_LT(max_abs_diff(matmul_tn(a, b, rows, false), dense_matmul(transpose(masked), b)),
            1e-12);
  EXPECT_LT(max_abs_diff(matmul_nt(a, c, rows, false), dense_matmul(masked, transpose(c))),
            1e-12);
}

TEST(Tensor, ActivationsAndBias) {
  const DenseMatrix x = DenseMatrix::from_rows({{-1.0, 2.0}, {0.5, -3.0}});
  EXPECT_EQ(relu(x), DenseMatrix::from_rows({{0.0, 2.0}, {0.5, 0.0}}));
  EXPECT_EQ(activate(x, Activation::identity), x);
  const std::vector<double> bias{1.0, -1.0};
  EXPECT_EQ(bias_add(x, bias), DenseMatrix::from_rows({{0.0, 1.0}, {1.5, -4.0}}));
  EXPECT_THROW(bias_add(x, std::vector<double>{1.0}), ShapeMismatchError);
  const DenseMatrix ones(2, 2, 1.0);
  EXPECT_EQ(activation_backward(ones, x, Activation::relu),
            DenseMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}}));
  EXPECT_EQ(column_sums(x), (std::vector<double>{-0.5, -1.0}));
}

TEST(Tensor, MlpInitIsSeededAndBounded) {
  const MlpLayer a = MlpLayer::init(16, 4, Activation::relu, 9);
  const MlpLayer b = MlpLayer::init(16, 4, Activation::relu, 9);
  EXPECT_EQ(a.weight, b.weight);
  EXPECT_NE(a.weight, MlpLayer::init(16, 4, Activation::relu, 10).weight);
  for (double w : a.weight.data()) EXPECT_LE(std::abs(w), 0.25);
  for (double v : a.bias) EXPECT_EQ(v, 0.0);
  MlpLayer bad = a;
  bad.bias.pop_back();
  EXPECT_THROW(bad.validate(), ShapeMismatchError);
}

TEST(Tensor, CrossEntropyGradientMatchesFiniteDifferences) {
  CounterRng rng(4);
  DenseMatrix logits = random_matrix(rng, 5, 4, -2.0, 2.0);
  const std::vector<std::uint32_t> labels{0, 3, 1, 1, 2};
  const LossResult base = xent_loss(logits, labels);
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    DenseMatrix plus = logits;
    DenseMatrix minus = logits;
    plus.data()[i] += h;
    minus.data()[i] -= h;
    const double fd = (xent_loss(plus, labels).loss - xent_loss(minus, labels).loss) / (2 * h);
    EXPECT_NEAR(base.dlogits.data()[i], fd, 1e-8);
  }
}

TEST(Tensor, CrossEntropyUniformLogits) {
  const DenseMatrix logits(3, 4, 0.0);
  const std::vector<std::uint32_t> labels{0, 1, 2};
  EXPECT_NEAR(xent_loss(logits, labels).loss, std::log(4.0), 1e-15);
  const std::vector<std::uint32_t> bad{0, 1, 4};
  EXPECT_THROW(xent_loss(logits, bad), InvalidArgumentError);
}

TEST(Tensor, Finiteness) {
  DenseMatrix m(2, 2, 1.0);
  EXPECT_TRUE(m.all_finite());
  m(1, 1) = std::nan("");
  EXPECT_FALSE(m.all_finite());
}

}  // namespace
}  // namespace vcgnn
