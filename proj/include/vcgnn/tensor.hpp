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

// Dense row-major matrices and the handful of dense operations the models
// need. Kernels are parallel over output rows; each output element is
// accumulated in a fixed order, so results do not depend on thread count.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "vcgnn/counters.hpp"

namespace vcgnn {

using RowIndex = std::uint32_t;

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  // Throws ShapeMismatchError if data.size() != rows * cols.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const;
  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Row i holds the embedding of vertex i.
using EmbeddingTable = DenseMatrix;

enum class Activation { identity, relu };

// One linear transform plus activation: sigma(X * weight + bias).
struct MlpLayer {
  DenseMatrix weight;  // in_dim x out_dim
  std::vector<double> bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
  // Throws ShapeMismatchError when bias length differs from out_dim.
  void validate() const;

  // Weights uniform in [-1/sqrt(in_dim), 1/sqrt(in_dim)], zero bias.
  static MlpLayer init(std::size_t in_dim, std::size_t out_dim,
                       Activation activation, std::uint64_t seed);
};

// threads <= 0 uses the OpenMP default.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b,
                   KernelCounters* counters = nullptr, int threads = 0);

// a * b computed only for the listed rows of a; other output rows are zero.
DenseMatrix matmul_rows(const DenseMatrix& a, const DenseMatrix& b,
                        std::span<const RowIndex> rows,
                        KernelCounters* counters = nullptr, int threads = 0);

// a^T * b, summing only over the listed rows (all rows when `rows` is empty
// and all_rows is true).
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b,
                      std::span<const RowIndex> rows, bool all_rows,
                      KernelCounters* counters = nullptr, int threads = 0);

// a * b^T for the listed rows of a; other output rows are zero.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b,
                      std::span<const RowIndex> rows, bool all_rows,
                      KernelCounters* counters = nullptr, int threads = 0);

DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix relu(const DenseMatrix& a);
DenseMatrix bias_add(const DenseMatrix& a, std::span<const double> bias);
DenseMatrix activate(const DenseMatrix& a, Activation activation);
// grad * sigma'(pre_activation).
DenseMatrix activation_backward(const DenseMatrix& grad,
                                const DenseMatrix& pre_activation,
                                Activation activation);
std::vector<double> column_sums(const DenseMatrix& a);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
void add_inplace(DenseMatrix& a, const DenseMatrix& b);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

struct LossResult {
  double loss = 0.0;
  DenseMatrix dlogits;
};

// Mean softmax cross-entropy over rows; dlogits = (softmax - onehot) / rows.
// Throws InvalidArgumentError for a label count mismatch or label >= cols.
LossResult xent_loss(const DenseMatrix& logits, std::span<const std::uint32_t> labels);

}  // namespace vcgnn
