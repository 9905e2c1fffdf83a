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

#include "vcgnn/tensor.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "vcgnn/errors.hpp"
#include "vcgnn/rng.hpp"

namespace vcgnn {
namespace {

int resolve(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

std::string shape(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatchError(std::string(op) + ": " + shape(a) + " vs " + shape(b));
  }
}

// out[r] = a[r] * b, i-k-j order.
void row_times(const DenseMatrix& a, const DenseMatrix& b, std::size_t r,
               DenseMatrix& out) {
  auto dst = out.row(r);
  auto src = a.row(r);
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double v = src[k];
    auto brow = b.row(k);
    for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += v * brow[j];
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeMismatchError("dense matrix " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " given " +
                             std::to_string(data_.size()) + " values");
  }
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeMismatchError("ragged initializer");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void MlpLayer::validate() const {
  if (bias.size() != weight.cols()) {
    throw ShapeMismatchError("bias length " + std::to_string(bias.size()) +
                             " != weight cols " + std::to_string(weight.cols()));
  }
}

MlpLayer MlpLayer::init(std::size_t in_dim, std::size_t out_dim,
                        Activation activation, std::uint64_t seed) {
  MlpLayer layer;
  layer.weight = DenseMatrix(in_dim, out_dim);
  layer.bias.assign(out_dim, 0.0);
  layer.activation = activation;
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(in_dim, 1)));
  CounterRng rng(seed);
  for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
  return layer;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b,
                   KernelCounters* counters, int threads) {
  if (a.cols() != b.rows()) throw ShapeMismatchError("matmul: " + shape(a) + " * " + shape(b));
  DenseMatrix out(a.rows(), b.cols());
  const auto n = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static) num_threads(resolve(threads))
  for (std::int64_t r = 0; r < n; ++r) row_times(a, b, static_cast<std::size_t>(r), out);
  if (counters) counters->combination_macs += a.rows() * a.cols() * b.cols();
  return out;
}

DenseMatrix matmul_rows(const DenseMatrix& a, const DenseMatrix& b,
                        std::span<const RowIndex> rows, KernelCounters* counters,
                        int threads) {
  if (a.cols() != b.rows()) {
    throw ShapeMismatchError("matmul_rows: " + shape(a) + " * " + shape(b));
  }
  DenseMatrix out(a.rows(), b.cols());
  const auto n = static_cast<std::int64_t>(rows.size());
  for (RowIndex r : rows) {
    if (r >= a.rows()) throw ShapeMismatchError("matmul_rows: row index out of range");
  }
#pragma omp parallel for schedule(static) num_threads(resolve(threads))
  for (std::int64_t i = 0; i < n; ++i) row_times(a, b, rows[static_cast<std::size_t>(i)], out);
  if (counters) counters->combination_macs += rows.size() * a.cols() * b.cols();
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b,
                      std::span<const RowIndex> rows, bool all_rows,
                      KernelCounters* counters, int threads) {
  if (a.rows() != b.rows()) {
    throw ShapeMismatchError("matmul_tn: " + shape(a) + "^T * " + shape(b));
  }
  std::vector<RowIndex> every;
  if (all_rows) {
    every.resize(a.rows());
    for (std::size_t i = 0; i < every.size(); ++i) every[i] = static_cast<RowIndex>(i);
    rows = every;
  }
  DenseMatrix out(a.cols(), b.cols());
  const auto p = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static) num_threads(resolve(threads))
  for (std::int64_t i = 0; i < p; ++i) {
    auto dst = out.row(static_cast<std::size_t>(i));
    for (RowIndex r : rows) {
      const double v = a(r, static_cast<std::size_t>(i));
      if (v == 0.0) continue;
      auto brow = b.row(r);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += v * brow[j];
    }
  }
  if (counters) counters->combination_macs += rows.size() * a.cols() * b.cols();
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b,
                      std::span<const RowIndex> rows, bool all_rows,
                      KernelCounters* counters, int threads) {
  if (a.cols() != b.cols()) {
    throw ShapeMismatchError("matmul_nt: " + shape(a) + " * " + shape(b) + "^T");
  }
  std::vector<RowIndex> every;
  if (all_rows) {
    every.resize(a.rows());
    for (std::size_t i = 0; i < every.size(); ++i) every[i] = static_cast<RowIndex>(i);
    rows = every;
  }
  DenseMatrix out(a.rows(), b.rows());
  const auto n = static_cast<std::int64_t>(rows.size());
#pragma omp parallel for schedule(static) num_threads(resolve(threads))
  for (std::int64_t i = 0; i < n; ++i) {
    const RowIndex r = rows[static_cast<std::size_t>(i)];
    auto arow = a.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      dst[j] = acc;
    }
  }
  if (counters) counters->combination_macs += rows.size() * a.cols() * b.rows();
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  }
  return out;
}

DenseMatrix relu(const DenseMatrix& a) {
  DenseMatrix out = a;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

DenseMatrix bias_add(const DenseMatrix& a, std::span<const double> bias) {
  if (bias.size() != a.cols()) {
    throw ShapeMismatchError("bias_add: bias length " + std::to_string(bias.size()) +
                             " vs " + shape(a));
  }
  DenseMatrix out = a;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < a.cols(); ++c) row[c] += bias[c];
  }
  return out;
}

DenseMatrix activate(const DenseMatrix& a, Activation activation) {
  return activation == Activation::relu ? relu(a) : a;
}

DenseMatrix activation_backward(const DenseMatrix& grad, const DenseMatrix& pre,
                                Activation activation) {
  require_same_shape(grad, pre, "activation_backward");
  if (activation == Activation::identity) return grad;
  DenseMatrix out = grad;
  auto g = out.data();
  auto p = pre.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (p[i] <= 0.0) g[i] = 0.0;
  }
  return out;
}

std::vector<double> column_sums(const DenseMatrix& a) {
  std::vector<double> sums(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    for (std::size_t c = 0; c < a.cols(); ++c) sums[c] += row[c];
  }
  return sums;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "add");
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double best = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) best = std::max(best, std::abs(x[i] - y[i]));
  return best;
}

LossResult xent_loss(const DenseMatrix& logits, std::span<const std::uint32_t> labels) {
  if (labels.size() != logits.rows()) {
    throw InvalidArgumentError("xent_loss: " + std::to_string(labels.size()) +
                               " labels for " + std::to_string(logits.rows()) + " rows");
  }
  LossResult result;
  result.dlogits = DenseMatrix(logits.rows(), logits.cols());
  if (logits.rows() == 0) return result;
  const double scale = 1.0 / static_cast<double>(logits.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (labels[r] >= logits.cols()) {
      throw InvalidArgumentError("xent_loss: label " + std::to_string(labels[r]) +
                                 " out of range for " + std::to_string(logits.cols()) +
                                 " classes");
    }
    auto z = logits.row(r);
    const double peak = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - peak);
    const double log_denom = std::log(denom);
    total += log_denom - (z[labels[r]] - peak);
    auto g = result.dlogits.row(r);
    for (std::size_t c = 0; c < z.size(); ++c) {
      g[c] = std::exp(z[c] - peak - log_denom) * scale;
    }
    g[labels[r]] -= scale;
  }
  result.loss = total * scale;
  return result;
}

}  // namespace vcgnn
