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

#include <algorithm>
#include <chrono>
#include <cmath>

#include "vcgnn/dkp.hpp"
#include "vcgnn/errors.hpp"
#include "vcgnn/rng.hpp"

namespace vcgnn {
namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, CounterRng& rng) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

template <typename F>
double median_seconds(int reps, F&& body) {
  body();  // warm-up
  std::vector<double> t;
  for (int i = 0; i < std::max(reps, 1); ++i) {
    auto start = std::chrono::steady_clock::now();
    body();
    auto end = std::chrono::steady_clock::now();
    t.push_back(std::chrono::duration<double>(end - start).count());
  }
  std::nth_element(t.begin(), t.begin() + t.size() / 2, t.end());
  return t[t.size() / 2];
}

}  // namespace

std::vector<FitSample> measure_samples(std::span<const LayerDims> dims,
                                       const std::vector<bool>& is_first_layer,
                                       const CalibrationOptions& options) {
  if (dims.size() != is_first_layer.size()) {
    throw InvalidArgumentError("measure_samples: one first-layer flag per dims entry");
  }
  std::vector<FitSample> out;
  KernelContext ctx{options.threads, nullptr};
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const LayerDims& d = dims[i];
    d.validate();
    const bool first = is_first_layer[i];
    auto rng = CounterRng::stream(options.seed, i, 0);

    for (Direction dir : {Direction::fwp, Direction::bwp}) {
      const double r = reduction_factor(d, dir, first);
      if (r < 1.0) continue;
      const auto rows = static_cast<std::size_t>(r);
      DenseMatrix x = random_matrix(rows, d.n_feat, rng);
      DenseMatrix w = random_matrix(d.n_feat, d.n_hid, rng);
      DenseMatrix g = random_matrix(rows, d.n_hid, rng);
      double secs;
      if (dir == Direction::fwp) {
        secs = median_seconds(options.reps, [&] {
          volatile double sink = matmul(x, w, nullptr, options.threads)(0, 0);
          (void)sink;
        });
      } else {
        secs = median_seconds(options.reps, [&] {
          DenseMatrix gw = matmul_tn(x, g, {}, true, nullptr, options.threads);
          DenseMatrix gi = matmul_nt(g, w, {}, true, nullptr, options.threads);
          volatile double sink = gw(0, 0) + gi(0, 0);
          (void)sink;
        });
      }
      out.push_back({d, Order::aggr_first, dir, first, secs});
    }

    if (d.n_feat <= d.n_hid || d.n_src == 0) continue;
    const std::size_t width = d.n_feat - d.n_hid;
    const std::size_t n = std::max(d.n_src, d.n_dst);
    Coo coo;
    coo.n_vertices = n;
    for (std::size_t e = 0; e < d.n_edge; ++e) {
      coo.dst.push_back(static_cast<VertexId>(e % d.n_dst));
      coo.src.push_back(static_cast<VertexId>(rng.bounded(d.n_src)));
    }
    Csr csr = coo_to_csr(coo, 1);
    Csc csc = coo_to_csc(coo, 1);
    DenseMatrix emb = random_matrix(n, width, rng);
    const double fwp = median_seconds(options.reps, [&] {
      volatile double sink = pull(csr, emb, nullptr, Aggregation::mean, WeightApply::none, ctx)(0, 0);
      (void)sink;
    });
    out.push_back({d, Order::comb_first, Direction::fwp, first, fwp});
    const double bwp = median_seconds(options.reps, [&] {
      auto grads = pull_backward(csr, csc, emb, nullptr, nullptr, Aggregation::mean,
                                 WeightApply::none, true, ctx);
      volatile double sink = grads.grad_in(0, 0);
      (void)sink;
    });
    out.push_back({d, Order::comb_first, Direction::bwp, first, bwp});
  }
  return out;
}

std::vector<LayerDims> calibration_grid(std::span<const LayerDims> observed,
                                        std::span<const double> fractions) {
  std::vector<LayerDims> out;
  auto scaled = [](std::size_t v, double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(v))));
  };
  for (const LayerDims& d : observed) {
    for (double f : fractions) {
      LayerDims a = d;
      a.n_src = scaled(d.n_src, f);
      a.n_dst = std::min(a.n_src, scaled(d.n_dst, f));
      a.n_edge = scaled(d.n_edge, f);
      out.push_back(a);

      // Rows shrink while edges stay: varies the edge/row ratio. Both widths
      // shrink too, so neither aggr-first regressor pair is collinear.
      LayerDims b = a;
      b.n_edge = std::max<std::size_t>(d.n_edge, 1);
      const double s = 0.5 + 0.5 * f;
      b.n_feat = scaled(d.n_feat, s);
      b.n_hid = scaled(d.n_hid, s);
      if (d.n_feat > d.n_hid) b.n_feat = std::max(b.n_feat, b.n_hid + 1);
      out.push_back(b);
    }
  }
  return out;
}

}  // namespace vcgnn
