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

#include "vcgnn/napa.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <string>

#include "vcgnn/errors.hpp"

namespace vcgnn {
namespace {

struct Tiling {
  std::size_t width = 1;
  std::size_t blocks = 0;
  std::size_t begin(std::size_t b) const { return b * width; }
  std::size_t end(std::size_t b, std::size_t dim) const {
    return std::min(dim, (b + 1) * width);
  }
};

Tiling make_tiling(std::size_t dim, int partitions) {
  const std::size_t p = static_cast<std::size_t>(std::max(partitions, 1));
  Tiling t;
  t.width = std::max<std::size_t>(1, (dim + p - 1) / p);
  t.blocks = dim == 0 ? 0 : (dim + t.width - 1) / t.width;
  return t;
}

int team(const KernelContext& ctx) { return std::max(ctx.partitions, 1); }

void require_rows(const EmbeddingTable& embed, std::size_t n, const char* op) {
  if (embed.rows() != n) {
    throw ShapeMismatchError(std::string(op) + ": embedding has " +
                             std::to_string(embed.rows()) + " rows, graph has " +
                             std::to_string(n) + " vertices");
  }
}

void require_weights(const EdgeWeights* weights, std::size_t n_edges, std::size_t dim,
                     WeightApply h, const char* op) {
  if (h == WeightApply::none) {
    if (weights != nullptr) {
      throw InvalidArgumentError(std::string(op) + ": weights given with h=none");
    }
    return;
  }
  if (weights == nullptr) {
    throw InvalidArgumentError(std::string(op) + ": weighted mode without weights");
  }
  if (weights->n_edges() != n_edges) {
    throw ShapeMismatchError(std::string(op) + ": " + std::to_string(weights->n_edges()) +
                             " weight rows for " + std::to_string(n_edges) + " edges");
  }
  const bool ok = h == WeightApply::sum ? weights->dim() == dim
                                        : (weights->dim() == dim || weights->dim() == 1);
  if (!ok) {
    throw ShapeMismatchError(std::string(op) + ": weight dim " +
                             std::to_string(weights->dim()) + " incompatible with width " +
                             std::to_string(dim));
  }
}

double edge_coefficient(Aggregation f, std::size_t degree) {
  return f == Aggregation::mean && degree > 0 ? 1.0 / static_cast<double>(degree) : 1.0;
}

}  // namespace

void KernelModes::validate() const {
  if ((g == EdgeWeightFn::none) != (h == WeightApply::none)) {
    throw InvalidArgumentError("kernel modes: g and h must both be none or both be set");
  }
  if (h == WeightApply::sum && g == EdgeWeightFn::dot_product) {
    throw InvalidArgumentError("kernel modes: h=sum needs vector-valued weights");
  }
}

std::size_t KernelModes::weight_dim(std::size_t feat) const {
  switch (g) {
    case EdgeWeightFn::none: return 0;
    case EdgeWeightFn::dot_product: return 1;
    default: return feat;
  }
}

bool KernelModes::commutes_with_dense_transform() const {
  return g == EdgeWeightFn::none ||
         (g == EdgeWeightFn::dot_product && h == WeightApply::scale);
}

EdgeWeights neighbor_apply(const Csr& csr, const EmbeddingTable& embed, EdgeWeightFn g,
                           const KernelContext& ctx) {
  require_rows(embed, csr.n_vertices(), "neighbor_apply");
  if (g == EdgeWeightFn::none) throw InvalidArgumentError("neighbor_apply: g=none");

  const std::size_t dim = embed.cols();
  const bool scalar = g == EdgeWeightFn::dot_product;
  EdgeWeights out{DenseMatrix(csr.n_edges(), scalar ? 1 : dim)};
  // A dot product reduces over the whole row, so it is tiled by destination only.
  const Tiling tiling = scalar ? Tiling{std::max<std::size_t>(dim, 1), 1}
                               : make_tiling(dim, ctx.partitions);
  const auto ptr = csr.src_ptr();
  const auto ids = csr.src_ids();
  const auto n_tiles = static_cast<std::int64_t>(csr.n_vertices() * tiling.blocks);
  std::uint64_t rows_loaded = 0;
  std::uint64_t dst_loaded = 0;

#pragma omp parallel for schedule(dynamic, 64) num_threads(team(ctx)) \
    reduction(+ : rows_loaded, dst_loaded)
  for (std::int64_t t = 0; t < n_tiles; ++t) {
    const auto d = static_cast<VertexId>(static_cast<std::size_t>(t) / tiling.blocks);
    const std::size_t b = static_cast<std::size_t>(t) % tiling.blocks;
    const EdgeIndex first = ptr[d];
    const EdgeIndex last = ptr[d + 1];
    if (first == last) continue;
    if (b == 0) {
      dst_loaded += 1;
      rows_loaded += 1 + (last - first);
    }
    const std::size_t c0 = tiling.begin(b);
    const std::size_t c1 = scalar ? dim : tiling.end(b, dim);
    const double* xd = embed.row(d).data();
    for (EdgeIndex e = first; e < last; ++e) {
      const double* xs = embed.row(ids[e]).data();
      double* w = out.values.row(e).data();
      switch (g) {
        case EdgeWeightFn::element_wise_product:
          for (std::size_t c = c0; c < c1; ++c) w[c] = xs[c] * xd[c];
          break;
        case EdgeWeightFn::add:
          for (std::size_t c = c0; c < c1; ++c) w[c] = xs[c] + xd[c];
          break;
        case EdgeWeightFn::dot_product: {
          double acc = 0.0;
          for (std::size_t c = c0; c < c1; ++c) acc += xs[c] * xd[c];
          w[0] = acc;
          break;
        }
        case EdgeWeightFn::none:
          break;
      }
    }
  }
  if (ctx.counters) {
    ctx.counters->embedding_rows_loaded += rows_loaded;
    ctx.counters->dst_rows_loaded += dst_loaded;
  }
  return out;
}

DenseMatrix pull(const Csr& csr, const EmbeddingTable& embed, const EdgeWeights* weights,
                 Aggregation f, WeightApply h, const KernelContext& ctx) {
  require_rows(embed, csr.n_vertices(), "pull");
  const std::size_t dim = embed.cols();
  require_weights(weights, csr.n_edges(), dim, h, "pull");

  DenseMatrix out(csr.n_vertices(), dim);
  const Tiling tiling = make_tiling(dim, ctx.partitions);
  const auto ptr = csr.src_ptr();
  const auto ids = csr.src_ids();
  const bool scalar_w = weights != nullptr && weights->dim() == 1 && dim != 1;
  const auto n_tiles = static_cast<std::int64_t>(csr.n_vertices() * tiling.blocks);
  std::uint64_t rows_loaded = 0;
  std::uint64_t dst_touched = 0;
  std::uint64_t macs = 0;

#pragma omp parallel for schedule(dynamic, 64) num_threads(team(ctx)) \
    reduction(+ : rows_loaded, dst_touched, macs)
  for (std::int64_t t = 0; t < n_tiles; ++t) {
    const auto d = static_cast<VertexId>(static_cast<std::size_t>(t) / tiling.blocks);
    const std::size_t b = static_cast<std::size_t>(t) % tiling.blocks;
    const EdgeIndex first = ptr[d];
    const EdgeIndex last = ptr[d + 1];
    if (first == last) continue;
    if (b == 0) {
      dst_touched += 1;
      rows_loaded += last - first;
      macs += (last - first) * dim;
    }
    const std::size_t c0 = tiling.begin(b);
    const std::size_t c1 = tiling.end(b, dim);
    double* acc = out.row(d).data();
    for (EdgeIndex e = first; e < last; ++e) {
      const double* xs = embed.row(ids[e]).data();
      if (h == WeightApply::none) {
        for (std::size_t c = c0; c < c1; ++c) acc[c] += xs[c];
      } else {
        const double* w = weights->values.row(e).data();
        if (h == WeightApply::sum) {
          for (std::size_t c = c0; c < c1; ++c) acc[c] += xs[c] + w[c];
        } else if (scalar_w) {
          for (std::size_t c = c0; c < c1; ++c) acc[c] += w[0] * xs[c];
        } else {
          for (std::size_t c = c0; c < c1; ++c) acc[c] += w[c] * xs[c];
        }
      }
    }
    if (f == Aggregation::mean) {
      const double deg = static_cast<double>(last - first);
      for (std::size_t c = c0; c < c1; ++c) acc[c] /= deg;
    }
  }
  if (ctx.counters) {
    ctx.counters->embedding_rows_loaded += rows_loaded;
    ctx.counters->dst_rows_loaded += dst_touched;
    ctx.counters->aggregation_macs += macs;
  }
  return out;
}

DenseMatrix apply(const DenseMatrix& aggr, const MlpLayer& layer, const KernelContext& ctx) {
  return apply_forward(aggr, layer, {}, true, ctx).output;
}

ApplyResult apply_forward(const DenseMatrix& aggr, const MlpLayer& layer,
                          std::span<const RowIndex> rows, bool all_rows,
                          const KernelContext& ctx) {
  layer.validate();
  if (aggr.cols() != layer.in_dim()) {
    throw ShapeMismatchError("apply: input width " + std::to_string(aggr.cols()) +
                             " != weight rows " + std::to_string(layer.in_dim()));
  }
  ApplyResult result;
  DenseMatrix product = all_rows ? matmul(aggr, layer.weight, ctx.counters, team(ctx))
                                 : matmul_rows(aggr, layer.weight, rows, ctx.counters, team(ctx));
  result.cache.pre_activation = bias_add(product, layer.bias);
  result.output = activate(result.cache.pre_activation, layer.activation);
  result.cache.input = aggr;
  result.cache.valid = true;
  return result;
}

ApplyGrads apply_backward(const DenseMatrix& grad_out, const ApplyCache& cache,
                          const MlpLayer& layer, std::span<const RowIndex> rows,
                          bool all_rows, bool need_grad_in, const KernelContext& ctx) {
  if (!cache.valid) throw ConsistencyError("apply_backward: missing forward cache");
  const DenseMatrix gz = activation_backward(grad_out, cache.pre_activation, layer.activation);
  ApplyGrads grads;
  grads.grad_weight = matmul_tn(cache.input, gz, rows, all_rows, ctx.counters, team(ctx));
  grads.grad_bias = column_sums(gz);
  if (need_grad_in) {
    grads.grad_in = matmul_nt(gz, layer.weight, rows, all_rows, ctx.counters, team(ctx));
  }
  return grads;
}

std::vector<EdgeIndex> csc_to_csr_edge_map(const Csr& csr, const Csc& csc) {
  if (csr.n_vertices() != csc.n_vertices() || csr.n_edges() != csc.n_edges()) {
    throw ConsistencyError("csr/csc size mismatch: " + std::to_string(csr.n_vertices()) +
                           "/" + std::to_string(csr.n_edges()) + " vs " +
                           std::to_string(csc.n_vertices()) + "/" +
                           std::to_string(csc.n_edges()));
  }
  std::vector<EdgeIndex> map(csc.n_edges());
  const auto cptr = csc.dst_ptr();
  const auto cids = csc.dst_ids();
  std::vector<EdgeIndex> cursor(cptr.begin(), cptr.end() - 1);
  const auto rptr = csr.src_ptr();
  const auto rids = csr.src_ids();
  // Csr is visited in ascending destination order, which is exactly the
  // order destinations appear inside each ascending Csc bucket.
  for (VertexId d = 0; d < csr.n_vertices(); ++d) {
    for (EdgeIndex e = rptr[d]; e < rptr[d + 1]; ++e) {
      const VertexId s = rids[e];
      const EdgeIndex slot = cursor[s]++;
      if (slot >= cptr[s + 1] || cids[slot] != d) {
        throw ConsistencyError("csr/csc inconsistency at edge " + std::to_string(s) +
                               "->" + std::to_string(d));
      }
      map[slot] = e;
    }
  }
  return map;
}

PullGrads pull_backward(const Csr& csr, const Csc& csc, const DenseMatrix& grad_out,
                        const EdgeWeights* weights, const EmbeddingTable* embed,
                        Aggregation f, WeightApply h, bool need_grad_in,
                        const KernelContext& ctx) {
  if (grad_out.rows() != csr.n_vertices()) {
    throw ShapeMismatchError("pull_backward: grad has " + std::to_string(grad_out.rows()) +
                             " rows for " + std::to_string(csr.n_vertices()) + " vertices");
  }
  const std::size_t dim = grad_out.cols();
  require_weights(weights, csr.n_edges(), dim, h, "pull_backward");
  if (h == WeightApply::scale) {
    if (embed == nullptr) throw InvalidArgumentError("pull_backward: h=scale needs embed");
    require_rows(*embed, csr.n_vertices(), "pull_backward");
  }
  const auto map = csc_to_csr_edge_map(csr, csc);
  const auto rptr = csr.src_ptr();
  const auto rids = csr.src_ids();
  const bool scalar_w = weights != nullptr && weights->dim() == 1 && dim != 1;

  PullGrads grads;
  if (need_grad_in) {
    grads.grad_in = DenseMatrix(csc.n_vertices(), dim);
    const Tiling tiling = make_tiling(dim, ctx.partitions);
    const auto cptr = csc.dst_ptr();
    const auto cids = csc.dst_ids();
    const auto n_tiles = static_cast<std::int64_t>(csc.n_vertices() * tiling.blocks);
    std::uint64_t macs = 0;
#pragma omp parallel for schedule(dynamic, 64) num_threads(team(ctx)) reduction(+ : macs)
    for (std::int64_t t = 0; t < n_tiles; ++t) {
      const auto s = static_cast<VertexId>(static_cast<std::size_t>(t) / tiling.blocks);
      const std::size_t b = static_cast<std::size_t>(t) % tiling.blocks;
      if (b == 0) macs += (cptr[s + 1] - cptr[s]) * dim;
      const std::size_t c0 = tiling.begin(b);
      const std::size_t c1 = tiling.end(b, dim);
      double* acc = grads.grad_in.row(s).data();
      for (EdgeIndex p = cptr[s]; p < cptr[s + 1]; ++p) {
        const VertexId d = cids[p];
        const double coef = edge_coefficient(f, rptr[d + 1] - rptr[d]);
        const double* g = grad_out.row(d).data();
        if (h == WeightApply::scale) {
          const double* w = weights->values.row(map[p]).data();
          if (scalar_w) {
            const double k = coef * w[0];
            for (std::size_t c = c0; c < c1; ++c) acc[c] += k * g[c];
          } else {
            for (std::size_t c = c0; c < c1; ++c) acc[c] += coef * w[c] * g[c];
          }
        } else {
          for (std::size_t c = c0; c < c1; ++c) acc[c] += coef * g[c];
        }
      }
    }
    if (ctx.counters) ctx.counters->aggregation_macs += macs;
  }

  if (weights != nullptr) {
    EdgeWeights gw{DenseMatrix(csr.n_edges(), weights->dim())};
    const auto n = static_cast<std::int64_t>(csr.n_vertices());
#pragma omp parallel for schedule(dynamic, 64) num_threads(team(ctx))
    for (std::int64_t di = 0; di < n; ++di) {
      const auto d = static_cast<VertexId>(di);
      const double coef = edge_coefficient(f, rptr[d + 1] - rptr[d]);
      const double* g = grad_out.row(d).data();
      for (EdgeIndex e = rptr[d]; e < rptr[d + 1]; ++e) {
        double* out = gw.values.row(e).data();
        if (h == WeightApply::sum) {
          for (std::size_t c = 0; c < dim; ++c) out[c] = coef * g[c];
        } else {
          const double* xs = embed->row(rids[e]).data();
          if (scalar_w) {
            double acc = 0.0;
            for (std::size_t c = 0; c < dim; ++c) acc += g[c] * xs[c];
            out[0] = coef * acc;
          } else {
            for (std::size_t c = 0; c < dim; ++c) out[c] = coef * g[c] * xs[c];
          }
        }
      }
    }
    grads.grad_weights = std::move(gw);
  }
  return grads;
}

NeighborApplyGrads neighbor_apply_backward(const Csr& csr, const Csc& csc,
                                           const EdgeWeights& grad_weights,
                                           const EmbeddingTable& embed, EdgeWeightFn g,
                                           const KernelContext& ctx) {
  require_rows(embed, csr.n_vertices(), "neighbor_apply_backward");
  const std::size_t dim = embed.cols();
  const bool scalar = g == EdgeWeightFn::dot_product;
  if (g == EdgeWeightFn::none) throw InvalidArgumentError("neighbor_apply_backward: g=none");
  if (grad_weights.n_edges() != csr.n_edges() ||
      grad_weights.dim() != (scalar ? 1 : dim)) {
    throw ShapeMismatchError("neighbor_apply_backward: grad weights shape mismatch");
  }
  const auto map = csc_to_csr_edge_map(csr, csc);
  const Tiling tiling = make_tiling(dim, ctx.partitions);

  // One endpoint's gradient given the edge gradient and the other endpoint.
  auto accumulate = [&](double* acc, const double* gw, const double* other, std::size_t c0,
                        std::size_t c1) {
    switch (g) {
      case EdgeWeightFn::element_wise_product:
        for (std::size_t c = c0; c < c1; ++c) acc[c] += gw[c] * other[c];
        break;
      case EdgeWeightFn::add:
        for (std::size_t c = c0; c < c1; ++c) acc[c] += gw[c];
        break;
      case EdgeWeightFn::dot_product:
        for (std::size_t c = c0; c < c1; ++c) acc[c] += gw[0] * other[c];
        break;
      case EdgeWeightFn::none:
        break;
    }
  };

  NeighborApplyGrads grads{DenseMatrix(csr.n_vertices(), dim),
                           DenseMatrix(csr.n_vertices(), dim)};
  const auto rptr = csr.src_ptr();
  const auto rids = csr.src_ids();
  const auto cptr = csc.dst_ptr();
  const auto cids = csc.dst_ids();
  const auto n_tiles = static_cast<std::int64_t>(csr.n_vertices() * tiling.blocks);

#pragma omp parallel for schedule(dynamic, 64) num_threads(team(ctx))
  for (std::int64_t t = 0; t < n_tiles; ++t) {
    const auto v = static_cast<VertexId>(static_cast<std::size_t>(t) / tiling.blocks);
    const std::size_t b = static_cast<std::size_t>(t) % tiling.blocks;
    const std::size_t c0 = tiling.begin(b);
    const std::size_t c1 = tiling.end(b, dim);
    double* gd = grads.grad_dst.row(v).data();
    for (EdgeIndex e = rptr[v]; e < rptr[v + 1]; ++e) {
      accumulate(gd, grad_weights.values.row(e).data(), embed.row(rids[e]).data(), c0, c1);
    }
    double* gs = grads.grad_src.row(v).data();
    for (EdgeIndex p = cptr[v]; p < cptr[v + 1]; ++p) {
      accumulate(gs, grad_weights.values.row(map[p]).data(), embed.row(cids[p]).data(), c0,
                 c1);
    }
  }
  return grads;
}

}  // namespace vcgnn
