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

// Edge-centric and gather/scatter kernels. They exist to reproduce the
// redundant destination loads of per-edge scheduling and the per-edge
// materialization of sparse-to-dense gathering, and are instrumented so both
// effects show up in KernelCounters.

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <string>

#include "vcgnn/errors.hpp"
#include "vcgnn/napa.hpp"

namespace vcgnn {
namespace {

int team(const KernelContext& ctx) { return std::max(ctx.partitions, 1); }

std::vector<std::uint32_t> in_degrees(const Coo& coo) {
  std::vector<std::uint32_t> deg(coo.n_vertices, 0);
  for (VertexId d : coo.dst) ++deg[d];
  return deg;
}

void check_inputs(const Coo& coo, const EmbeddingTable& embed, const EdgeWeights* weights,
                  WeightApply h, const char* op) {
  coo.validate();
  if (embed.rows() != coo.n_vertices) {
    throw ShapeMismatchError(std::string(op) + ": embedding rows != vertices");
  }
  if ((weights == nullptr) != (h == WeightApply::none)) {
    throw InvalidArgumentError(std::string(op) + ": weights presence does not match h");
  }
  if (weights != nullptr && weights->n_edges() != coo.n_edges()) {
    throw ShapeMismatchError(std::string(op) + ": weight rows != edges");
  }
}

// Message of one edge under h, written into out[0..dim).
inline void message(const double* xs, const double* w, std::size_t wdim, std::size_t dim,
                    WeightApply h, double* out) {
  switch (h) {
    case WeightApply::none:
      std::copy(xs, xs + dim, out);
      break;
    case WeightApply::sum:
      for (std::size_t c = 0; c < dim; ++c) out[c] = xs[c] + w[c];
      break;
    case WeightApply::scale:
      if (wdim == 1 && dim != 1) {
        for (std::size_t c = 0; c < dim; ++c) out[c] = w[0] * xs[c];
      } else {
        for (std::size_t c = 0; c < dim; ++c) out[c] = w[c] * xs[c];
      }
      break;
  }
}

inline void edge_weight(const double* xs, const double* xd, std::size_t dim, EdgeWeightFn g,
                        double* w) {
  switch (g) {
    case EdgeWeightFn::element_wise_product:
      for (std::size_t c = 0; c < dim; ++c) w[c] = xs[c] * xd[c];
      break;
    case EdgeWeightFn::add:
      for (std::size_t c = 0; c < dim; ++c) w[c] = xs[c] + xd[c];
      break;
    case EdgeWeightFn::dot_product: {
      double acc = 0.0;
      for (std::size_t c = 0; c < dim; ++c) acc += xs[c] * xd[c];
      w[0] = acc;
      break;
    }
    case EdgeWeightFn::none:
      throw InvalidArgumentError("edge weight with g=none");
  }
}

double coefficient(Aggregation f, std::uint32_t degree) {
  return f == Aggregation::mean && degree > 0 ? 1.0 / degree : 1.0;
}

// Gradient of the pull message wrt its source row and its weight, for one
// edge with upstream gradient g (already scaled by the aggregation coefficient).
inline void message_backward(const double* g, const double* xs, const double* w,
                             std::size_t wdim, std::size_t dim, WeightApply h,
                             double* grad_src, double* grad_w) {
  const bool scalar = wdim == 1 && dim != 1;
  switch (h) {
    case WeightApply::none:
      if (grad_src) std::copy(g, g + dim, grad_src);
      break;
    case WeightApply::sum:
      if (grad_src) std::copy(g, g + dim, grad_src);
      std::copy(g, g + dim, grad_w);
      break;
    case WeightApply::scale:
      if (scalar) {
        double acc = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
          if (grad_src) grad_src[c] = w[0] * g[c];
          acc += g[c] * xs[c];
        }
        grad_w[0] = acc;
      } else {
        for (std::size_t c = 0; c < dim; ++c) {
          if (grad_src) grad_src[c] = w[c] * g[c];
          grad_w[c] = g[c] * xs[c];
        }
      }
      break;
  }
}

// Endpoint gradients of g for one edge.
inline void weight_backward(const double* gw, const double* xs, const double* xd,
                            std::size_t dim, EdgeWeightFn g, double* gsrc, double* gdst) {
  for (std::size_t c = 0; c < dim; ++c) {
    switch (g) {
      case EdgeWeightFn::element_wise_product:
        gsrc[c] = gw[c] * xd[c];
        gdst[c] = gw[c] * xs[c];
        break;
      case EdgeWeightFn::add:
        gsrc[c] = gw[c];
        gdst[c] = gw[c];
        break;
      case EdgeWeightFn::dot_product:
        gsrc[c] = gw[0] * xd[c];
        gdst[c] = gw[0] * xs[c];
        break;
      case EdgeWeightFn::none:
        break;
    }
  }
}

}  // namespace

EdgeWeights sddmm_edgewise(const Coo& coo, const EmbeddingTable& embed, EdgeWeightFn g,
                           const KernelContext& ctx) {
  check_inputs(coo, embed, nullptr, WeightApply::none, "sddmm_edgewise");
  const std::size_t dim = embed.cols();
  const std::size_t wdim = g == EdgeWeightFn::dot_product ? 1 : dim;
  EdgeWeights out{DenseMatrix(coo.n_edges(), wdim)};
  const auto n = static_cast<std::int64_t>(coo.n_edges());
#pragma omp parallel for schedule(static) num_threads(team(ctx))
  for (std::int64_t e = 0; e < n; ++e) {
    // Both endpoint rows are fetched for every edge.
    edge_weight(embed.row(coo.src[e]).data(), embed.row(coo.dst[e]).data(), dim, g,
                out.values.row(static_cast<std::size_t>(e)).data());
  }
  if (ctx.counters) {
    ctx.counters->embedding_rows_loaded += 2 * coo.n_edges();
    ctx.counters->dst_rows_loaded += coo.n_edges();
  }
  return out;
}

DenseMatrix spmm_edgewise(const Coo& coo, const EmbeddingTable& embed,
                          const EdgeWeights* weights, Aggregation f, WeightApply h,
                          const KernelContext& ctx) {
  check_inputs(coo, embed, weights, h, "spmm_edgewise");
  const std::size_t dim = embed.cols();
  const std::size_t wdim = weights ? weights->dim() : 0;
  const auto deg = in_degrees(coo);
  DenseMatrix out(coo.n_vertices, dim);
  const auto n = static_cast<std::int64_t>(coo.n_edges());
#pragma omp parallel num_threads(team(ctx))
  {
    std::vector<double> msg(dim);
#pragma omp for schedule(static)
    for (std::int64_t e = 0; e < n; ++e) {
      const VertexId d = coo.dst[e];
      message(embed.row(coo.src[e]).data(),
              weights ? weights->values.row(static_cast<std::size_t>(e)).data() : nullptr,
              wdim, dim, h, msg.data());
      const double k = coefficient(f, deg[d]);
      double* acc = out.row(d).data();
      for (std::size_t c = 0; c < dim; ++c) {
#pragma omp atomic update
        acc[c] += k * msg[c];
      }
    }
  }
  if (ctx.counters) {
    ctx.counters->embedding_rows_loaded += coo.n_edges();
    ctx.counters->dst_rows_loaded += coo.n_edges();
    ctx.counters->aggregation_macs += coo.n_edges() * dim;
  }
  return out;
}

PullGrads spmm_backward_edgewise(const Coo& coo, const DenseMatrix& grad_out,
                                 const EdgeWeights* weights, const EmbeddingTable* embed,
                                 Aggregation f, WeightApply h, bool need_grad_in,
                                 const KernelContext& ctx) {
  coo.validate();
  if (grad_out.rows() != coo.n_vertices) {
    throw ShapeMismatchError("spmm_backward_edgewise: grad rows != vertices");
  }
  if (h == WeightApply::scale && embed == nullptr) {
    throw InvalidArgumentError("spmm_backward_edgewise: h=scale needs embed");
  }
  const std::size_t dim = grad_out.cols();
  const std::size_t wdim = weights ? weights->dim() : 0;
  const auto deg = in_degrees(coo);
  PullGrads grads;
  if (need_grad_in) grads.grad_in = DenseMatrix(coo.n_vertices, dim);
  if (weights) grads.grad_weights = EdgeWeights{DenseMatrix(coo.n_edges(), wdim)};
  const auto n = static_cast<std::int64_t>(coo.n_edges());
#pragma omp parallel num_threads(team(ctx))
  {
    std::vector<double> scaled(dim), gsrc(dim), dummy(std::max<std::size_t>(wdim, dim));
#pragma omp for schedule(static)
    for (std::int64_t e = 0; e < n; ++e) {
      const auto ei = static_cast<std::size_t>(e);
      const VertexId s = coo.src[ei];
      const VertexId d = coo.dst[ei];
      const double k = coefficient(f, deg[d]);
      const double* g = grad_out.row(d).data();
      for (std::size_t c = 0; c < dim; ++c) scaled[c] = k * g[c];
      double* gw = weights ? grads.grad_weights->values.row(ei).data() : dummy.data();
      message_backward(scaled.data(), h == WeightApply::scale ? embed->row(s).data() : nullptr,
                       weights ? weights->values.row(ei).data() : nullptr, wdim, dim, h,
                       gsrc.data(), gw);
      if (need_grad_in) {
        double* acc = grads.grad_in.row(s).data();
        for (std::size_t c = 0; c < dim; ++c) {
#pragma omp atomic update
          acc[c] += gsrc[c];
        }
      }
    }
  }
  if (ctx.counters && need_grad_in) {
    ctx.counters->aggregation_macs += coo.n_edges() * dim;
  }
  return grads;
}

NeighborApplyGrads sddmm_backward_edgewise(const Coo& coo, const EdgeWeights& grad_weights,
                                           const EmbeddingTable& embed, EdgeWeightFn g,
                                           const KernelContext& ctx) {
  check_inputs(coo, embed, nullptr, WeightApply::none, "sddmm_backward_edgewise");
  const std::size_t dim = embed.cols();
  NeighborApplyGrads grads{DenseMatrix(coo.n_vertices, dim), DenseMatrix(coo.n_vertices, dim)};
  const auto n = static_cast<std::int64_t>(coo.n_edges());
#pragma omp parallel num_threads(team(ctx))
  {
    std::vector<double> gs(dim), gd(dim);
#pragma omp for schedule(static)
    for (std::int64_t e = 0; e < n; ++e) {
      const auto ei = static_cast<std::size_t>(e);
      const VertexId s = coo.src[ei];
      const VertexId d = coo.dst[ei];
      weight_backward(grad_weights.values.row(ei).data(), embed.row(s).data(),
                      embed.row(d).data(), dim, g, gs.data(), gd.data());
      double* as = grads.grad_src.row(s).data();
      double* ad = grads.grad_dst.row(d).data();
      for (std::size_t c = 0; c < dim; ++c) {
#pragma omp atomic update
        as[c] += gs[c];
#pragma omp atomic update
        ad[c] += gd[c];
      }
    }
  }
  return grads;
}

EdgeWeights sddmm_scatter(const Coo& coo, const EmbeddingTable& embed, EdgeWeightFn g,
                          const KernelContext& ctx) {
  check_inputs(coo, embed, nullptr, WeightApply::none, "sddmm_scatter");
  const std::size_t dim = embed.cols();
  const std::size_t ne = coo.n_edges();
  // index_select of both endpoints into dense per-edge tensors
  DenseMatrix gathered_src(ne, dim), gathered_dst(ne, dim);
  for (std::size_t e = 0; e < ne; ++e) {
    auto s = embed.row(coo.src[e]);
    auto d = embed.row(coo.dst[e]);
    std::copy(s.begin(), s.end(), gathered_src.row(e).begin());
    std::copy(d.begin(), d.end(), gathered_dst.row(e).begin());
  }
  EdgeWeights out{DenseMatrix(ne, g == EdgeWeightFn::dot_product ? 1 : dim)};
  const auto n = static_cast<std::int64_t>(ne);
#pragma omp parallel for schedule(static) num_threads(team(ctx))
  for (std::int64_t e = 0; e < n; ++e) {
    const auto ei = static_cast<std::size_t>(e);
    edge_weight(gathered_src.row(ei).data(), gathered_dst.row(ei).data(), dim, g,
                out.values.row(ei).data());
  }
  if (ctx.counters) {
    ctx.counters->embedding_rows_loaded += 2 * ne;
    ctx.counters->dst_rows_loaded += ne;
    ctx.counters->intermediate_rows_materialized += 2 * ne;
  }
  return out;
}

DenseMatrix spmm_scatter(const Coo& coo, const EmbeddingTable& embed,
                         const EdgeWeights* weights, Aggregation f, WeightApply h,
                         const KernelContext& ctx) {
  check_inputs(coo, embed, weights, h, "spmm_scatter");
  const std::size_t dim = embed.cols();
  const std::size_t wdim = weights ? weights->dim() : 0;
  const std::size_t ne = coo.n_edges();
  DenseMatrix messages(ne, dim);
  const auto n = static_cast<std::int64_t>(ne);
#pragma omp parallel for schedule(static) num_threads(team(ctx))
  for (std::int64_t e = 0; e < n; ++e) {
    const auto ei = static_cast<std::size_t>(e);
    message(embed.row(coo.src[ei]).data(), weights ? weights->values.row(ei).data() : nullptr,
            wdim, dim, h, messages.row(ei).data());
  }
  // scatter_sum / scatter_mean by destination index
  const auto deg = in_degrees(coo);
  DenseMatrix out(coo.n_vertices, dim);
  for (std::size_t e = 0; e < ne; ++e) {
    double* acc = out.row(coo.dst[e]).data();
    const double* m = messages.row(e).data();
    for (std::size_t c = 0; c < dim; ++c) acc[c] += m[c];
  }
  if (f == Aggregation::mean) {
    for (std::size_t v = 0; v < coo.n_vertices; ++v) {
      if (deg[v] == 0) continue;
      for (double& x : out.row(v)) x /= deg[v];
    }
  }
  if (ctx.counters) {
    ctx.counters->embedding_rows_loaded += ne;
    ctx.counters->dst_rows_loaded += ne;
    ctx.counters->intermediate_rows_materialized += ne;
    ctx.counters->aggregation_macs += ne * dim;
  }
  return out;
}

PullGrads spmm_backward_scatter(const Coo& coo, const DenseMatrix& grad_out,
                                const EdgeWeights* weights, const EmbeddingTable* embed,
                                Aggregation f, WeightApply h, bool need_grad_in,
                                const KernelContext& ctx) {
  coo.validate();
  if (grad_out.rows() != coo.n_vertices) {
    throw ShapeMismatchError("spmm_backward_scatter: grad rows != vertices");
  }
  if (h == WeightApply::scale && embed == nullptr) {
    throw InvalidArgumentError("spmm_backward_scatter: h=scale needs embed");
  }
  const std::size_t dim = grad_out.cols();
  const std::size_t wdim = weights ? weights->dim() : 0;
  const std::size_t ne = coo.n_edges();
  const auto deg = in_degrees(coo);
  // Gather the upstream gradient of every edge's destination.
  DenseMatrix gathered(ne, dim);
  for (std::size_t e = 0; e < ne; ++e) {
    const double k = coefficient(f, deg[coo.dst[e]]);
    auto g = grad_out.row(coo.dst[e]);
    auto out = gathered.row(e);
    for (std::size_t c = 0; c < dim; ++c) out[c] = k * g[c];
  }
  PullGrads grads;
  DenseMatrix per_edge_src(ne, dim);
  if (weights) grads.grad_weights = EdgeWeights{DenseMatrix(ne, wdim)};
  std::vector<double> dummy(std::max<std::size_t>(wdim, dim));
  for (std::size_t e = 0; e < ne; ++e) {
    message_backward(gathered.row(e).data(),
                     h == WeightApply::scale ? embed->row(coo.src[e]).data() : nullptr,
                     weights ? weights->values.row(e).data() : nullptr, wdim, dim, h,
                     per_edge_src.row(e).data(),
                     weights ? grads.grad_weights->values.row(e).data() : dummy.data());
  }
  if (need_grad_in) {
    grads.grad_in = DenseMatrix(coo.n_vertices, dim);
    for (std::size_t e = 0; e < ne; ++e) {
      double* acc = grads.grad_in.row(coo.src[e]).data();
      const double* m = per_edge_src.row(e).data();
      for (std::size_t c = 0; c < dim; ++c) acc[c] += m[c];
    }
  }
  if (ctx.counters) {
    ctx.counters->intermediate_rows_materialized += 2 * ne;
    if (need_grad_in) ctx.counters->aggregation_macs += ne * dim;
  }
  return grads;
}

NeighborApplyGrads sddmm_backward_scatter(const Coo& coo, const EdgeWeights& grad_weights,
                                          const EmbeddingTable& embed, EdgeWeightFn g,
                                          const KernelContext& ctx) {
  check_inputs(coo, embed, nullptr, WeightApply::none, "sddmm_backward_scatter");
  const std::size_t dim = embed.cols();
  const std::size_t ne = coo.n_edges();
  DenseMatrix per_src(ne, dim), per_dst(ne, dim);
  for (std::size_t e = 0; e < ne; ++e) {
    weight_backward(grad_weights.values.row(e).data(), embed.row(coo.src[e]).data(),
                    embed.row(coo.dst[e]).data(), dim, g, per_src.row(e).data(),
                    per_dst.row(e).data());
  }
  NeighborApplyGrads grads{DenseMatrix(coo.n_vertices, dim), DenseMatrix(coo.n_vertices, dim)};
  for (std::size_t e = 0; e < ne; ++e) {
    double* as = grads.grad_src.row(coo.src[e]).data();
    double* ad = grads.grad_dst.row(coo.dst[e]).data();
    const double* ms = per_src.row(e).data();
    const double* md = per_dst.row(e).data();
    for (std::size_t c = 0; c < dim; ++c) {
      as[c] += ms[c];
      ad[c] += md[c];
    }
  }
  if (ctx.counters) ctx.counters->intermediate_rows_materialized += 2 * ne;
  return grads;
}

}  // namespace vcgnn
