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

// Destination-centric, feature-wise graph kernels.
//
//   neighbor_apply  edge weighting (SDDMM-like): w(s,d) = g(x_s, x_d)
//   pull            aggregation (SpMM-like):     out[d] = f_{s in N(d)} h(x_s, w(s,d))
//   apply           combination:                 sigma(X W + b)
//
// Work is split into (destination, feature-range) tiles. A tile owns a
// contiguous slice of one output row, so there is no write sharing and no
// atomics; every output element is accumulated over the destination's edges
// in Csr order, which makes the result independent of the partition count.
// Edge-indexed tensors (EdgeWeights) are laid out in Csr edge order.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vcgnn/counters.hpp"
#include "vcgnn/graph_store.hpp"
#include "vcgnn/tensor.hpp"

namespace vcgnn {

enum class Aggregation { mean, sum };
enum class EdgeWeightFn { none, element_wise_product, add, dot_product };
// How a weight is applied to the source embedding during Pull:
//   sum:   x_s + w        (vector weights)
//   scale: w * x_s        (scalar weights broadcast, vector weights element-wise)
enum class WeightApply { none, sum, scale };

struct KernelModes {
  Aggregation f = Aggregation::mean;
  EdgeWeightFn g = EdgeWeightFn::none;
  WeightApply h = WeightApply::none;

  // Throws InvalidArgumentError unless (g == none) == (h == none).
  void validate() const;
  bool weighted() const { return g != EdgeWeightFn::none; }
  // Width of the weight g produces for embeddings of width `feat`.
  std::size_t weight_dim(std::size_t feat) const;
  // True when the aggregation operator is linear in the source embeddings
  // with coefficients independent of them, i.e. P(XW) == (PX)W. Holds for
  // unweighted pulls and for scalar weights applied by scaling.
  bool commutes_with_dense_transform() const;
  bool operator==(const KernelModes&) const = default;
};

struct EdgeWeights {
  DenseMatrix values;  // n_edges x dim, Csr edge order
  std::size_t n_edges() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
};

struct KernelContext {
  // Worker partitions; also the OpenMP team size. Feature ranges are
  // ceil(dim / partitions) wide.
  int partitions = 1;
  KernelCounters* counters = nullptr;
};

EdgeWeights neighbor_apply(const Csr& csr, const EmbeddingTable& embed,
                           EdgeWeightFn g, const KernelContext& ctx = {});

// Rows of the result correspond to Csr destinations; destinations without
// in-edges give a zero row for both sum and mean.
DenseMatrix pull(const Csr& csr, const EmbeddingTable& embed,
                 const EdgeWeights* weights, Aggregation f, WeightApply h,
                 const KernelContext& ctx = {});

// sigma(aggr * W + b) over all rows.
DenseMatrix apply(const DenseMatrix& aggr, const MlpLayer& layer,
                  const KernelContext& ctx = {});

struct ApplyCache {
  DenseMatrix input;
  DenseMatrix pre_activation;
  bool valid = false;
};

struct ApplyResult {
  DenseMatrix output;
  ApplyCache cache;
};

// apply() restricted to `rows` for the matrix product (other rows of the
// product are zero before bias and activation). Empty `rows` with
// all_rows=true means every row.
ApplyResult apply_forward(const DenseMatrix& aggr, const MlpLayer& layer,
                          std::span<const RowIndex> rows, bool all_rows,
                          const KernelContext& ctx = {});

struct ApplyGrads {
  DenseMatrix grad_in;  // empty when not requested
  DenseMatrix grad_weight;
  std::vector<double> grad_bias;
};

// Throws ConsistencyError when the cache is missing.
ApplyGrads apply_backward(const DenseMatrix& grad_out, const ApplyCache& cache,
                          const MlpLayer& layer, std::span<const RowIndex> rows,
                          bool all_rows, bool need_grad_in,
                          const KernelContext& ctx = {});

struct PullGrads {
  DenseMatrix grad_in;                     // wrt source embeddings
  std::optional<EdgeWeights> grad_weights;  // present when weights were given
};

// Backward of pull. grad_in is produced by a source-centric traversal of the
// Csc; grad_weights by a destination-centric traversal of the Csr. `embed`
// is required only for WeightApply::scale.
// Throws ConsistencyError when csr and csc do not encode the same edges.
PullGrads pull_backward(const Csr& csr, const Csc& csc, const DenseMatrix& grad_out,
                        const EdgeWeights* weights, const EmbeddingTable* embed,
                        Aggregation f, WeightApply h, bool need_grad_in = true,
                        const KernelContext& ctx = {});

struct NeighborApplyGrads {
  DenseMatrix grad_src;
  DenseMatrix grad_dst;
};

NeighborApplyGrads neighbor_apply_backward(const Csr& csr, const Csc& csc,
                                           const EdgeWeights& grad_weights,
                                           const EmbeddingTable& embed, EdgeWeightFn g,
                                           const KernelContext& ctx = {});

// For each Csc position, the index of the same edge in Csr order. Both
// structures must be canonical (ascending buckets) translations of one edge
// multiset; the k-th copy of a duplicate edge maps to the k-th copy.
std::vector<EdgeIndex> csc_to_csr_edge_map(const Csr& csr, const Csc& csc);

// ---------------------------------------------------------------------------
// Baselines. Same results as the primitives above, different execution
// strategy. Edge-wise kernels assign one work item per edge and accumulate
// into destination rows with atomics; scatter kernels gather a per-edge dense
// tensor first and then reduce it by index. Coo edges must be in Csr order
// (as produced by csr_to_coo) so that EdgeWeights line up.

EdgeWeights sddmm_edgewise(const Coo& coo, const EmbeddingTable& embed, EdgeWeightFn g,
                           const KernelContext& ctx = {});
DenseMatrix spmm_edgewise(const Coo& coo, const EmbeddingTable& embed,
                          const EdgeWeights* weights, Aggregation f, WeightApply h,
                          const KernelContext& ctx = {});
PullGrads spmm_backward_edgewise(const Coo& coo, const DenseMatrix& grad_out,
                                 const EdgeWeights* weights, const EmbeddingTable* embed,
                                 Aggregation f, WeightApply h, bool need_grad_in = true,
                                 const KernelContext& ctx = {});
NeighborApplyGrads sddmm_backward_edgewise(const Coo& coo, const EdgeWeights& grad_weights,
                                           const EmbeddingTable& embed, EdgeWeightFn g,
                                           const KernelContext& ctx = {});

EdgeWeights sddmm_scatter(const Coo& coo, const EmbeddingTable& embed, EdgeWeightFn g,
                          const KernelContext& ctx = {});
DenseMatrix spmm_scatter(const Coo& coo, const EmbeddingTable& embed,
                         const EdgeWeights* weights, Aggregation f, WeightApply h,
                         const KernelContext& ctx = {});
PullGrads spmm_backward_scatter(const Coo& coo, const DenseMatrix& grad_out,
                                const EdgeWeights* weights, const EmbeddingTable* embed,
                                Aggregation f, WeightApply h, bool need_grad_in = true,
                                const KernelContext& ctx = {});
NeighborApplyGrads sddmm_backward_scatter(const Coo& coo, const EdgeWeights& grad_weights,
                                          const EmbeddingTable& embed, EdgeWeightFn g,
                                          const KernelContext& ctx = {});

// Serial single-loop implementations kept as the reference for the parallel
// kernels and as the baseline in kernel_bench.
namespace reference {

EdgeWeights neighbor_apply(const Csr& csr, const EmbeddingTable& embed, EdgeWeightFn g);
DenseMatrix pull(const Csr& csr, const EmbeddingTable& embed, const EdgeWeights* weights,
                 Aggregation f, WeightApply h);
PullGrads pull_backward(const Csr& csr, const DenseMatrix& grad_out,
                        const EdgeWeights* weights, const EmbeddingTable* embed,
                        Aggregation f, WeightApply h);
NeighborApplyGrads neighbor_apply_backward(const Csr& csr, const EdgeWeights& grad_weights,
                                           const EmbeddingTable& embed, EdgeWeightFn g);

}  // namespace reference

}  // namespace vcgnn
