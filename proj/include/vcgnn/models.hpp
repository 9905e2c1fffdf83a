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

// GNN models assembled from the NAPA primitives. Each layer is
//
//   w     = NeighborApply(graph, H, g)        (weighted models only)
//   A     = Pull(graph, H, w, f, h)
//   H'    = act(A W + b)
//
// Execution is driven by a dataflow graph so the placement rewrite can swap
// the Pull and the MatMul on eligible layers.
//
// All tensors of a batch live in the batch's vertex space (one row per
// sampled vertex). Layer l's dense transform runs on its destination rows
// (aggr-first) or on its source rows (comb-first); bias and activation run on
// every row.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcgnn/counters.hpp"
#include "vcgnn/dkp.hpp"
#include "vcgnn/napa.hpp"
#include "vcgnn/pipeline.hpp"
#include "vcgnn/tensor.hpp"

namespace vcgnn {

enum class Backend { napa, edgewise, scatter };
enum class ModelKind { gcn, ngcf, ngcf_scalar };

const char* to_string(Backend b);
const char* to_string(ModelKind m);
// Throw ConfigError on unknown names.
Backend parse_backend(const std::string& name);
ModelKind parse_model_kind(const std::string& name);

struct GnnLayer {
  KernelModes modes;
  MlpLayer mlp;
};

struct GnnModel {
  std::vector<GnnLayer> layers;

  std::size_t n_layers() const { return layers.size(); }
  std::size_t in_dim() const { return layers.front().mlp.in_dim(); }
  std::size_t out_dim() const { return layers.back().mlp.out_dim(); }
  // Throws ShapeMismatchError when consecutive widths disagree and
  // InvalidArgumentError for bad modes or an empty model.
  void validate() const;
  bool operator==(const GnnModel& o) const;
};

// Hidden layers use relu, the last one identity. widths = {in, hidden...,
// classes}; Layer l has seed-derived init.
GnnModel make_model(ModelKind kind, std::span<const std::size_t> widths, std::uint64_t seed);
// in -> hidden -> ... -> classes with n_layers layers.
GnnModel make_model(ModelKind kind, std::size_t in_dim, std::size_t hidden, std::size_t classes,
                    std::size_t n_layers, std::uint64_t seed);
KernelModes modes_for(ModelKind kind);

// Input, [NeighborApply], Pull, MatMul, BiasAdd, Activation per layer.
Dfg build_model_dfg(const GnnModel& model);

struct ExecOptions {
  Backend backend = Backend::napa;
  DkpPolicy policy = DkpPolicy::on;
  DkpCoefficients coeffs = DkpCoefficients::gpu_defaults();
  int threads = 1;
  KernelCounters* counters = nullptr;
};

struct LayerCache {
  DenseMatrix input;                 // H entering the layer
  std::optional<EdgeWeights> weights;
  DenseMatrix aggregated;            // aggr-first: Pull output
  DenseMatrix transformed;           // comb-first: H W on source rows
  DenseMatrix pre_activation;
  Order order = Order::aggr_first;
  bool eligible = false;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  const void* batch_identity = nullptr;  // the batch the cache belongs to
  bool valid = false;
};

struct ForwardResult {
  DenseMatrix logits;  // batch_size x classes, rows in batch order
  ForwardCache cache;
  std::vector<Order> orders;  // chosen order per layer
};

// Throws ShapeMismatchError when the batch width differs from the model's
// input width or the layer counts differ.
ForwardResult model_forward(const GnnModel& model, const PreparedBatch& batch,
                            const ExecOptions& options = {});

struct ModelGrads {
  std::vector<DenseMatrix> weight;
  std::vector<std::vector<double>> bias;
  std::vector<Order> orders;  // chosen order per layer
};

// dlogits has one row per batch vertex. Throws ConsistencyError for an
// invalid cache or one produced for a different batch.
ModelGrads model_backward(const GnnModel& model, const ForwardCache& cache,
                          const DenseMatrix& dlogits, const PreparedBatch& batch,
                          const ExecOptions& options = {});

// W <- W - lr * grad, b <- b - lr * grad.
void sgd_update(GnnModel& model, const ModelGrads& grads, double lr);

// Builds a PreparedBatch directly from layers and a table, for callers that
// have their own subgraphs. Layer structures must span embeddings.rows()
// vertices.
PreparedBatch assemble_batch(std::vector<BatchLayer> layers, const EmbeddingTable& embeddings,
                             std::size_t batch_size);

}  // namespace vcgnn
