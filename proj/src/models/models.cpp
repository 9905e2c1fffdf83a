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

#include "vcgnn/models.hpp"

#include <algorithm>
#include <string>

#include "vcgnn/errors.hpp"
#include "vcgnn/rng.hpp"

namespace vcgnn {

const char* to_string(Backend b) {
  switch (b) {
    case Backend::napa: return "napa";
    case Backend::edgewise: return "edgewise";
    case Backend::scatter: return "scatter";
  }
  return "?";
}

const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::gcn: return "gcn";
    case ModelKind::ngcf: return "ngcf";
    case ModelKind::ngcf_scalar: return "ngcf-scalar";
  }
  return "?";
}

Backend parse_backend(const std::string& name) {
  if (name == "napa") return Backend::napa;
  if (name == "edgewise") return Backend::edgewise;
  if (name == "scatter") return Backend::scatter;
  throw ConfigError("unknown backend '" + name + "' (expected napa, edgewise, scatter)");
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "gcn") return ModelKind::gcn;
  if (name == "ngcf") return ModelKind::ngcf;
  if (name == "ngcf-scalar" || name == "ngcf_scalar") return ModelKind::ngcf_scalar;
  throw ConfigError("unknown model '" + name + "' (expected gcn, ngcf, ngcf-scalar)");
}

void GnnModel::validate() const {
  if (layers.empty()) throw InvalidArgumentError("model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].modes.validate();
    layers[i].mlp.validate();
    if (i > 0 && layers[i].mlp.in_dim() != layers[i - 1].mlp.out_dim()) {
      throw ShapeMismatchError("layer " + std::to_string(i + 1) + " takes width " +
                               std::to_string(layers[i].mlp.in_dim()) + ", previous layer gives " +
                               std::to_string(layers[i - 1].mlp.out_dim()));
    }
  }
}

bool GnnModel::operator==(const GnnModel& o) const {
  if (layers.size() != o.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = o.layers[i];
    if (!(a.modes == b.modes) || !(a.mlp.weight == b.mlp.weight) || a.mlp.bias != b.mlp.bias ||
        a.mlp.activation != b.mlp.activation) {
      return false;
    }
  }
  return true;
}

KernelModes modes_for(ModelKind kind) {
  switch (kind) {
    case ModelKind::gcn: return {Aggregation::mean, EdgeWeightFn::none, WeightApply::none};
    case ModelKind::ngcf:
      return {Aggregation::mean, EdgeWeightFn::element_wise_product, WeightApply::sum};
    case ModelKind::ngcf_scalar:
      return {Aggregation::mean, EdgeWeightFn::dot_product, WeightApply::scale};
  }
  return {};
}

GnnModel make_model(ModelKind kind, std::span<const std::size_t> widths, std::uint64_t seed) {
  if (widths.size() < 2) throw InvalidArgumentError("model needs at least input and output widths");
  GnnModel m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    m.layers.push_back({modes_for(kind),
                        MlpLayer::init(widths[i], widths[i + 1],
                                       last ? Activation::identity : Activation::relu,
                                       mix64(seed + 0x51ed27 * (i + 1)))});
  }
  m.validate();
  return m;
}

GnnModel make_model(ModelKind kind, std::size_t in_dim, std::size_t hidden, std::size_t classes,
                    std::size_t n_layers, std::uint64_t seed) {
  if (n_layers == 0) throw InvalidArgumentError("model needs at least one layer");
  std::vector<std::size_t> widths{in_dim};
  for (std::size_t i = 1; i < n_layers; ++i) widths.push_back(hidden);
  widths.push_back(classes);
  return make_model(kind, widths, seed);
}

Dfg build_model_dfg(const GnnModel& model) {
  Dfg dfg;
  std::size_t prev = dfg.add(DfgNode{DfgKind::input, 0, {}, {}, {}});
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    const KernelModes& modes = model.layers[l].modes;
    std::vector<std::size_t> pull_in{prev};
    if (modes.weighted()) {
      pull_in.push_back(dfg.add(DfgNode{DfgKind::neighbor_apply, l, {prev}, modes, {}}));
    }
    std::size_t pull_id = dfg.add(DfgNode{DfgKind::pull, l, pull_in, modes, {}});
    std::size_t mm = dfg.add(DfgNode{DfgKind::matmul, l, {pull_id}, {}, {}});
    std::size_t bias = dfg.add(DfgNode{DfgKind::bias_add, l, {mm}, {}, {}});
    prev = dfg.add(DfgNode{DfgKind::activation, l, {bias}, {}, {}});
  }
  return dfg;
}

// ---------------------------------------------------------------------------

namespace {

// Kernel selection per backend. Baselines work on a Coo translated once per
// layer and direction.
class LayerKernels {
 public:
  LayerKernels(const BatchLayer& layer, const ExecOptions& opt)
      : layer_(layer), opt_(opt), ctx_{opt.threads, opt.counters} {
    if (opt.backend != Backend::napa) coo_ = csr_to_coo(layer.csr);
  }

  EdgeWeights neighbor_apply(const DenseMatrix& h, EdgeWeightFn g) const {
    switch (opt_.backend) {
      case Backend::napa: return vcgnn::neighbor_apply(layer_.csr, h, g, ctx_);
      case Backend::edgewise: return sddmm_edgewise(coo_, h, g, ctx_);
      case Backend::scatter: return sddmm_scatter(coo_, h, g, ctx_);
    }
    return {};
  }

  DenseMatrix pull(const DenseMatrix& x, const EdgeWeights* w, const KernelModes& m) const {
    switch (opt_.backend) {
      case Backend::napa: return vcgnn::pull(layer_.csr, x, w, m.f, m.h, ctx_);
      case Backend::edgewise: return spmm_edgewise(coo_, x, w, m.f, m.h, ctx_);
      case Backend::scatter: return spmm_scatter(coo_, x, w, m.f, m.h, ctx_);
    }
    return {};
  }

  PullGrads pull_backward(const DenseMatrix& g, const EdgeWeights* w, const DenseMatrix* x,
                          const KernelModes& m) const {
    switch (opt_.backend) {
      case Backend::napa:
        return vcgnn::pull_backward(layer_.csr, layer_.csc, g, w, x, m.f, m.h, true, ctx_);
      case Backend::edgewise: return spmm_backward_edgewise(coo_, g, w, x, m.f, m.h, true, ctx_);
      case Backend::scatter: return spmm_backward_scatter(coo_, g, w, x, m.f, m.h, true, ctx_);
    }
    return {};
  }

  NeighborApplyGrads neighbor_apply_backward(const EdgeWeights& gw, const DenseMatrix& h,
                                             EdgeWeightFn g) const {
    switch (opt_.backend) {
      case Backend::napa:
        return vcgnn::neighbor_apply_backward(layer_.csr, layer_.csc, gw, h, g, ctx_);
      case Backend::edgewise: return sddmm_backward_edgewise(coo_, gw, h, g, ctx_);
      case Backend::scatter: return sddmm_backward_scatter(coo_, gw, h, g, ctx_);
    }
    return {};
  }

 private:
  const BatchLayer& layer_;
  const ExecOptions& opt_;
  KernelContext ctx_;
  Coo coo_;
};

void check_batch(const GnnModel& model, const PreparedBatch& batch) {
  model.validate();
  if (batch.n_layers() != model.n_layers()) {
    throw ShapeMismatchError("batch has " + std::to_string(batch.n_layers()) +
                             " layers, model has " + std::to_string(model.n_layers()));
  }
  const EmbeddingTable& x = batch.input_embeddings();
  if (x.cols() != model.in_dim()) {
    throw ShapeMismatchError("embeddings have width " + std::to_string(x.cols()) +
                             ", model expects " + std::to_string(model.in_dim()));
  }
  for (const auto& l : batch.layers) {
    if (l.csr.n_vertices() != x.rows() || l.csc.n_vertices() != x.rows()) {
      throw ShapeMismatchError("batch layer does not span the batch vertex space");
    }
  }
}

std::vector<std::uint8_t> eligible_layers(const GnnModel& model, DkpPolicy policy) {
  std::vector<std::uint8_t> out(model.n_layers(), 0);
  if (policy == DkpPolicy::off) return out;
  Dfg rewritten = rewrite_dfg(build_model_dfg(model));
  for (const auto& n : rewritten.nodes()) {
    if (n.kind == DfgKind::cost_dkp) out[n.layer] = 1;
  }
  return out;
}

}  // namespace

ForwardResult model_forward(const GnnModel& model, const PreparedBatch& batch,
                            const ExecOptions& opt) {
  check_batch(model, batch);
  Dfg dfg = build_model_dfg(model);
  if (opt.policy != DkpPolicy::off) dfg = rewrite_dfg(dfg);

  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.layers.resize(model.n_layers());
  result.orders.assign(model.n_layers(), Order::aggr_first);

  std::vector<DenseMatrix> value(dfg.size());
  std::vector<std::optional<LayerKernels>> kernels(model.n_layers());
  auto kernels_for = [&](std::size_t l) -> const LayerKernels& {
    if (!kernels[l]) kernels[l].emplace(batch.layers[l], opt);
    return *kernels[l];
  };

  for (std::size_t id : dfg.topological_order()) {
    const DfgNode& node = dfg.node(id);
    const std::size_t l = node.layer;
    LayerCache* lc = node.kind == DfgKind::input ? nullptr : &cache.layers[l];
    const GnnLayer* layer = node.kind == DfgKind::input ? nullptr : &model.layers[l];
    const BatchLayer* graph = node.kind == DfgKind::input ? nullptr : &batch.layers[l];
    auto input = [&]() -> const DenseMatrix& { return value[node.inputs.at(0)]; };

    switch (node.kind) {
      case DfgKind::input:
        value[id] = batch.input_embeddings();
        break;
      case DfgKind::neighbor_apply:
        lc->weights = kernels_for(l).neighbor_apply(input(), node.modes.g);
        break;
      case DfgKind::pull:
        lc->input = input();
        lc->order = Order::aggr_first;
        lc->aggregated = kernels_for(l).pull(input(), lc->weights ? &*lc->weights : nullptr,
                                             node.modes);
        break;
      case DfgKind::matmul:
        value[id] = matmul_rows(lc->aggregated, layer->mlp.weight, graph->dst_rows,
                                opt.counters, opt.threads);
        break;
      case DfgKind::cost_dkp: {
        lc->input = input();
        lc->eligible = true;
        const LayerDims dims = batch.dims(l + 1, layer->mlp.in_dim(), layer->mlp.out_dim());
        lc->order = choose_order(opt.policy, true, dims, opt.coeffs, Direction::fwp, l == 0);
        const EdgeWeights* w = lc->weights ? &*lc->weights : nullptr;
        if (lc->order == Order::aggr_first) {
          lc->aggregated = kernels_for(l).pull(lc->input, w, node.modes);
          value[id] = matmul_rows(lc->aggregated, layer->mlp.weight, graph->dst_rows,
                                  opt.counters, opt.threads);
        } else {
          lc->transformed = matmul_rows(lc->input, layer->mlp.weight, graph->src_rows,
                                        opt.counters, opt.threads);
          value[id] = kernels_for(l).pull(lc->transformed, w, node.modes);
        }
        break;
      }
      case DfgKind::bias_add:
        lc->pre_activation = bias_add(input(), layer->mlp.bias);
        break;
      case DfgKind::activation:
        value[id] = activate(lc->pre_activation, layer->mlp.activation);
        result.orders[l] = lc->order;
        break;
    }
    // Inputs consumed by exactly this node can be released early.
    for (std::size_t in : node.inputs) {
      if (dfg.consumers(in).size() == 1 && dfg.node(in).kind != DfgKind::input) {
        value[in] = DenseMatrix();
      }
    }
  }

  const std::size_t last = dfg.topological_order().back();
  const DenseMatrix& out = value[last];
  result.logits = DenseMatrix(batch.batch_size, out.cols());
  for (std::size_t r = 0; r < batch.batch_size; ++r) {
    std::copy(out.row(r).begin(), out.row(r).end(), result.logits.row(r).begin());
  }
  cache.batch_identity = &batch;
  cache.valid = true;
  return result;
}

ModelGrads model_backward(const GnnModel& model, const ForwardCache& cache,
                          const DenseMatrix& dlogits, const PreparedBatch& batch,
                          const ExecOptions& opt) {
  if (!cache.valid || cache.layers.size() != model.n_layers()) {
    throw ConsistencyError("backward called without a matching forward cache");
  }
  if (cache.batch_identity != &batch) {
    throw ConsistencyError("forward cache belongs to a different batch");
  }
  check_batch(model, batch);
  if (dlogits.rows() != batch.batch_size || dlogits.cols() != model.out_dim()) {
    throw ShapeMismatchError("dlogits must be batch_size x classes");
  }
  const auto eligible = eligible_layers(model, opt.policy);

  ModelGrads grads;
  const std::size_t L = model.n_layers();
  grads.weight.resize(L);
  grads.bias.resize(L);
  grads.orders.assign(L, Order::aggr_first);

  const std::size_t n = batch.n_vertices();
  DenseMatrix g(n, model.out_dim());
  for (std::size_t r = 0; r < dlogits.rows(); ++r) {
    std::copy(dlogits.row(r).begin(), dlogits.row(r).end(), g.row(r).begin());
  }

  for (std::size_t l = L; l-- > 0;) {
    const GnnLayer& layer = model.layers[l];
    const LayerCache& lc = cache.layers[l];
    const BatchLayer& graph = batch.layers[l];
    const KernelModes& m = layer.modes;
    const bool need_in = l > 0;
    LayerKernels k(graph, opt);
    const EdgeWeights* w = lc.weights ? &*lc.weights : nullptr;

    DenseMatrix gz = activation_backward(g, lc.pre_activation, layer.mlp.activation);
    grads.bias[l] = column_sums(gz);

    const LayerDims dims = batch.dims(l + 1, layer.mlp.in_dim(), layer.mlp.out_dim());
    const Order order =
        choose_order(opt.policy, eligible[l] != 0, dims, opt.coeffs, Direction::bwp, l == 0);
    grads.orders[l] = order;

    DenseMatrix grad_in;
    std::optional<EdgeWeights> grad_w;
    if (order == Order::aggr_first) {
      DenseMatrix recomputed;
      const DenseMatrix* a = &lc.aggregated;
      if (lc.order != Order::aggr_first) {
        recomputed = k.pull(lc.input, w, m);
        a = &recomputed;
      }
      grads.weight[l] = matmul_tn(*a, gz, graph.dst_rows, false, opt.counters, opt.threads);
      if (need_in) {
        DenseMatrix ga = matmul_nt(gz, layer.mlp.weight, graph.dst_rows, false, opt.counters,
                                   opt.threads);
        PullGrads pg = k.pull_backward(ga, w, &lc.input, m);
        grad_in = std::move(pg.grad_in);
        grad_w = std::move(pg.grad_weights);
      }
    } else {
      DenseMatrix recomputed;
      const DenseMatrix* y = &lc.transformed;
      if (lc.order != Order::comb_first) {
        recomputed = matmul_rows(lc.input, layer.mlp.weight, graph.src_rows, opt.counters,
                                 opt.threads);
        y = &recomputed;
      }
      PullGrads pg = k.pull_backward(gz, w, y, m);
      grads.weight[l] = matmul_tn(lc.input, pg.grad_in, graph.src_rows, false, opt.counters,
                                  opt.threads);
      if (need_in) {
        grad_in = matmul_nt(pg.grad_in, layer.mlp.weight, graph.src_rows, false, opt.counters,
                            opt.threads);
        grad_w = std::move(pg.grad_weights);
      }
    }
    if (need_in && grad_w) {
      NeighborApplyGrads na = k.neighbor_apply_backward(*grad_w, lc.input, m.g);
      add_inplace(grad_in, na.grad_src);
      add_inplace(grad_in, na.grad_dst);
    }
    if (need_in) g = std::move(grad_in);
  }
  return grads;
}

void sgd_update(GnnModel& model, const ModelGrads& grads, double lr) {
  if (grads.weight.size() != model.n_layers()) throw ShapeMismatchError("gradient layer count");
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    auto& mlp = model.layers[l].mlp;
    if (grads.weight[l].rows() != mlp.weight.rows() || grads.weight[l].cols() != mlp.weight.cols() ||
        grads.bias[l].size() != mlp.bias.size()) {
      throw ShapeMismatchError("gradient shape differs from layer " + std::to_string(l + 1));
    }
    auto wd = mlp.weight.data();
    auto gd = grads.weight[l].data();
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] -= lr * gd[i];
    for (std::size_t i = 0; i < mlp.bias.size(); ++i) mlp.bias[i] -= lr * grads.bias[l][i];
  }
}

PreparedBatch assemble_batch(std::vector<BatchLayer> layers, const EmbeddingTable& embeddings,
                             std::size_t batch_size) {
  PreparedBatch b;
  b.layers = std::move(layers);
  b.batch_size = batch_size;
  b.vertices.resize(embeddings.rows());
  for (std::size_t i = 0; i < b.vertices.size(); ++i) b.vertices[i] = static_cast<VertexId>(i);
  b.device = std::make_shared<DeviceArena>();
  b.device->allocate_embeddings(embeddings.rows(), embeddings.cols());
  b.device->copy_in(0, embeddings.data());
  if (batch_size > embeddings.rows()) throw InvalidArgumentError("batch larger than vertex space");
  return b;
}

}  // namespace vcgnn
