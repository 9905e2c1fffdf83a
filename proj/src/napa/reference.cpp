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

#include <string>

#include "vcgnn/errors.hpp"
#include "vcgnn/napa.hpp"

namespace vcgnn::reference {
namespace {

double coefficient(Aggregation f, std::size_t degree) {
  return f == Aggregation::mean && degree > 0 ? 1.0 / static_cast<double>(degree) : 1.0;
}

double weight_at(const EdgeWeights& w, EdgeIndex e, std::size_t c) {
  return w.dim() == 1 ? w.values(e, 0) : w.values(e, c);
}

}  // namespace

EdgeWeights neighbor_apply(const Csr& csr, const EmbeddingTable& embed, EdgeWeightFn g) {
  if (embed.rows() != csr.n_vertices()) throw ShapeMismatchError("reference::neighbor_apply");
  const std::size_t dim = embed.cols();
  EdgeWeights out{DenseMatrix(csr.n_edges(), g == EdgeWeightFn::dot_product ? 1 : dim)};
  for (VertexId d = 0; d < csr.n_vertices(); ++d) {
    for (EdgeIndex e = csr.src_ptr()[d]; e < csr.src_ptr()[d + 1]; ++e) {
      const VertexId s = csr.src_ids()[e];
      for (std::size_t c = 0; c < dim; ++c) {
        const double a = embed(s, c);
        const double b = embed(d, c);
        switch (g) {
          case EdgeWeightFn::element_wise_product: out.values(e, c) = a * b; break;
          case EdgeWeightFn::add: out.values(e, c) = a + b; break;
          case EdgeWeightFn::dot_product: out.values(e, 0) += a * b; break;
          case EdgeWeightFn::none: throw InvalidArgumentError("reference: g=none");
        }
      }
    }
  }
  return out;
}

DenseMatrix pull(const Csr& csr, const EmbeddingTable& embed, const EdgeWeights* weights,
                 Aggregation f, WeightApply h) {
  if (embed.rows() != csr.n_vertices()) throw ShapeMismatchError("reference::pull");
  const std::size_t dim = embed.cols();
  DenseMatrix out(csr.n_vertices(), dim);
  for (VertexId d = 0; d < csr.n_vertices(); ++d) {
    const double k = coefficient(f, csr.degree(d));
    for (EdgeIndex e = csr.src_ptr()[d]; e < csr.src_ptr()[d + 1]; ++e) {
      const VertexId s = csr.src_ids()[e];
      for (std::size_t c = 0; c < dim; ++c) {
        double m = embed(s, c);
        if (h == WeightApply::sum) m += weights->values(e, c);
        if (h == WeightApply::scale) m *= weight_at(*weights, e, c);
        out(d, c) += m;
      }
    }
    for (std::size_t c = 0; c < dim; ++c) out(d, c) *= k;
  }
  return out;
}

PullGrads pull_backward(const Csr& csr, const DenseMatrix& grad_out,
                        const EdgeWeights* weights, const EmbeddingTable* embed,
                        Aggregation f, WeightApply h) {
  const std::size_t dim = grad_out.cols();
  PullGrads grads;
  grads.grad_in = DenseMatrix(csr.n_vertices(), dim);
  if (weights) grads.grad_weights = EdgeWeights{DenseMatrix(csr.n_edges(), weights->dim())};
  for (VertexId d = 0; d < csr.n_vertices(); ++d) {
    const double k = coefficient(f, csr.degree(d));
    for (EdgeIndex e = csr.src_ptr()[d]; e < csr.src_ptr()[d + 1]; ++e) {
      const VertexId s = csr.src_ids()[e];
      for (std::size_t c = 0; c < dim; ++c) {
        const double g = k * grad_out(d, c);
        switch (h) {
          case WeightApply::none:
            grads.grad_in(s, c) += g;
            break;
          case WeightApply::sum:
            grads.grad_in(s, c) += g;
            grads.grad_weights->values(e, c) = g;
            break;
          case WeightApply::scale:
            grads.grad_in(s, c) += weight_at(*weights, e, c) * g;
            if (weights->dim() == 1) {
              grads.grad_weights->values(e, 0) += g * (*embed)(s, c);
            } else {
              grads.grad_weights->values(e, c) = g * (*embed)(s, c);
            }
            break;
        }
      }
    }
  }
  return grads;
}

NeighborApplyGrads neighbor_apply_backward(const Csr& csr, const EdgeWeights& grad_weights,
                                           const EmbeddingTable& embed, EdgeWeightFn g) {
  const std::size_t dim = embed.cols();
  NeighborApplyGrads grads{DenseMatrix(csr.n_vertices(), dim),
                           DenseMatrix(csr.n_vertices(), dim)};
  for (VertexId d = 0; d < csr.n_vertices(); ++d) {
    for (EdgeIndex e = csr.src_ptr()[d]; e < csr.src_ptr()[d + 1]; ++e) {
      const VertexId s = csr.src_ids()[e];
      for (std::size_t c = 0; c < dim; ++c) {
        const double gw = weight_at(grad_weights, e, c);
        switch (g) {
          case EdgeWeightFn::element_wise_product:
          case EdgeWeightFn::dot_product:
            grads.grad_src(s, c) += gw * embed(d, c);
            grads.grad_dst(d, c) += gw * embed(s, c);
            break;
          case EdgeWeightFn::add:
            grads.grad_src(s, c) += gw;
            grads.grad_dst(d, c) += gw;
            break;
          case EdgeWeightFn::none:
            break;
        }
      }
    }
  }
  return grads;
}

}  // namespace vcgnn::reference
