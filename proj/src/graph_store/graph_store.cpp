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

#include "vcgnn/graph_store.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "vcgnn/errors.hpp"

namespace vcgnn {
namespace {

std::atomic<std::uint64_t> g_translations{0};

// Counting sort of edges into buckets keyed by `key`, each bucket then sorted
// ascending by `value`.
CompressedAdjacency bucketize(std::span<const VertexId> key,
                              std::span<const VertexId> value,
                              std::size_t n_vertices, int threads) {
  std::vector<EdgeIndex> ptr(n_vertices + 1, 0);
  for (VertexId k : key) ++ptr[k + 1];
  for (std::size_t v = 0; v < n_vertices; ++v) ptr[v + 1] += ptr[v];

  std::vector<VertexId> ids(key.size());
  std::vector<EdgeIndex> cursor(ptr.begin(), ptr.end() - 1);
  for (std::size_t e = 0; e < key.size(); ++e) ids[cursor[key[e]]++] = value[e];

  const auto n = static_cast<std::int64_t>(n_vertices);
#pragma omp parallel for schedule(dynamic, 256) \
    num_threads(threads > 0 ? threads : omp_get_max_threads())
  for (std::int64_t v = 0; v < n; ++v) {
    std::sort(ids.begin() + static_cast<std::ptrdiff_t>(ptr[v]),
              ids.begin() + static_cast<std::ptrdiff_t>(ptr[v + 1]));
  }
  return CompressedAdjacency(std::move(ptr), std::move(ids));
}

Coo expand(const CompressedAdjacency& adj, bool bucket_is_dst) {
  Coo coo;
  coo.n_vertices = adj.n_vertices();
  coo.src.resize(adj.n_edges());
  coo.dst.resize(adj.n_edges());
  auto ptr = adj.ptr();
  auto ids = adj.ids();
  for (std::size_t v = 0; v < adj.n_vertices(); ++v) {
    for (EdgeIndex e = ptr[v]; e < ptr[v + 1]; ++e) {
      if (bucket_is_dst) {
        coo.dst[e] = static_cast<VertexId>(v);
        coo.src[e] = ids[e];
      } else {
        coo.src[e] = static_cast<VertexId>(v);
        coo.dst[e] = ids[e];
      }
    }
  }
  return coo;
}

std::vector<EdgeIndex> extend_ptr(std::span<const EdgeIndex> ptr, std::size_t n) {
  if (n + 1 < ptr.size()) {
    throw InvalidArgumentError("cannot shrink a compressed adjacency from " +
                               std::to_string(ptr.size() - 1) + " to " +
                               std::to_string(n) + " vertices");
  }
  std::vector<EdgeIndex> out(ptr.begin(), ptr.end());
  out.resize(n + 1, ptr.back());
  return out;
}

}  // namespace

void Coo::validate() const {
  if (src.size() != dst.size()) {
    throw MalformedGraphError("coo src/dst length mismatch: " +
                              std::to_string(src.size()) + " vs " +
                              std::to_string(dst.size()));
  }
  for (std::size_t e = 0; e < src.size(); ++e) {
    if (src[e] >= n_vertices || dst[e] >= n_vertices) {
      throw MalformedGraphError("edge " + std::to_string(e) + " (" +
                                std::to_string(src[e]) + "->" +
                                std::to_string(dst[e]) + ") out of range for " +
                                std::to_string(n_vertices) + " vertices");
    }
  }
}

CompressedAdjacency::CompressedAdjacency(std::vector<EdgeIndex> ptr,
                                         std::vector<VertexId> ids)
    : ptr_(std::move(ptr)), ids_(std::move(ids)) {
  if (ptr_.empty() || ptr_.front() != 0 || ptr_.back() != ids_.size()) {
    throw MalformedGraphError("pointer array must start at 0 and end at n_edges");
  }
  for (std::size_t i = 1; i < ptr_.size(); ++i) {
    if (ptr_[i] < ptr_[i - 1]) {
      throw MalformedGraphError("pointer array decreases at " + std::to_string(i));
    }
  }
  const std::size_t n = ptr_.size() - 1;
  for (VertexId id : ids_) {
    if (id >= n) {
      throw MalformedGraphError("vertex id " + std::to_string(id) +
                                " out of range for " + std::to_string(n) +
                                " vertices");
    }
  }
}

std::size_t CompressedAdjacency::max_degree() const {
  std::size_t best = 0;
  for (std::size_t v = 0; v + 1 < ptr_.size(); ++v) {
    best = std::max<std::size_t>(best, ptr_[v + 1] - ptr_[v]);
  }
  return best;
}

Csr Csr::resized(std::size_t n) const {
  return Csr(extend_ptr(ptr(), n), std::vector<VertexId>(ids().begin(), ids().end()));
}

Csc Csc::resized(std::size_t n) const {
  return Csc(extend_ptr(ptr(), n), std::vector<VertexId>(ids().begin(), ids().end()));
}

Csr coo_to_csr(const Coo& coo, int threads) {
  coo.validate();
  return Csr(bucketize(coo.dst, coo.src, coo.n_vertices, threads));
}

Csc coo_to_csc(const Coo& coo, int threads) {
  coo.validate();
  return Csc(bucketize(coo.src, coo.dst, coo.n_vertices, threads));
}

Coo csr_to_coo(const Csr& csr) {
  g_translations.fetch_add(1, std::memory_order_relaxed);
  return expand(csr, /*bucket_is_dst=*/true);
}

Coo csc_to_coo(const Csc& csc) {
  g_translations.fetch_add(1, std::memory_order_relaxed);
  return expand(csc, /*bucket_is_dst=*/false);
}

Csc csr_to_csc(const Csr& csr) {
  g_translations.fetch_add(1, std::memory_order_relaxed);
  return coo_to_csc(expand(csr, true), 0);
}

Csr csc_to_csr(const Csc& csc) {
  g_translations.fetch_add(1, std::memory_order_relaxed);
  return coo_to_csr(expand(csc, false), 0);
}

std::uint64_t translation_count() {
  return g_translations.load(std::memory_order_relaxed);
}

void reset_translation_count() { g_translations.store(0, std::memory_order_relaxed); }

DegreeStats degree_stats(const Csr& csr) {
  const std::size_t n = csr.n_vertices();
  if (n == 0) throw EmptyGraphError("degree_stats on a graph with no vertices");

  DegreeStats stats;
  stats.mean = static_cast<double>(csr.n_edges()) / static_cast<double>(n);
  std::map<std::size_t, std::size_t> histogram;
  double sq = 0.0;
  for (VertexId d = 0; d < n; ++d) {
    const std::size_t deg = csr.degree(d);
    ++histogram[deg];
    const double diff = static_cast<double>(deg) - stats.mean;
    sq += diff * diff;
  }
  stats.stdev = std::sqrt(sq / static_cast<double>(n));

  std::size_t running = 0;
  for (const auto& [deg, count] : histogram) {
    running += count;
    stats.cdf.emplace_back(deg, running == n ? 1.0
                                             : static_cast<double>(running) /
                                                   static_cast<double>(n));
  }
  return stats;
}

}  // namespace vcgnn
