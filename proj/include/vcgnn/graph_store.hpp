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

// Immutable adjacency structures in coordinate (Coo) and compressed (Csr,
// Csc) form. Convention: the Csr pointer array is indexed by destination and
// lists the sources of each destination; the Csc pointer array is indexed by
// source and lists destinations. Translations sort each bucket ascending so
// every structure built from the same edge multiset is byte-identical.

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace vcgnn {

using VertexId = std::uint32_t;
using EdgeIndex = std::uint64_t;

// Coordinate list. src[i] -> dst[i] is edge i. Duplicates are kept.
struct Coo {
  std::vector<VertexId> src;
  std::vector<VertexId> dst;
  std::size_t n_vertices = 0;

  std::size_t n_edges() const { return src.size(); }
  // Throws MalformedGraphError on length mismatch or out-of-range ids.
  void validate() const;
};

// Shared storage for the two compressed layouts.
class CompressedAdjacency {
 public:
  CompressedAdjacency() : ptr_{0} {}
  // Validates and takes ownership; throws MalformedGraphError.
  CompressedAdjacency(std::vector<EdgeIndex> ptr, std::vector<VertexId> ids);

  std::size_t n_vertices() const { return ptr_.size() - 1; }
  std::size_t n_edges() const { return ids_.size(); }
  std::span<const EdgeIndex> ptr() const { return ptr_; }
  std::span<const VertexId> ids() const { return ids_; }
  std::span<const VertexId> bucket(VertexId v) const {
    return std::span<const VertexId>(ids_).subspan(ptr_[v], ptr_[v + 1] - ptr_[v]);
  }
  std::size_t degree(VertexId v) const { return ptr_[v + 1] - ptr_[v]; }
  std::size_t max_degree() const;

  bool operator==(const CompressedAdjacency&) const = default;

 protected:
  std::vector<EdgeIndex> ptr_;
  std::vector<VertexId> ids_;
};

// Sources grouped per destination.
class Csr : public CompressedAdjacency {
 public:
  using CompressedAdjacency::CompressedAdjacency;
  explicit Csr(CompressedAdjacency&& adj) : CompressedAdjacency(std::move(adj)) {}
  std::span<const EdgeIndex> src_ptr() const { return ptr(); }
  std::span<const VertexId> src_ids() const { return ids(); }
  // In-neighbors of destination d.
  std::span<const VertexId> sources(VertexId d) const { return bucket(d); }
  // Same edges over a larger vertex space; new vertices have no in-edges.
  Csr resized(std::size_t n_vertices) const;
  bool operator==(const Csr&) const = default;
};

// Destinations grouped per source.
class Csc : public CompressedAdjacency {
 public:
  using CompressedAdjacency::CompressedAdjacency;
  explicit Csc(CompressedAdjacency&& adj) : CompressedAdjacency(std::move(adj)) {}
  std::span<const EdgeIndex> dst_ptr() const { return ptr(); }
  std::span<const VertexId> dst_ids() const { return ids(); }
  std::span<const VertexId> destinations(VertexId s) const { return bucket(s); }
  Csc resized(std::size_t n_vertices) const;
  bool operator==(const Csc&) const = default;
};

// Construction from a coordinate list. Not counted as runtime translations:
// this is how compressed structures are built in the first place.
// Bucket sorting runs on `threads` OpenMP threads (<= 0: OpenMP default).
Csr coo_to_csr(const Coo& coo, int threads = 0);
Csc coo_to_csc(const Coo& coo, int threads = 0);

// Runtime format translations. Each call increments the process-wide
// translation counter. Edges come out in bucket order of the input.
Coo csr_to_coo(const Csr& csr);
Coo csc_to_coo(const Csc& csc);
Csc csr_to_csc(const Csr& csr);
Csr csc_to_csr(const Csc& csc);

std::uint64_t translation_count();
void reset_translation_count();

struct DegreeStats {
  double mean = 0.0;
  double stdev = 0.0;  // population standard deviation of per-dst degrees
  // (degree, fraction of destinations with degree <= it), ascending degree.
  std::vector<std::pair<std::size_t, double>> cdf;
};

// In-degree statistics over destinations. Throws EmptyGraphError when the
// graph has no vertices.
DegreeStats degree_stats(const Csr& csr);

}  // namespace vcgnn
