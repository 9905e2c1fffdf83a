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

// Per-batch preprocessing steps: neighbor sampling (S), reindexing (R),
// embedding lookup (K) and transfer (T). Each step is callable on its own;
// the pipeline module schedules them.
//
// Hop h of sampling expands the hop-h frontier and produces the subgraph of
// GNN layer L - h (the last layer is sampled first). New vertex ids are given
// to the batch first, in batch order, then to each hop's newly seen vertices
// in discovery order, so all vertices known after hop h occupy a prefix of
// the id space.

#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "vcgnn/graph_store.hpp"
#include "vcgnn/rng.hpp"
#include "vcgnn/tensor.hpp"

namespace vcgnn {

// Bijection between original vertex ids and dense subgraph ids 0..N-1.
class VidTable {
 public:
  // Returns the new id of `orig`, assigning the next free one when unseen.
  std::pair<VertexId, bool> insert(VertexId orig);
  bool contains(VertexId orig) const { return orig_to_new_.contains(orig); }
  // Throws ConsistencyError when `orig` was never inserted.
  VertexId to_new(VertexId orig) const;
  VertexId to_orig(VertexId new_id) const { return new_to_orig_.at(new_id); }
  std::size_t size() const { return new_to_orig_.size(); }
  std::span<const VertexId> new_to_orig() const { return new_to_orig_; }
  void reserve(std::size_t n);

 private:
  std::unordered_map<VertexId, VertexId> orig_to_new_;
  std::vector<VertexId> new_to_orig_;
};

struct SampledLayer {
  Coo edges;                      // original ids; src = sampled neighbor
  std::vector<VertexId> expanded;  // the frontier this hop expanded (dsts)
  std::vector<VertexId> frontier;  // distinct sampled neighbors, discovery order
};

// Chooses up to `fanout` positions of a neighbor list.
class SamplingPriority {
 public:
  virtual ~SamplingPriority() = default;
  virtual void select(std::span<const VertexId> neighbors, std::size_t fanout,
                      CounterRng& rng, std::vector<VertexId>& out) const = 0;
};

// Uniform sampling without replacement by partial Fisher-Yates. With
// fanout >= degree every neighbor is taken in stored order.
class UniqueRandomPriority final : public SamplingPriority {
 public:
  void select(std::span<const VertexId> neighbors, std::size_t fanout, CounterRng& rng,
              std::vector<VertexId>& out) const override;
};

const SamplingPriority& default_priority();

// Neighbor choices of one hop, before any VidTable update.
struct HopSelection {
  std::vector<VertexId> expanded;
  std::vector<EdgeIndex> offsets;  // expanded.size() + 1
  std::vector<VertexId> picked;
};

// Algorithm part of S: picks neighbors of every frontier vertex in parallel.
// The stream of vertex v in hop h is keyed by (seed, h, v), so the result
// does not depend on `threads`.
HopSelection select_hop(const Csr& full, std::span<const VertexId> frontier,
                        std::size_t fanout, std::uint64_t seed, std::size_t hop,
                        int threads = 1, const SamplingPriority& priority = default_priority());

// Builds the hop's edge list and next frontier from a selection.
SampledLayer assemble_layer(const HopSelection& selection, std::size_t n_vertices);

// Hash part of S: inserts the frontier's unseen vertices. Returns how many
// new ids were assigned.
std::size_t commit_layer(const SampledLayer& layer, VidTable& vids);

struct SampleResult {
  std::vector<SampledLayer> layers;  // hop order: layers[0] feeds the last GNN layer
  VidTable vids;
};

// fanouts[h] bounds the neighbors taken per vertex in hop h. Throws
// InvalidArgumentError for an empty or duplicated batch, an out-of-range
// batch vertex, no fanouts, or a zero fanout.
SampleResult sample_neighbors(const Csr& full, std::span<const VertexId> batch,
                              std::span<const std::size_t> fanouts, std::uint64_t seed,
                              int threads = 1,
                              const SamplingPriority& priority = default_priority());

struct ReindexedLayer {
  Csr csr;
  Csc csc;
  std::vector<RowIndex> dst_rows;  // expanded vertices, new ids, frontier order
  std::vector<RowIndex> src_rows;  // distinct sources, ascending new id
};

// Maps a sampled layer through the VidTable and builds both compressed
// layouts over `n_vertices` (0 means vids.size()). Throws ConsistencyError
// for a vertex missing from the table.
ReindexedLayer reindex(const SampledLayer& layer, const VidTable& vids,
                       std::size_t n_vertices = 0, int threads = 1);

// Same with an arbitrary original -> new mapping (e.g. a locked table).
ReindexedLayer reindex_with(const SampledLayer& layer,
                            const std::function<VertexId(VertexId)>& to_new,
                            std::size_t n_vertices, int threads = 1);

// Host-side buffer that lookup writes into and transfer reads from. Tracks
// which rows are written so a transfer can never read unwritten data; a
// streaming reader can block until rows are published.
class StagingBuffer {
 public:
  StagingBuffer() = default;
  StagingBuffer(std::size_t rows, std::size_t dim, std::size_t device_offset = 0) {
    open(rows, dim, device_offset);
  }
  StagingBuffer(const StagingBuffer&) = delete;
  StagingBuffer& operator=(const StagingBuffer&) = delete;

  // Sizes the buffer; readers waiting in wait_open() are released.
  void open(std::size_t rows, std::size_t dim, std::size_t device_offset);
  // Blocks until open() or cancel(); throws PipelineOrderingError if cancelled.
  void wait_open() const;

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::size_t device_offset() const { return device_offset_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * dim_, dim_}; }
  std::span<const double> rows_view(std::size_t first, std::size_t count) const {
    return {data_.data() + first * dim_, count * dim_};
  }

  void publish(std::size_t first, std::size_t count);
  bool is_written(std::size_t first, std::size_t count) const;
  // Throws PipelineOrderingError if the buffer is cancelled while waiting.
  void wait_written(std::size_t first, std::size_t count) const;
  void cancel();

 private:
  bool written_locked(std::size_t first, std::size_t count) const;

  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::size_t device_offset_ = 0;
  std::vector<double> data_;
  std::vector<std::uint8_t> written_;
  bool opened_ = false;
  bool cancelled_ = false;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
};

// Copies global rows orig_ids[i] into staging row first_row + i, publishing
// every `publish_rows` rows. Throws InvalidArgumentError on capacity
// shortfall and ConsistencyError on an out-of-range vertex.
std::size_t lookup_rows(const EmbeddingTable& global, std::span<const VertexId> orig_ids,
                        StagingBuffer& out, std::size_t first_row, int threads = 1,
                        std::size_t publish_rows = 0);

// Row j of `out` becomes global row new_to_orig[j]. Returns rows written.
std::size_t lookup_embeddings(const EmbeddingTable& global, const VidTable& vids,
                              StagingBuffer& out, int threads = 1);

struct TransferRecord {
  std::uint64_t bytes = 0;
  std::uint64_t chunks = 0;
  std::uint64_t rows = 0;
};

// Stand-in for accelerator memory: a separate region with explicit copy-in.
// The embedding table is readable only once every row has been copied.
class DeviceArena {
 public:
  // First call sizes the table; later calls must agree. Thread-safe.
  void allocate_embeddings(std::size_t rows, std::size_t dim);
  bool allocated() const;
  // Copies rows [first_row, first_row + data.size()/dim).
  void copy_in(std::size_t first_row, std::span<const double> data);
  bool complete() const;
  // Throws PipelineOrderingError unless complete().
  const EmbeddingTable& embeddings() const;

  void count_graph_bytes(std::uint64_t bytes);
  std::uint64_t bytes_transferred() const;
  std::uint64_t graph_bytes_transferred() const;
  std::uint64_t transfer_chunks() const;

 private:
  mutable std::mutex mu_;
  EmbeddingTable table_;
  std::vector<std::uint8_t> arrived_;
  std::size_t rows_arrived_ = 0;
  bool allocated_ = false;
  std::uint64_t bytes_ = 0;
  std::uint64_t graph_bytes_ = 0;
  std::uint64_t chunks_ = 0;
};

// Sends the staging buffer to the arena in chunks of `rows_per_chunk` rows
// (0: one chunk). Without `wait`, an unwritten chunk raises
// PipelineOrderingError; with `wait`, each chunk is sent as soon as it is
// published.
TransferRecord transfer(const StagingBuffer& staging, DeviceArena& device,
                        std::size_t rows_per_chunk, bool wait = false);

}  // namespace vcgnn
