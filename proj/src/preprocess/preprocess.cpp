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

#include "vcgnn/preprocess.hpp"

#include <omp.h>

#include <algorithm>
#include <cstring>
#include <string>
#include <unordered_set>

#include "vcgnn/errors.hpp"

namespace vcgnn {

std::pair<VertexId, bool> VidTable::insert(VertexId orig) {
  auto next = static_cast<VertexId>(new_to_orig_.size());
  auto [it, inserted] = orig_to_new_.try_emplace(orig, next);
  if (inserted) new_to_orig_.push_back(orig);
  return {it->second, inserted};
}

VertexId VidTable::to_new(VertexId orig) const {
  auto it = orig_to_new_.find(orig);
  if (it == orig_to_new_.end()) {
    throw ConsistencyError("vertex " + std::to_string(orig) + " missing from vid table");
  }
  return it->second;
}

void VidTable::reserve(std::size_t n) {
  orig_to_new_.reserve(n);
  new_to_orig_.reserve(n);
}

void UniqueRandomPriority::select(std::span<const VertexId> neighbors, std::size_t fanout,
                                  CounterRng& rng, std::vector<VertexId>& out) const {
  const std::size_t deg = neighbors.size();
  if (fanout >= deg) {
    out.insert(out.end(), neighbors.begin(), neighbors.end());
    return;
  }
  // Partial Fisher-Yates over positions so duplicate edges stay distinct
  // candidates.
  std::vector<std::uint32_t> pos(deg);
  for (std::size_t i = 0; i < deg; ++i) pos[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i < fanout; ++i) {
    std::size_t j = i + rng.bounded(deg - i);
    std::swap(pos[i], pos[j]);
    out.push_back(neighbors[pos[i]]);
  }
}

const SamplingPriority& default_priority() {
  static const UniqueRandomPriority priority;
  return priority;
}

HopSelection select_hop(const Csr& full, std::span<const VertexId> frontier,
                        std::size_t fanout, std::uint64_t seed, std::size_t hop,
                        int threads, const SamplingPriority& priority) {
  HopSelection sel;
  sel.expanded.assign(frontier.begin(), frontier.end());
  const auto n = static_cast<std::int64_t>(frontier.size());
  std::vector<std::vector<VertexId>> picks(frontier.size());
#pragma omp parallel for schedule(dynamic, 64) num_threads(std::max(threads, 1))
  for (std::int64_t i = 0; i < n; ++i) {
    VertexId v = frontier[i];
    auto rng = CounterRng::stream(seed, hop, v);
    picks[i].reserve(std::min(fanout, full.degree(v)));
    priority.select(full.sources(v), fanout, rng, picks[i]);
  }
  sel.offsets.assign(frontier.size() + 1, 0);
  for (std::size_t i = 0; i < frontier.size(); ++i) {
    sel.offsets[i + 1] = sel.offsets[i] + picks[i].size();
  }
  sel.picked.resize(sel.offsets.back());
  for (std::size_t i = 0; i < frontier.size(); ++i) {
    std::copy(picks[i].begin(), picks[i].end(), sel.picked.begin() + sel.offsets[i]);
  }
  return sel;
}

SampledLayer assemble_layer(const HopSelection& selection, std::size_t n_vertices) {
  SampledLayer layer;
  layer.expanded = selection.expanded;
  layer.edges.n_vertices = n_vertices;
  layer.edges.src = selection.picked;
  layer.edges.dst.resize(selection.picked.size());
  for (std::size_t i = 0; i < selection.expanded.size(); ++i) {
    std::fill(layer.edges.dst.begin() + selection.offsets[i],
              layer.edges.dst.begin() + selection.offsets[i + 1], selection.expanded[i]);
  }
  std::unordered_set<VertexId> seen;
  seen.reserve(selection.picked.size());
  for (VertexId s : selection.picked) {
    if (seen.insert(s).second) layer.frontier.push_back(s);
  }
  return layer;
}

std::size_t commit_layer(const SampledLayer& layer, VidTable& vids) {
  std::size_t added = 0;
  for (VertexId v : layer.frontier) added += vids.insert(v).second ? 1 : 0;
  return added;
}

SampleResult sample_neighbors(const Csr& full, std::span<const VertexId> batch,
                              std::span<const std::size_t> fanouts, std::uint64_t seed,
                              int threads, const SamplingPriority& priority) {
  if (batch.empty()) throw InvalidArgumentError("empty batch");
  if (fanouts.empty()) throw InvalidArgumentError("no fanouts given");
  for (std::size_t f : fanouts) {
    if (f == 0) throw InvalidArgumentError("fanout must be positive");
  }
  SampleResult result;
  for (VertexId v : batch) {
    if (v >= full.n_vertices()) {
      throw InvalidArgumentError("batch vertex " + std::to_string(v) + " out of range");
    }
    if (!result.vids.insert(v).second) {
      throw InvalidArgumentError("batch vertex " + std::to_string(v) + " repeated");
    }
  }
  std::vector<VertexId> frontier(batch.begin(), batch.end());
  for (std::size_t hop = 0; hop < fanouts.size(); ++hop) {
    auto sel = select_hop(full, frontier, fanouts[hop], seed, hop, threads, priority);
    SampledLayer layer = assemble_layer(sel, full.n_vertices());
    commit_layer(layer, result.vids);
    frontier = layer.frontier;
    result.layers.push_back(std::move(layer));
  }
  return result;
}

ReindexedLayer reindex(const SampledLayer& layer, const VidTable& vids,
                       std::size_t n_vertices, int threads) {
  if (n_vertices == 0) n_vertices = vids.size();
  return reindex_with(
      layer, [&](VertexId v) { return vids.to_new(v); }, n_vertices, threads);
}

ReindexedLayer reindex_with(const SampledLayer& layer,
                            const std::function<VertexId(VertexId)>& to_new,
                            std::size_t n_vertices, int threads) {
  const std::size_t m = layer.edges.n_edges();
  Coo mapped;
  mapped.n_vertices = n_vertices;
  mapped.src.resize(m);
  mapped.dst.resize(m);
  for (std::size_t e = 0; e < m; ++e) {
    mapped.src[e] = to_new(layer.edges.src[e]);
    mapped.dst[e] = to_new(layer.edges.dst[e]);
  }
  try {
    mapped.validate();
  } catch (const MalformedGraphError& e) {
    throw ConsistencyError(std::string("reindexed layer out of range: ") + e.what());
  }

  ReindexedLayer out;
  out.csr = coo_to_csr(mapped, threads);
  out.csc = coo_to_csc(mapped, threads);
  out.dst_rows.reserve(layer.expanded.size());
  for (VertexId v : layer.expanded) out.dst_rows.push_back(to_new(v));
  for (std::size_t s = 0; s < out.csc.n_vertices(); ++s) {
    if (out.csc.degree(static_cast<VertexId>(s)) > 0) {
      out.src_rows.push_back(static_cast<RowIndex>(s));
    }
  }
  return out;
}

void StagingBuffer::open(std::size_t rows, std::size_t dim, std::size_t device_offset) {
  std::lock_guard lock(mu_);
  rows_ = rows;
  dim_ = dim;
  device_offset_ = device_offset;
  data_.assign(rows * dim, 0.0);
  written_.assign(rows, 0);
  opened_ = true;
  cv_.notify_all();
}

void StagingBuffer::wait_open() const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return opened_ || cancelled_; });
  if (cancelled_) throw PipelineOrderingError("staging buffer cancelled before opening");
}

void StagingBuffer::publish(std::size_t first, std::size_t count) {
  std::lock_guard lock(mu_);
  if (first + count > rows_) {
    throw InvalidArgumentError("publish past the end of the staging buffer");
  }
  std::fill(written_.begin() + first, written_.begin() + first + count, 1);
  cv_.notify_all();
}

bool StagingBuffer::written_locked(std::size_t first, std::size_t count) const {
  if (first + count > rows_) return false;
  return std::all_of(written_.begin() + first, written_.begin() + first + count,
                     [](std::uint8_t w) { return w != 0; });
}

bool StagingBuffer::is_written(std::size_t first, std::size_t count) const {
  std::lock_guard lock(mu_);
  return written_locked(first, count);
}

void StagingBuffer::wait_written(std::size_t first, std::size_t count) const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return cancelled_ || written_locked(first, count); });
  if (!written_locked(first, count)) {
    throw PipelineOrderingError("staging buffer cancelled while waiting for rows");
  }
}

void StagingBuffer::cancel() {
  std::lock_guard lock(mu_);
  cancelled_ = true;
  cv_.notify_all();
}

std::size_t lookup_rows(const EmbeddingTable& global, std::span<const VertexId> orig_ids,
                        StagingBuffer& out, std::size_t first_row, int threads,
                        std::size_t publish_rows) {
  if (first_row + orig_ids.size() > out.rows()) {
    throw InvalidArgumentError("staging buffer holds " + std::to_string(out.rows()) +
                               " rows, lookup needs " +
                               std::to_string(first_row + orig_ids.size()));
  }
  if (global.cols() != out.dim()) {
    throw ShapeMismatchError("embedding width " + std::to_string(global.cols()) +
                             " does not match staging width " + std::to_string(out.dim()));
  }
  for (VertexId v : orig_ids) {
    if (v >= global.rows()) {
      throw ConsistencyError("vertex " + std::to_string(v) + " outside the embedding table");
    }
  }
  const std::size_t n = orig_ids.size();
  const std::size_t step = publish_rows == 0 ? std::max<std::size_t>(n, 1) : publish_rows;
  const std::size_t bytes = global.cols() * sizeof(double);
  for (std::size_t begin = 0; begin < n; begin += step) {
    const auto end = static_cast<std::int64_t>(std::min(n, begin + step));
#pragma omp parallel for schedule(static) num_threads(std::max(threads, 1))
    for (std::int64_t i = static_cast<std::int64_t>(begin); i < end; ++i) {
      if (bytes > 0) {
        std::memcpy(out.row(first_row + i).data(), global.row(orig_ids[i]).data(), bytes);
      }
    }
    out.publish(first_row + begin, static_cast<std::size_t>(end) - begin);
  }
  return n;
}

std::size_t lookup_embeddings(const EmbeddingTable& global, const VidTable& vids,
                              StagingBuffer& out, int threads) {
  return lookup_rows(global, vids.new_to_orig(), out, 0, threads);
}

void DeviceArena::allocate_embeddings(std::size_t rows, std::size_t dim) {
  std::lock_guard lock(mu_);
  if (allocated_) {
    if (table_.rows() != rows || table_.cols() != dim) {
      throw ShapeMismatchError("device arena already sized differently");
    }
    return;
  }
  table_ = EmbeddingTable(rows, dim);
  arrived_.assign(rows, 0);
  rows_arrived_ = 0;
  allocated_ = true;
}

bool DeviceArena::allocated() const {
  std::lock_guard lock(mu_);
  return allocated_;
}

void DeviceArena::copy_in(std::size_t first_row, std::span<const double> data) {
  std::lock_guard lock(mu_);
  if (!allocated_) throw PipelineOrderingError("copy into unallocated device arena");
  const std::size_t dim = table_.cols();
  const std::size_t count = dim == 0 ? 0 : data.size() / dim;
  if (dim != 0 && data.size() % dim != 0) {
    throw ShapeMismatchError("partial row in device copy");
  }
  if (first_row + count > table_.rows()) {
    throw ShapeMismatchError("device copy past the end of the arena");
  }
  std::copy(data.begin(), data.end(), table_.data().begin() + first_row * dim);
  for (std::size_t r = first_row; r < first_row + count; ++r) {
    if (!arrived_[r]) {
      arrived_[r] = 1;
      ++rows_arrived_;
    }
  }
  bytes_ += data.size() * sizeof(double);
  ++chunks_;
}

bool DeviceArena::complete() const {
  std::lock_guard lock(mu_);
  return allocated_ && rows_arrived_ == table_.rows();
}

const EmbeddingTable& DeviceArena::embeddings() const {
  if (!complete()) throw PipelineOrderingError("device embeddings read before transfer completed");
  return table_;
}

void DeviceArena::count_graph_bytes(std::uint64_t bytes) {
  std::lock_guard lock(mu_);
  graph_bytes_ += bytes;
}

std::uint64_t DeviceArena::bytes_transferred() const {
  std::lock_guard lock(mu_);
  return bytes_;
}

std::uint64_t DeviceArena::graph_bytes_transferred() const {
  std::lock_guard lock(mu_);
  return graph_bytes_;
}

std::uint64_t DeviceArena::transfer_chunks() const {
  std::lock_guard lock(mu_);
  return chunks_;
}

TransferRecord transfer(const StagingBuffer& staging, DeviceArena& device,
                        std::size_t rows_per_chunk, bool wait) {
  TransferRecord rec;
  const std::size_t rows = staging.rows();
  const std::size_t dim = staging.dim();
  const std::size_t step = rows_per_chunk == 0 ? std::max<std::size_t>(rows, 1) : rows_per_chunk;
  const std::size_t offset = staging.device_offset();
  for (std::size_t first = 0; first < rows; first += step) {
    const std::size_t count = std::min(step, rows - first);
    if (wait) {
      staging.wait_written(first, count);
    } else if (!staging.is_written(first, count)) {
      throw PipelineOrderingError("transfer of unwritten staging rows " +
                                  std::to_string(first) + ".." +
                                  std::to_string(first + count - 1));
    }
    device.copy_in(offset + first, staging.rows_view(first, count));
    rec.bytes += count * dim * sizeof(double);
    rec.rows += count;
    ++rec.chunks;
  }
  return rec;
}

}  // namespace vcgnn
