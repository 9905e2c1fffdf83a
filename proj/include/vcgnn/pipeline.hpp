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

// Preprocessing scheduler. One batch is split into per-layer subtasks:
//
//   S_algo(l)  neighbor choices for GNN layer l (parallel over frontier)
//   S_hash(l)  VidTable insertion of the hop's new vertices (single writer)
//   R(l)       reindex layer l into Csr + Csc
//   K(l)       embedding lookup of the vertices S_hash(l) added
//   T(l)       transfer of layer l's graph or embeddings to the device arena
//
// Layers are 1-based; sampling starts at the last layer. The executor runs a
// subtask DAG over a fixed pool of worker threads. Every mode yields the same
// PreparedBatch bytes; only the schedule differs.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcgnn/dkp.hpp"
#include "vcgnn/errors.hpp"
#include "vcgnn/preprocess.hpp"

namespace vcgnn {

enum class PipelineMode { serial, parallel, parallel_pipelined_t };

const char* to_string(PipelineMode m);
// Accepts serial, parallel, pipelined (or parallel_pipelined_T).
PipelineMode parse_pipeline_mode(const std::string& name);

enum class SubtaskKind { s_algo, s_hash, r, k, t };
enum class Payload { none, graph, embeddings };

const char* to_string(SubtaskKind k);

enum class DepKind {
  finish,  // the dependent starts after the dependency ends
  start,   // the dependent starts after the dependency starts and consumes
           // its output chunk by chunk
};

struct Dep {
  std::size_t id = 0;
  DepKind kind = DepKind::finish;
  bool operator==(const Dep&) const = default;
};

struct Subtask {
  SubtaskKind kind = SubtaskKind::s_algo;
  std::size_t layer = 1;
  Payload payload = Payload::none;  // T only
  std::vector<Dep> deps;
  bool barrier = false;  // waits for the final S_hash
  int exclusion_group = -1;

  std::string name() const;  // e.g. "S_hash(2)", "T_emb(1)"
};

struct TaskDag {
  PipelineMode mode = PipelineMode::serial;
  std::size_t n_layers = 0;
  std::vector<Subtask> subtasks;
  std::size_t n_exclusion_groups = 0;

  std::size_t n_edges() const;
  std::optional<std::size_t> find(SubtaskKind kind, std::size_t layer,
                                  Payload payload = Payload::none) const;
  // Kahn's algorithm over all dependency kinds; throws ConsistencyError on a
  // cycle.
  std::vector<std::size_t> topological_order() const;
  // True when `to` is reachable from `from` through dependencies.
  bool depends_on(std::size_t to, std::size_t from) const;
};

// Throws InvalidArgumentError when n_layers == 0.
// contended=true drops the exclusion group (S_hash and R then share a locked
// VidTable); it exists to measure lock contention and numbers vertices
// nondeterministically.
TaskDag build_task_dag(std::size_t n_layers, PipelineMode mode, bool contended = false);

struct PipelineInputs {
  const Csr* graph = nullptr;
  const EmbeddingTable* embeddings = nullptr;
  std::vector<VertexId> batch;
  // fanouts[l - 1] bounds the neighbors sampled for GNN layer l.
  std::vector<std::size_t> fanouts;
  std::uint64_t seed = 0;
  std::size_t chunk_rows = 1024;
};

using BatchLayer = ReindexedLayer;

struct PreparedBatch {
  std::vector<BatchLayer> layers;  // layers[l - 1] is GNN layer l
  std::vector<VertexId> vertices;  // new id -> original id
  std::size_t batch_size = 0;      // batch vertices hold new ids 0..batch_size-1
  std::shared_ptr<DeviceArena> device;
  TransferRecord graph_transfer;
  TransferRecord embedding_transfer;

  std::size_t n_layers() const { return layers.size(); }
  std::size_t n_vertices() const { return vertices.size(); }
  const EmbeddingTable& input_embeddings() const { return device->embeddings(); }
  // Graph part of layer l's dims (1-based); widths are the model's.
  LayerDims dims(std::size_t layer, std::size_t n_feat, std::size_t n_hid) const;
  // Canonical little-endian encoding of every result-bearing field.
  std::vector<std::uint8_t> serialize() const;
  std::uint64_t digest() const;
};

struct TraceRecord {
  std::size_t subtask = 0;
  SubtaskKind kind = SubtaskKind::s_algo;
  std::size_t layer = 0;
  Payload payload = Payload::none;
  std::int64_t ready_ns = 0;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
  int worker = 0;
};

struct ScheduleTrace {
  std::vector<TraceRecord> records;  // completion order
  std::int64_t exclusion_wait_ns = 0;  // ready but held back by an exclusion group
  std::int64_t lock_wait_ns = 0;       // contended mode: VidTable lock acquisition
  std::int64_t wall_ns = 0;

  // One JSON object per line: kind, layer, start_ns, end_ns, worker.
  std::string to_jsonl() const;
};

// Dependency and exclusion violations, one message each; empty when valid.
std::vector<std::string> validate_trace(const TaskDag& dag, const ScheduleTrace& trace);

struct PipelineResult {
  PreparedBatch batch;
  ScheduleTrace trace;
};

class SubtaskError : public Error {
 public:
  SubtaskError(std::size_t id, const std::string& name, const std::string& what)
      : Error("subtask " + std::to_string(id) + " " + name + " failed: " + what),
        id_(id),
        name_(name) {}
  std::size_t subtask_id() const { return id_; }
  const std::string& subtask_name() const { return name_; }

 private:
  std::size_t id_;
  std::string name_;
};

// Runs `dag` on `workers` threads. Parallel modes also use `workers`
// OpenMP threads inside S_algo and K. Throws InvalidArgumentError for bad
// inputs and SubtaskError when a subtask fails.
PipelineResult run_pipeline(const TaskDag& dag, int workers, const PipelineInputs& inputs);

}  // namespace vcgnn
