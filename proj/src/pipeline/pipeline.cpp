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

#include "vcgnn/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace vcgnn {

const char* to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::serial: return "serial";
    case PipelineMode::parallel: return "parallel";
    case PipelineMode::parallel_pipelined_t: return "pipelined";
  }
  return "?";
}

PipelineMode parse_pipeline_mode(const std::string& name) {
  if (name == "serial") return PipelineMode::serial;
  if (name == "parallel") return PipelineMode::parallel;
  if (name == "pipelined" || name == "parallel_pipelined_T" || name == "parallel_pipelined_t") {
    return PipelineMode::parallel_pipelined_t;
  }
  throw ConfigError("unknown pipeline mode '" + name + "' (expected serial, parallel, pipelined)");
}

const char* to_string(SubtaskKind k) {
  switch (k) {
    case SubtaskKind::s_algo: return "S_algo";
    case SubtaskKind::s_hash: return "S_hash";
    case SubtaskKind::r: return "R";
    case SubtaskKind::k: return "K";
    case SubtaskKind::t: return "T";
  }
  return "?";
}

std::string Subtask::name() const {
  std::string base = to_string(kind);
  if (kind == SubtaskKind::t) base += payload == Payload::graph ? "_graph" : "_emb";
  return base + "(" + std::to_string(layer) + ")";
}

std::size_t TaskDag::n_edges() const {
  std::size_t n = 0;
  for (const auto& t : subtasks) n += t.deps.size();
  return n;
}

std::optional<std::size_t> TaskDag::find(SubtaskKind kind, std::size_t layer,
                                         Payload payload) const {
  for (std::size_t i = 0; i < subtasks.size(); ++i) {
    const auto& t = subtasks[i];
    if (t.kind == kind && t.layer == layer && t.payload == payload) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> TaskDag::topological_order() const {
  const std::size_t n = subtasks.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> users(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const Dep& d : subtasks[i].deps) {
      if (d.id >= n) throw ConsistencyError("dependency on missing subtask");
      users[d.id].push_back(i);
      ++indegree[i];
    }
  }
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    std::size_t v = ready.front();
    ready.pop_front();
    order.push_back(v);
    for (std::size_t w : users[v]) {
      if (--indegree[w] == 0) ready.push_back(w);
    }
  }
  if (order.size() != n) throw ConsistencyError("task dag has a cycle");
  return order;
}

bool TaskDag::depends_on(std::size_t to, std::size_t from) const {
  std::vector<std::uint8_t> seen(subtasks.size(), 0);
  std::vector<std::size_t> stack{to};
  while (!stack.empty()) {
    std::size_t v = stack.back();
    stack.pop_back();
    for (const Dep& d : subtasks[v].deps) {
      if (d.id == from) return true;
      if (!seen[d.id]) {
        seen[d.id] = 1;
        stack.push_back(d.id);
      }
    }
  }
  return false;
}

TaskDag build_task_dag(std::size_t n_layers, PipelineMode mode, bool contended) {
  if (n_layers == 0) throw InvalidArgumentError("task dag needs at least one layer");
  TaskDag dag;
  dag.mode = mode;
  dag.n_layers = n_layers;
  const std::size_t L = n_layers;
  const int group = contended ? -1 : 0;
  dag.n_exclusion_groups = contended ? 0 : 1;

  auto add = [&](SubtaskKind kind, std::size_t layer, Payload payload = Payload::none) {
    Subtask t;
    t.kind = kind;
    t.layer = layer;
    t.payload = payload;
    if (kind == SubtaskKind::s_hash || kind == SubtaskKind::r) t.exclusion_group = group;
    if (kind == SubtaskKind::t) t.barrier = true;
    dag.subtasks.push_back(std::move(t));
    return dag.subtasks.size() - 1;
  };
  // Creation order is the serial order.
  std::vector<std::size_t> s_algo(L + 2), s_hash(L + 2), r(L + 2), k(L + 2), tg(L + 2), te(L + 2);
  for (std::size_t l = L; l >= 1; --l) {
    s_algo[l] = add(SubtaskKind::s_algo, l);
    s_hash[l] = add(SubtaskKind::s_hash, l);
  }
  for (std::size_t l = L; l >= 1; --l) r[l] = add(SubtaskKind::r, l);
  for (std::size_t l = L; l >= 1; --l) k[l] = add(SubtaskKind::k, l);
  for (std::size_t l = L; l >= 1; --l) tg[l] = add(SubtaskKind::t, l, Payload::graph);
  for (std::size_t l = L; l >= 1; --l) te[l] = add(SubtaskKind::t, l, Payload::embeddings);

  auto dep = [&](std::size_t to, std::size_t from, DepKind kind = DepKind::finish) {
    dag.subtasks[to].deps.push_back({from, kind});
  };
  if (mode == PipelineMode::serial) {
    for (std::size_t i = 1; i < dag.subtasks.size(); ++i) dep(i, i - 1);
    return dag;
  }
  const std::size_t last_hash = s_hash[1];
  for (std::size_t l = L; l >= 1; --l) {
    if (l < L) {
      dep(s_algo[l], s_algo[l + 1]);
      dep(s_hash[l], s_hash[l + 1]);
    }
    dep(s_hash[l], s_algo[l]);
    dep(r[l], s_hash[l]);
    dep(k[l], s_hash[l]);
    dep(tg[l], r[l]);
    dep(tg[l], last_hash);
    dep(te[l], k[l],
        mode == PipelineMode::parallel_pipelined_t ? DepKind::start : DepKind::finish);
    dep(te[l], last_hash);
  }
  return dag;
}

// ---------------------------------------------------------------------------

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
void put_array(std::vector<std::uint8_t>& out, std::span<const T> a) {
  put_u64(out, a.size());
  for (T v : a) {
    if constexpr (sizeof(T) == 4) {
      auto u = static_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
    } else {
      put_u64(out, static_cast<std::uint64_t>(v));
    }
  }
}

}  // namespace

LayerDims PreparedBatch::dims(std::size_t layer, std::size_t n_feat, std::size_t n_hid) const {
  const BatchLayer& b = layers.at(layer - 1);
  return LayerDims{b.src_rows.size(), b.dst_rows.size(), b.csr.n_edges(), n_feat, n_hid};
}

std::vector<std::uint8_t> PreparedBatch::serialize() const {
  std::vector<std::uint8_t> out;
  put_u64(out, layers.size());
  put_u64(out, batch_size);
  for (const auto& l : layers) {
    put_array(out, l.csr.src_ptr());
    put_array(out, l.csr.src_ids());
    put_array(out, l.csc.dst_ptr());
    put_array(out, l.csc.dst_ids());
    put_array(out, std::span<const RowIndex>(l.dst_rows));
    put_array(out, std::span<const RowIndex>(l.src_rows));
  }
  put_array(out, std::span<const VertexId>(vertices));
  const EmbeddingTable& e = input_embeddings();
  put_u64(out, e.rows());
  put_u64(out, e.cols());
  for (double v : e.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
  }
  return out;
}

std::uint64_t PreparedBatch::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : serialize()) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ScheduleTrace::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    std::string kind = to_string(r.kind);
    if (r.kind == SubtaskKind::t) kind += r.payload == Payload::graph ? "_graph" : "_emb";
    nlohmann::json j = {{"kind", kind},       {"layer", r.layer},
                        {"start_ns", r.start_ns}, {"end_ns", r.end_ns},
                        {"worker", r.worker}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::string> validate_trace(const TaskDag& dag, const ScheduleTrace& trace) {
  std::vector<std::string> bad;
  const std::size_t n = dag.subtasks.size();
  std::vector<const TraceRecord*> rec(n, nullptr);
  for (const auto& r : trace.records) {
    if (r.subtask >= n) {
      bad.push_back("trace names unknown subtask " + std::to_string(r.subtask));
      continue;
    }
    if (rec[r.subtask]) bad.push_back(dag.subtasks[r.subtask].name() + " recorded twice");
    rec[r.subtask] = &r;
    if (r.end_ns < r.start_ns) bad.push_back(dag.subtasks[r.subtask].name() + " ends before it starts");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!rec[i]) {
      bad.push_back(dag.subtasks[i].name() + " missing from trace");
      continue;
    }
    for (const Dep& d : dag.subtasks[i].deps) {
      if (!rec[d.id]) continue;
      const auto& me = *rec[i];
      const auto& dep = *rec[d.id];
      if (d.kind == DepKind::finish && me.start_ns < dep.end_ns) {
        bad.push_back(dag.subtasks[i].name() + " started before " + dag.subtasks[d.id].name() +
                      " finished");
      }
      if (d.kind == DepKind::start && me.start_ns < dep.start_ns) {
        bad.push_back(dag.subtasks[i].name() + " started before streaming source " +
                      dag.subtasks[d.id].name());
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = dag.subtasks[i];
      const auto& b = dag.subtasks[j];
      if (a.exclusion_group < 0 || a.exclusion_group != b.exclusion_group) continue;
      if (!rec[i] || !rec[j]) continue;
      if (rec[i]->start_ns < rec[j]->end_ns && rec[j]->start_ns < rec[i]->end_ns) {
        bad.push_back(a.name() + " overlaps " + b.name() + " in exclusion group " +
                      std::to_string(a.exclusion_group));
      }
    }
  }
  return bad;
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
}

// Mutable state of one batch. Each field is written by exactly one subtask
// and read only by subtasks ordered after it.
struct BatchState {
  const PipelineInputs* in = nullptr;
  std::size_t n_layers = 0;
  int threads = 1;
  bool pipelined = false;

  std::vector<std::vector<VertexId>> frontier;   // [l]: input frontier of S_algo(l)
  std::vector<HopSelection> selection;           // [l]: S_algo -> S_hash
  std::vector<SampledLayer> sampled;             // [l]
  std::vector<std::vector<VertexId>> segment;    // [l]: vertices S_hash(l) added
  std::vector<std::size_t> prefix;               // [l]: table size after S_hash(l)
  std::vector<BatchLayer> reindexed;             // [l]
  std::vector<BatchLayer> device_layers;         // [l]
  std::vector<std::unique_ptr<StagingBuffer>> staging;  // [l]
  std::vector<TransferRecord> graph_records;
  std::vector<TransferRecord> emb_records;
  std::shared_ptr<DeviceArena> device = std::make_shared<DeviceArena>();

  VidTable vids;
  std::mutex vids_mu;  // contended mode only
  std::atomic<std::int64_t> lock_wait_ns{0};

  std::size_t hop(std::size_t layer) const { return n_layers - layer; }
  std::size_t offset(std::size_t layer) const { return layer == n_layers ? 0 : prefix[layer + 1]; }
};

template <typename F>
auto locked(BatchState& st, F&& f) {
  auto t0 = Clock::now();
  std::lock_guard lock(st.vids_mu);
  st.lock_wait_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
  return f();
}

void run_s_algo(BatchState& st, std::size_t l) {
  const auto& in = *st.in;
  const auto& frontier = l == st.n_layers ? in.batch : st.sampled[l + 1].frontier;
  st.selection[l] = select_hop(*in.graph, frontier, in.fanouts[l - 1], in.seed, st.hop(l), st.threads);
  st.sampled[l] = assemble_layer(st.selection[l], in.graph->n_vertices());
}

void run_s_hash(BatchState& st, std::size_t l, bool contended) {
  const std::size_t before = l == st.n_layers ? 0 : st.prefix[l + 1];
  if (!contended) {
    if (l == st.n_layers) {
      for (VertexId v : st.in->batch) st.vids.insert(v);
    }
    commit_layer(st.sampled[l], st.vids);
    st.prefix[l] = st.vids.size();
    auto all = st.vids.new_to_orig();
    st.segment[l].assign(all.begin() + before, all.end());
    return;
  }
  if (l == st.n_layers) {
    locked(st, [&] {
      for (VertexId v : st.in->batch) st.vids.insert(v);
      return 0;
    });
  }
  const auto& frontier = st.sampled[l].frontier;
  const auto n = static_cast<std::int64_t>(frontier.size());
#pragma omp parallel for schedule(dynamic, 16) num_threads(st.threads)
  for (std::int64_t i = 0; i < n; ++i) {
    locked(st, [&] { return st.vids.insert(frontier[i]).first; });
  }
  locked(st, [&] {
    st.prefix[l] = st.vids.size();
    auto all = st.vids.new_to_orig();
    st.segment[l].assign(all.begin() + before, all.end());
    return 0;
  });
}

void run_r(BatchState& st, std::size_t l, bool contended) {
  if (!contended) {
    st.reindexed[l] = reindex(st.sampled[l], st.vids, st.prefix[l], st.threads);
    return;
  }
  st.reindexed[l] = reindex_with(
      st.sampled[l], [&](VertexId v) { return locked(st, [&] { return st.vids.to_new(v); }); },
      st.prefix[l], st.threads);
}

void run_k(BatchState& st, std::size_t l) {
  const auto& in = *st.in;
  auto& buf = *st.staging[l];
  buf.open(st.segment[l].size(), in.embeddings->cols(), st.offset(l));
  lookup_rows(*in.embeddings, st.segment[l], buf, 0, st.threads,
              st.pipelined ? in.chunk_rows : 0);
}

void run_t_graph(BatchState& st, std::size_t l) {
  const std::size_t n = st.prefix[1];
  const BatchLayer& src = st.reindexed[l];
  BatchLayer dev;
  dev.csr = src.csr.resized(n);
  dev.csc = src.csc.resized(n);
  dev.dst_rows = src.dst_rows;
  dev.src_rows = src.src_rows;
  TransferRecord rec;
  rec.bytes = 2 * (n + 1) * sizeof(EdgeIndex) + 2 * src.csr.n_edges() * sizeof(VertexId) +
              (src.dst_rows.size() + src.src_rows.size()) * sizeof(RowIndex);
  rec.chunks = 2;
  st.device->count_graph_bytes(rec.bytes);
  st.device_layers[l] = std::move(dev);
  st.graph_records[l] = rec;
}

void run_t_emb(BatchState& st, std::size_t l) {
  auto& buf = *st.staging[l];
  buf.wait_open();
  st.device->allocate_embeddings(st.prefix[1], st.in->embeddings->cols());
  st.emb_records[l] = transfer(buf, *st.device, st.in->chunk_rows, st.pipelined);
}

void validate_inputs(const PipelineInputs& in, const TaskDag& dag) {
  if (!in.graph || !in.embeddings) throw InvalidArgumentError("pipeline needs a graph and embeddings");
  if (in.embeddings->rows() != in.graph->n_vertices()) {
    throw InvalidArgumentError("embedding table has " + std::to_string(in.embeddings->rows()) +
                               " rows for a graph of " + std::to_string(in.graph->n_vertices()) +
                               " vertices");
  }
  if (in.fanouts.size() != dag.n_layers) {
    throw InvalidArgumentError("need one fanout per layer");
  }
  for (std::size_t f : in.fanouts) {
    if (f == 0) throw InvalidArgumentError("fanout must be positive");
  }
  if (in.batch.empty()) throw InvalidArgumentError("empty batch");
  std::vector<VertexId> sorted = in.batch;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidArgumentError("batch contains a repeated vertex");
  }
  if (sorted.back() >= in.graph->n_vertices()) {
    throw InvalidArgumentError("batch vertex " + std::to_string(sorted.back()) + " out of range");
  }
}

}  // namespace

PipelineResult run_pipeline(const TaskDag& dag, int workers, const PipelineInputs& inputs) {
  if (workers < 1) throw InvalidArgumentError("pipeline needs at least one worker");
  validate_inputs(inputs, dag);
  const bool contended = dag.n_exclusion_groups == 0;
  const std::size_t L = dag.n_layers;

  BatchState st;
  st.in = &inputs;
  st.n_layers = L;
  st.threads = dag.mode == PipelineMode::serial ? 1 : workers;
  st.pipelined = dag.mode == PipelineMode::parallel_pipelined_t;
  st.selection.resize(L + 2);
  st.sampled.resize(L + 2);
  st.segment.resize(L + 2);
  st.prefix.assign(L + 2, 0);
  st.reindexed.resize(L + 2);
  st.device_layers.resize(L + 2);
  st.graph_records.resize(L + 2);
  st.emb_records.resize(L + 2);
  for (std::size_t l = 0; l < L + 2; ++l) st.staging.push_back(std::make_unique<StagingBuffer>());

  const std::size_t n = dag.subtasks.size();
  dag.topological_order();  // rejects cycles before any thread starts
  std::vector<std::vector<std::pair<std::size_t, DepKind>>> users(n);
  std::vector<std::size_t> pending(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const Dep& d : dag.subtasks[i].deps) {
      users[d.id].push_back({i, d.kind});
      ++pending[i];
    }
  }

  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::size_t> ready;
  std::vector<std::int64_t> ready_at(n, 0), blocked_since(n, -1);
  std::vector<std::uint8_t> group_busy(std::max<std::size_t>(dag.n_exclusion_groups, 1), 0);
  std::size_t done = 0;
  bool failed = false;
  std::size_t failed_id = 0;
  std::string failure;
  ScheduleTrace trace;
  const auto t0 = Clock::now();

  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i] == 0) ready.push_back(i);
  }

  auto release = [&](std::size_t id, DepKind kind) {
    for (auto [u, k] : users[id]) {
      if (k != kind) continue;
      if (--pending[u] == 0) {
        ready.push_back(u);
        ready_at[u] = since(t0);
      }
    }
  };

  auto execute = [&](std::size_t id) {
    const Subtask& t = dag.subtasks[id];
    switch (t.kind) {
      case SubtaskKind::s_algo: run_s_algo(st, t.layer); break;
      case SubtaskKind::s_hash: run_s_hash(st, t.layer, contended); break;
      case SubtaskKind::r: run_r(st, t.layer, contended); break;
      case SubtaskKind::k: run_k(st, t.layer); break;
      case SubtaskKind::t:
        if (t.payload == Payload::graph) {
          run_t_graph(st, t.layer);
        } else {
          run_t_emb(st, t.layer);
        }
        break;
    }
  };

  auto worker_loop = [&](int worker) {
    std::unique_lock lock(mu);
    while (true) {
      std::size_t pick = n;
      cv.wait(lock, [&] {
        if (failed || done == n) return true;
        for (auto it = ready.begin(); it != ready.end(); ++it) {
          const int g = dag.subtasks[*it].exclusion_group;
          if (g >= 0 && group_busy[g]) {
            if (blocked_since[*it] < 0) blocked_since[*it] = since(t0);
            continue;
          }
          pick = *it;
          ready.erase(it);
          return true;
        }
        return false;
      });
      if (pick == n) return;  // finished or failed
      const Subtask& t = dag.subtasks[pick];
      if (t.exclusion_group >= 0) group_busy[t.exclusion_group] = 1;
      TraceRecord rec;
      rec.subtask = pick;
      rec.kind = t.kind;
      rec.layer = t.layer;
      rec.payload = t.payload;
      rec.ready_ns = ready_at[pick];
      rec.worker = worker;
      rec.start_ns = since(t0);
      if (blocked_since[pick] >= 0) trace.exclusion_wait_ns += rec.start_ns - blocked_since[pick];
      release(pick, DepKind::start);
      cv.notify_all();
      lock.unlock();

      std::string error;
      try {
        execute(pick);
      } catch (const std::exception& e) {
        error = e.what();
      }

      lock.lock();
      rec.end_ns = since(t0);
      if (t.exclusion_group >= 0) group_busy[t.exclusion_group] = 0;
      if (!error.empty() && !failed) {
        failed = true;
        failed_id = pick;
        failure = error;
        for (auto& b : st.staging) b->cancel();
      }
      trace.records.push_back(rec);
      ++done;
      if (!failed) release(pick, DepKind::finish);
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker_loop, w);
  worker_loop(0);
  for (auto& th : pool) th.join();

  if (failed) throw SubtaskError(failed_id, dag.subtasks[failed_id].name(), failure);
  if (done != n) throw ConsistencyError("pipeline stopped with unfinished subtasks");

  trace.wall_ns = since(t0);
  trace.lock_wait_ns = st.lock_wait_ns.load();

  PipelineResult result;
  PreparedBatch& b = result.batch;
  b.batch_size = inputs.batch.size();
  for (std::size_t l = 1; l <= L; ++l) {
    b.layers.push_back(std::move(st.device_layers[l]));
    b.graph_transfer.bytes += st.graph_records[l].bytes;
    b.graph_transfer.chunks += st.graph_records[l].chunks;
    b.embedding_transfer.bytes += st.emb_records[l].bytes;
    b.embedding_transfer.chunks += st.emb_records[l].chunks;
    b.embedding_transfer.rows += st.emb_records[l].rows;
  }
  auto all = st.vids.new_to_orig();
  b.vertices.assign(all.begin(), all.end());
  b.device = st.device;
  result.trace = std::move(trace);
  return result;
}

}  // namespace vcgnn
