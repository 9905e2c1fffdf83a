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

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <thread>

#include "test_util.hpp"
#include "vcgnn/errors.hpp"
#include "vcgnn/overlap.hpp"
#include "vcgnn/pipeline.hpp"

namespace vcgnn {
namespace {

using testing::random_matrix;
using testing::random_simple_coo;

struct Workload {
  Csr graph;
  DenseMatrix embeddings;
  PipelineInputs inputs;
};

Workload make_workload(std::uint64_t seed, std::size_t layers = 2) {
  CounterRng rng(seed);
  Workload w;
  const std::size_t n = 50 + rng.bounded(400);
  w.graph = coo_to_csr(random_simple_coo(rng, n, n * (2 + rng.bounded(8))));
  w.embeddings = random_matrix(rng, n, 1 + rng.bounded(12));
  w.inputs.graph = &w.graph;
  w.inputs.embeddings = &w.embeddings;
  std::set<VertexId> batch;
  const std::size_t b = 1 + rng.bounded(30);
  while (batch.size() < b) batch.insert(static_cast<VertexId>(rng.bounded(n)));
  w.inputs.batch.assign(batch.begin(), batch.end());
  for (std::size_t l = 0; l < layers; ++l) w.inputs.fanouts.push_back(1 + rng.bounded(6));
  w.inputs.seed = seed * 31 + 1;
  w.inputs.chunk_rows = 1 + rng.bounded(64);
  return w;
}

// Kahn's algorithm with a min-heap, checked against DFS reachability.
TEST(TaskDag, TopologicalOrderRespectsEveryEdge) {
  for (PipelineMode mode : {PipelineMode::serial, PipelineMode::parallel,
                            PipelineMode::parallel_pipelined_t}) {
    for (std::size_t L : {1, 2, 3, 5}) {
      const TaskDag dag = build_task_dag(L, mode);
      EXPECT_EQ(dag.subtasks.size(), 6 * L);
      const auto order = dag.topological_order();
      ASSERT_EQ(order.size(), dag.subtasks.size());
      std::vector<std::size_t> pos(order.size());
      for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
      for (std::size_t i = 0; i < dag.subtasks.size(); ++i) {
        for (const Dep& d : dag.subtasks[i].deps) EXPECT_LT(pos[d.id], pos[i]);
      }
    }
  }
}

TEST(TaskDag, SerialIsATotalChain) {
  const TaskDag dag = build_task_dag(2, PipelineMode::serial);
  EXPECT_EQ(dag.n_edges(), dag.subtasks.size() - 1);
  std::vector<std::string> names;
  for (std::size_t id : dag.topological_order()) names.push_back(dag.subtasks[id].name());
  EXPECT_EQ(names, (std::vector<std::string>{"S_algo(2)", "S_hash(2)", "S_algo(1)", "S_hash(1)",
                                             "R(2)", "R(1)", "K(2)", "K(1)", "T_graph(2)",
                                             "T_graph(1)", "T_emb(2)", "T_emb(1)"}));
}

TEST(TaskDag, ParallelDependencies) {
  const TaskDag dag = build_task_dag(3, PipelineMode::parallel);
  auto id = [&](SubtaskKind k, std::size_t l, Payload p = Payload::none) {
    return *dag.find(k, l, p);
  };
  const std::size_t last_hash = id(SubtaskKind::s_hash, 1);
  for (std::size_t l = 1; l <= 3; ++l) {
    EXPECT_TRUE(dag.depends_on(id(SubtaskKind::r, l), id(SubtaskKind::s_hash, l)));
    EXPECT_TRUE(dag.depends_on(id(SubtaskKind::k, l), id(SubtaskKind::s_hash, l)));
    EXPECT_TRUE(dag.depends_on(id(SubtaskKind::t, l, Payload::graph), last_hash));
    EXPECT_TRUE(dag.depends_on(id(SubtaskKind::t, l, Payload::embeddings), last_hash));
    // R and K of one layer are independent.
    EXPECT_FALSE(dag.depends_on(id(SubtaskKind::k, l), id(SubtaskKind::r, l)));
    EXPECT_FALSE(dag.depends_on(id(SubtaskKind::r, l), id(SubtaskKind::k, l)));
  }
  // Sampling of layer 1 waits for layer 2; R(3) may run before S(1).
  EXPECT_TRUE(dag.depends_on(id(SubtaskKind::s_algo, 1), id(SubtaskKind::s_algo, 2)));
  EXPECT_FALSE(dag.depends_on(id(SubtaskKind::r, 3), id(SubtaskKind::s_algo, 1)));
  EXPECT_EQ(dag.n_exclusion_groups, 1u);
  for (const Subtask& t : dag.subtasks) {
    const bool grouped = t.kind == SubtaskKind::s_hash || t.kind == SubtaskKind::r;
    EXPECT_EQ(t.exclusion_group, grouped ? 0 : -1);
  }
}

TEST(TaskDag, PipelinedStreamsLookupIntoTransfer) {
  const TaskDag dag = build_task_dag(2, PipelineMode::parallel_pipelined_t);
  const Subtask& te = dag.subtasks[*dag.find(SubtaskKind::t, 1, Payload::embeddings)];
  const std::size_t k1 = *dag.find(SubtaskKind::k, 1);
  const auto it = std::find_if(te.deps.begin(), te.deps.end(),
                               [&](const Dep& d) { return d.id == k1; });
  ASSERT_NE(it, te.deps.end());
  EXPECT_EQ(it->kind, DepKind::start);
  EXPECT_THROW(build_task_dag(0, PipelineMode::serial), InvalidArgumentError);
  EXPECT_EQ(build_task_dag(2, PipelineMode::parallel, true).n_exclusion_groups, 0u);
}

TEST(TaskDag, ModeNames) {
  EXPECT_EQ(parse_pipeline_mode("serial"), PipelineMode::serial);
  EXPECT_EQ(parse_pipeline_mode("pipelined"), PipelineMode::parallel_pipelined_t);
  EXPECT_EQ(parse_pipeline_mode("parallel_pipelined_T"), PipelineMode::parallel_pipelined_t);
  EXPECT_THROW(parse_pipeline_mode("fast"), ConfigError);
}

// The prepared batch equals sampling and reindexing done directly.
TEST(Pipeline, MatchesDirectPreprocessing) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Workload w = make_workload(seed, 1 + seed % 3);
    const PipelineResult r =
        run_pipeline(build_task_dag(w.inputs.fanouts.size(), PipelineMode::parallel), 2, w.inputs);
    std::vector<std::size_t> per_hop(w.inputs.fanouts.rbegin(), w.inputs.fanouts.rend());
    const SampleResult s = sample_neighbors(w.graph, w.inputs.batch, per_hop, w.inputs.seed);
    ASSERT_TRUE(std::ranges::equal(r.batch.vertices, s.vids.new_to_orig()));
    const std::size_t L = w.inputs.fanouts.size();
    ASSERT_EQ(r.batch.n_layers(), L);
    for (std::size_t l = 1; l <= L; ++l) {
      const ReindexedLayer expect = reindex(s.layers[L - l], s.vids, s.vids.size());
      EXPECT_EQ(r.batch.layers[l - 1].csr, expect.csr);
      EXPECT_EQ(r.batch.layers[l - 1].csc, expect.csc);
      EXPECT_EQ(r.batch.layers[l - 1].dst_rows, expect.dst_rows);
      EXPECT_EQ(r.batch.layers[l - 1].src_rows, expect.src_rows);
    }
    const EmbeddingTable& x = r.batch.input_embeddings();
    ASSERT_EQ(x.rows(), s.vids.size());
    for (std::size_t j = 0; j < x.rows(); ++j) {
      EXPECT_TRUE(std::ranges::equal(x.row(j), w.embeddings.row(s.vids.to_orig(j))));
    }
    EXPECT_EQ(r.batch.batch_size, w.inputs.batch.size());
    EXPECT_EQ(r.batch.embedding_transfer.bytes, x.size() * sizeof(double));
  }
}

TEST(Pipeline, LayerNesting) {
  const Workload w = make_workload(42, 3);
  const PipelineResult r = run_pipeline(build_task_dag(3, PipelineMode::parallel), 2, w.inputs);
  for (std::size_t l = 1; l < 3; ++l) {
    const LayerDims a = r.batch.dims(l, 8, 8);
    const LayerDims b = r.batch.dims(l + 1, 8, 8);
    EXPECT_EQ(a.n_dst, b.n_src);
  }
  EXPECT_EQ(r.batch.dims(3, 8, 8).n_dst, w.inputs.batch.size());
}

TEST(Pipeline, IdenticalAcrossModesAndWorkers) {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const Workload w = make_workload(seed);
    std::set<std::uint64_t> digests;
    std::vector<std::uint8_t> first;
    for (PipelineMode mode : {PipelineMode::serial, PipelineMode::parallel,
                              PipelineMode::parallel_pipelined_t}) {
      for (int workers : {1, 2, 4, 8}) {
        const TaskDag dag = build_task_dag(2, mode);
        const PipelineResult r = run_pipeline(dag, workers, w.inputs);
        const auto v = validate_trace(dag, r.trace);
        EXPECT_TRUE(v.empty()) << to_string(mode) << " " << workers << ": " << (v.empty() ? "" : v[0]);
        const auto bytes = r.batch.serialize();
        if (first.empty()) first = bytes;
        EXPECT_EQ(bytes, first) << to_string(mode) << " workers=" << workers;
        digests.insert(r.batch.digest());
      }
    }
    EXPECT_EQ(digests.size(), 1u);
  }
}

TEST(Pipeline, SerialTraceIsStrictlySequential) {
  const Workload w = make_workload(7);
  const TaskDag dag = build_task_dag(2, PipelineMode::serial);
  const PipelineResult r = run_pipeline(dag, 4, w.inputs);
  std::vector<TraceRecord> recs = r.trace.records;
  std::sort(recs.begin(), recs.end(),
            [](const TraceRecord& a, const TraceRecord& b) { return a.start_ns < b.start_ns; });
  ASSERT_EQ(recs.size(), dag.subtasks.size());
  for (std::size_t i = 1; i < recs.size(); ++i) {
    EXPECT_GE(recs[i].start_ns, recs[i - 1].end_ns);
    EXPECT_EQ(recs[i].subtask, i);
  }
}

TEST(Pipeline, ValidatorReportsViolations) {
  const Workload w = make_workload(8);
  const TaskDag dag = build_task_dag(2, PipelineMode::parallel);
  PipelineResult r = run_pipeline(dag, 2, w.inputs);
  ASSERT_TRUE(validate_trace(dag, r.trace).empty());

  ScheduleTrace early = r.trace;
  const std::size_t k1 = *dag.find(SubtaskKind::k, 1);
  for (TraceRecord& rec : early.records) {
    if (rec.subtask == k1) {
      rec.start_ns = -10;
      rec.end_ns = -5;
    }
  }
  EXPECT_FALSE(validate_trace(dag, early).empty());

  ScheduleTrace overlap = r.trace;
  const std::size_t r1 = *dag.find(SubtaskKind::r, 1);
  const std::size_t r2 = *dag.find(SubtaskKind::r, 2);
  const TraceRecord* rec2 = nullptr;
  for (const TraceRecord& rec : overlap.records) {
    if (rec.subtask == r2) rec2 = &rec;
  }
  for (TraceRecord& rec : overlap.records) {
    if (rec.subtask == r1) {
      rec.start_ns = rec2->start_ns;
      rec.end_ns = rec2->end_ns + 1;
    }
  }
  bool found = false;
  for (const std::string& v : validate_trace(dag, overlap)) {
    found |= v.find("exclusion") != std::string::npos;
  }
  EXPECT_TRUE(found);

  ScheduleTrace missing = r.trace;
  missing.records.pop_back();
  EXPECT_FALSE(validate_trace(dag, missing).empty());
}

// Contended mode numbers vertices differently but samples the same subgraph.
TEST(Pipeline, ContendedSamplesTheSameSubgraph) {
  const Workload w = make_workload(9);
  const PipelineResult a = run_pipeline(build_task_dag(2, PipelineMode::parallel), 4, w.inputs);
  const TaskDag dag = build_task_dag(2, PipelineMode::parallel, true);
  const PipelineResult b = run_pipeline(dag, 4, w.inputs);
  EXPECT_TRUE(validate_trace(dag, b.trace).empty());
  auto edges = [](const PreparedBatch& p, std::size_t l) {
    std::multiset<std::pair<VertexId, VertexId>> out;
    const Coo coo = csr_to_coo(p.layers[l].csr);
    for (std::size_t e = 0; e < coo.n_edges(); ++e) {
      out.insert({p.vertices[coo.src[e]], p.vertices[coo.dst[e]]});
    }
    return out;
  };
  std::set<VertexId> va(a.batch.vertices.begin(), a.batch.vertices.end());
  std::set<VertexId> vb(b.batch.vertices.begin(), b.batch.vertices.end());
  EXPECT_EQ(va, vb);
  for (std::size_t l = 0; l < 2; ++l) EXPECT_EQ(edges(a.batch, l), edges(b.batch, l));
  for (std::size_t j = 0; j < b.batch.n_vertices(); ++j) {
    EXPECT_TRUE(std::ranges::equal(b.batch.input_embeddings().row(j),
                                   w.embeddings.row(b.batch.vertices[j])));
  }
}

TEST(Pipeline, InvalidInputs) {
  Workload w = make_workload(10);
  const TaskDag dag = build_task_dag(2, PipelineMode::parallel);
  EXPECT_THROW(run_pipeline(dag, 0, w.inputs), InvalidArgumentError);
  PipelineInputs bad = w.inputs;
  bad.fanouts = {3};
  EXPECT_THROW(run_pipeline(dag, 2, bad), InvalidArgumentError);
  bad = w.inputs;
  bad.batch.push_back(bad.batch.front());
  EXPECT_THROW(run_pipeline(dag, 2, bad), InvalidArgumentError);
  bad = w.inputs;
  bad.batch = {static_cast<VertexId>(w.graph.n_vertices())};
  EXPECT_THROW(run_pipeline(dag, 2, bad), InvalidArgumentError);
  bad = w.inputs;
  bad.embeddings = nullptr;
  EXPECT_THROW(run_pipeline(dag, 2, bad), InvalidArgumentError);
}

TEST(Pipeline, TraceJsonLines) {
  const Workload w = make_workload(11);
  const PipelineResult r = run_pipeline(build_task_dag(2, PipelineMode::parallel), 1, w.inputs);
  const std::string jsonl = r.trace.to_jsonl();
  EXPECT_EQ(static_cast<std::size_t>(std::count(jsonl.begin(), jsonl.end(), '\n')), 12u);
}

PreparedBatch tiny_batch() {
  PreparedBatch b;
  b.device = std::make_shared<DeviceArena>();
  return b;
}

TEST(Overlap, RunsEveryBatchInOrder) {
  for (bool enabled : {false, true}) {
    std::vector<std::size_t> consumed;
    const auto timeline = run_overlapped(
        5, {enabled, 2}, [](std::size_t) { return tiny_batch(); },
        [&](std::size_t i, PreparedBatch&) { consumed.push_back(i); });
    EXPECT_EQ(consumed, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    EXPECT_EQ(timeline.size(), 10u);
  }
}

TEST(Overlap, PreprocessingOverlapsCompute) {
  using namespace std::chrono_literals;
  const auto timeline = run_overlapped(
      3, {true, 2},
      [](std::size_t) {
        std::this_thread::sleep_for(20ms);
        return tiny_batch();
      },
      [](std::size_t, PreparedBatch&) { std::this_thread::sleep_for(40ms); });
  EXPECT_TRUE(preprocessing_overlaps_compute(timeline, 0));
  EXPECT_TRUE(preprocessing_overlaps_compute(timeline, 1));
  const auto sequential = run_overlapped(
      3, {false, 2}, [](std::size_t) { return tiny_batch(); },
      [](std::size_t, PreparedBatch&) { std::this_thread::sleep_for(2ms); });
  EXPECT_FALSE(preprocessing_overlaps_compute(sequential, 0));
}

TEST(Overlap, ErrorsPropagate) {
  EXPECT_THROW(run_overlapped(
                   4, {true, 2},
                   [](std::size_t i) {
                     if (i == 2) throw ConsistencyError("boom");
                     return tiny_batch();
                   },
                   [](std::size_t, PreparedBatch&) {}),
               ConsistencyError);
  EXPECT_THROW(run_overlapped(
                   4, {true, 2}, [](std::size_t) { return tiny_batch(); },
                   [](std::size_t i, PreparedBatch&) {
                     if (i == 1) throw NumericError("nan");
                   }),
               NumericError);
  EXPECT_THROW(run_overlapped(
                   2, {true, 1}, [](std::size_t) { return tiny_batch(); },
                   [](std::size_t, PreparedBatch&) {}),
               InvalidArgumentError);
}

}  // namespace
}  // namespace vcgnn
