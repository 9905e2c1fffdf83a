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

// Minibatch training loop: per step, prepare a batch through the
// preprocessing pipeline, run forward, softmax cross-entropy, backward and an
// SGD update of the MLP parameters.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vcgnn/models.hpp"
#include "vcgnn/overlap.hpp"

namespace vcgnn {

struct TrainConfig {
  ModelKind model = ModelKind::gcn;
  std::size_t n_layers = 2;
  std::size_t hidden_dim = 64;
  std::size_t batch_size = 300;
  // fanouts[l - 1] for GNN layer l; size must equal n_layers.
  std::vector<std::size_t> fanouts{10, 10};
  double learning_rate = 0.01;
  std::size_t epochs = 1;
  std::size_t steps_per_epoch = 0;  // 0: one pass over the training vertices
  std::uint64_t seed = 0;
  int threads = 1;                  // kernel partitions and pipeline workers
  Backend backend = Backend::napa;
  DkpPolicy dkp = DkpPolicy::on;
  PipelineMode pipeline = PipelineMode::parallel;
  std::size_t chunk_rows = 1024;
  bool overlap = false;
  // Fit the cost model on the first batch when dkp is on and no
  // coefficients are given.
  bool calibrate = true;
  std::optional<DkpCoefficients> coeffs;
  std::size_t start_step = 0;  // resume point (global step index)

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct Dataset {
  const Csr* graph = nullptr;
  const EmbeddingTable* embeddings = nullptr;
  std::vector<std::uint32_t> labels;  // per original vertex
  std::size_t n_classes = 0;
  std::vector<VertexId> train_vertices;  // empty: all vertices
};

// label(v) = hash(v) mod n_classes.
std::vector<std::uint32_t> synthetic_labels(std::size_t n_vertices, std::size_t n_classes);

std::size_t steps_per_epoch(const Dataset& data, const TrainConfig& cfg);

// Batch of a (epoch, step): consecutive slice of a seeded per-epoch
// permutation of the training vertices.
std::vector<VertexId> batch_vertices(const Dataset& data, const TrainConfig& cfg,
                                     std::size_t epoch, std::size_t step);

// Sampling seed of a global step.
std::uint64_t step_seed(std::uint64_t seed, std::size_t global_step);

struct PhaseRecord {
  std::string phase;  // S, R, K, T, FWP, BWP
  std::size_t epoch = 0;
  std::size_t step = 0;  // global step
  std::int64_t wall_ns = 0;
  KernelCounters counters;
  std::uint64_t bytes_transferred = 0;
  std::uint64_t translations = 0;
  std::optional<double> loss;
  std::optional<double> logits_sum;  // FWP: sum over all logits
};

using MetricsSink = std::function<void(const PhaseRecord&)>;

struct StepLog {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global step
  double loss = 0.0;
  std::vector<Order> fwd_orders;
  std::vector<Order> bwd_orders;
};

struct TrainResult {
  GnnModel model;
  std::vector<StepLog> steps;
  DkpCoefficients coeffs;
  bool fitted = false;
  std::vector<FitSample> fit_samples;
  double fit_error = 0.0;  // mean relative prediction error of the fit
  std::vector<std::string> warnings;
  std::uint64_t translations = 0;  // runtime format translations during training
  std::size_t next_step = 0;       // global step a resume would start at
  std::vector<OverlapInterval> timeline;
  std::vector<ScheduleTrace> traces;  // per trained step
};

// Throws ConfigError on bad config, ShapeMismatchError on data/model
// mismatch, NumericError when a loss is not finite.
TrainResult train(GnnModel model, const Dataset& data, const TrainConfig& cfg,
                  const MetricsSink& sink = {});

}  // namespace vcgnn
