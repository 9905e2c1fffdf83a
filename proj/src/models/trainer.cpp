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

#include "vcgnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "vcgnn/errors.hpp"
#include "vcgnn/rng.hpp"

namespace vcgnn {
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
}

std::size_t n_train(const Dataset& data) {
  return data.train_vertices.empty() ? data.graph->n_vertices() : data.train_vertices.size();
}

}  // namespace

void TrainConfig::validate() const {
  if (n_layers == 0) throw ConfigError("layers must be positive");
  if (hidden_dim == 0) throw ConfigError("hidden dim must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (fanouts.size() != n_layers) {
    throw ConfigError("need " + std::to_string(n_layers) + " fanouts, got " +
                      std::to_string(fanouts.size()));
  }
  for (std::size_t f : fanouts) {
    if (f == 0) throw ConfigError("fanouts must be positive");
  }
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (threads < 1) throw ConfigError("threads must be positive");
  if (chunk_rows == 0) throw ConfigError("chunk rows must be positive");
}

std::vector<std::uint32_t> synthetic_labels(std::size_t n_vertices, std::size_t n_classes) {
  if (n_classes == 0) throw InvalidArgumentError("need at least one class");
  std::vector<std::uint32_t> labels(n_vertices);
  for (std::size_t v = 0; v < n_vertices; ++v) {
    labels[v] = static_cast<std::uint32_t>(mix64(v) % n_classes);
  }
  return labels;
}

std::size_t steps_per_epoch(const Dataset& data, const TrainConfig& cfg) {
  const std::size_t full = (n_train(data) + cfg.batch_size - 1) / cfg.batch_size;
  return cfg.steps_per_epoch == 0 ? full : std::min(full, cfg.steps_per_epoch);
}

std::vector<VertexId> batch_vertices(const Dataset& data, const TrainConfig& cfg,
                                     std::size_t epoch, std::size_t step) {
  const std::size_t n = n_train(data);
  std::vector<VertexId> order(n);
  if (data.train_vertices.empty()) {
    std::iota(order.begin(), order.end(), VertexId{0});
  } else {
    order = data.train_vertices;
  }
  auto rng = CounterRng::stream(cfg.seed, 0x65706f6368ULL, epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.bounded(i)]);
  const std::size_t first = std::min(n, step * cfg.batch_size);
  const std::size_t last = std::min(n, first + cfg.batch_size);
  return {order.begin() + static_cast<std::ptrdiff_t>(first),
          order.begin() + static_cast<std::ptrdiff_t>(last)};
}

std::uint64_t step_seed(std::uint64_t seed, std::size_t global_step) {
  return mix64(seed ^ mix64(global_step + 0x73746570ULL));
}

TrainResult train(GnnModel model, const Dataset& data, const TrainConfig& cfg,
                  const MetricsSink& sink) {
  cfg.validate();
  if (!data.graph || !data.embeddings) throw ConfigError("dataset needs a graph and embeddings");
  model.validate();
  if (model.n_layers() != cfg.n_layers) throw ShapeMismatchError("model/config layer count");
  if (data.embeddings->cols() != model.in_dim()) {
    throw ShapeMismatchError("feature width " + std::to_string(data.embeddings->cols()) +
                             " does not match model input " + std::to_string(model.in_dim()));
  }
  if (data.labels.size() != data.graph->n_vertices()) {
    throw ShapeMismatchError("need one label per vertex");
  }
  for (std::uint32_t y : data.labels) {
    if (y >= model.out_dim()) throw ShapeMismatchError("label exceeds model class count");
  }

  TrainResult result;
  result.coeffs = cfg.coeffs.value_or(DkpCoefficients::gpu_defaults());
  const std::size_t spe = steps_per_epoch(data, cfg);
  const std::size_t total = cfg.epochs * spe;
  const std::size_t first = std::min(cfg.start_step, total);
  const TaskDag dag = build_task_dag(cfg.n_layers, cfg.pipeline);

  ExecOptions exec;
  exec.backend = cfg.backend;
  exec.policy = cfg.dkp;
  exec.threads = cfg.threads;
  bool need_fit = cfg.dkp == DkpPolicy::on && cfg.calibrate && !cfg.coeffs && first < total;

  auto emit = [&](PhaseRecord rec) {
    if (sink) sink(rec);
  };

  std::vector<ScheduleTrace> traces(total);
  auto produce = [&](std::size_t i) {
    const std::size_t s = first + i;
    PipelineInputs in;
    in.graph = data.graph;
    in.embeddings = data.embeddings;
    in.batch = batch_vertices(data, cfg, s / spe, s % spe);
    in.fanouts = cfg.fanouts;
    in.seed = step_seed(cfg.seed, s);
    in.chunk_rows = cfg.chunk_rows;
    PipelineResult pr = run_pipeline(dag, cfg.threads, in);
    traces[s] = std::move(pr.trace);
    return std::move(pr.batch);
  };

  auto consume = [&](std::size_t i, PreparedBatch& batch) {
    const std::size_t s = first + i;
    const std::size_t epoch = s / spe;
    {
      std::map<std::string, std::int64_t> wall;
      for (const auto& r : traces[s].records) {
        const bool sampling = r.kind == SubtaskKind::s_algo || r.kind == SubtaskKind::s_hash;
        wall[sampling ? "S" : to_string(r.kind)] += r.end_ns - r.start_ns;
      }
      for (const char* phase : {"S", "R", "K", "T"}) {
        PhaseRecord rec;
        rec.epoch = epoch;
        rec.step = s;
        rec.phase = phase;
        rec.wall_ns = wall[phase];
        if (rec.phase == "T") {
          rec.bytes_transferred = batch.graph_transfer.bytes + batch.embedding_transfer.bytes;
        }
        emit(rec);
      }
    }

    if (need_fit) {
      need_fit = false;
      std::vector<LayerDims> observed;
      for (std::size_t l = 1; l <= model.n_layers(); ++l) {
        const auto& mlp = model.layers[l - 1].mlp;
        observed.push_back(batch.dims(l, mlp.in_dim(), mlp.out_dim()));
      }
      const std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
      std::vector<LayerDims> grid = calibration_grid(observed, fractions);
      // Grid entries come grouped by observed layer; the first group is layer 1.
      std::vector<bool> first_flags;
      const std::size_t per_layer = grid.size() / observed.size();
      for (std::size_t j = 0; j < grid.size(); ++j) first_flags.push_back(j < per_layer);
      CalibrationOptions copt;
      copt.threads = cfg.threads;
      copt.seed = cfg.seed;
      result.fit_samples = measure_samples(grid, first_flags, copt);
      try {
        result.coeffs = fit_coefficients(result.fit_samples, &result.warnings);
        result.fitted = true;
        result.fit_error = mean_relative_error(result.fit_samples, result.coeffs);
      } catch (const FittingError& e) {
        result.warnings.push_back(std::string("cost model fit failed, using defaults: ") +
                                  e.what());
      }
    }
    exec.coeffs = result.coeffs;

    KernelCounters fwd_counters;
    exec.counters = &fwd_counters;
    std::uint64_t tr0 = translation_count();
    auto t0 = Clock::now();
    ForwardResult fwd = model_forward(model, batch, exec);
    std::vector<std::uint32_t> labels(batch.batch_size);
    for (std::size_t r = 0; r < batch.batch_size; ++r) labels[r] = data.labels[batch.vertices[r]];
    LossResult loss = xent_loss(fwd.logits, labels);
    const std::int64_t fwd_ns = elapsed_ns(t0);
    const std::uint64_t fwd_tr = translation_count() - tr0;
    if (!std::isfinite(loss.loss)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                         std::to_string(s) + " (logits finite: " +
                         (fwd.logits.all_finite() ? "yes" : "no") + ", lr " +
                         std::to_string(cfg.learning_rate) + ")");
    }

    KernelCounters bwd_counters;
    exec.counters = &bwd_counters;
    tr0 = translation_count();
    t0 = Clock::now();
    ModelGrads grads = model_backward(model, fwd.cache, loss.dlogits, batch, exec);
    sgd_update(model, grads, cfg.learning_rate);
    const std::int64_t bwd_ns = elapsed_ns(t0);
    const std::uint64_t bwd_tr = translation_count() - tr0;
    exec.counters = nullptr;
    result.translations += fwd_tr + bwd_tr;

    PhaseRecord f;
    f.phase = "FWP";
    f.epoch = epoch;
    f.step = s;
    f.wall_ns = fwd_ns;
    f.counters = fwd_counters;
    f.translations = fwd_tr;
    f.loss = loss.loss;
    double logits_sum = 0.0;
    for (double v : fwd.logits.data()) logits_sum += v;
    f.logits_sum = logits_sum;
    emit(f);
    PhaseRecord b = f;
    b.phase = "BWP";
    b.wall_ns = bwd_ns;
    b.counters = bwd_counters;
    b.translations = bwd_tr;
    b.loss.reset();
    b.logits_sum.reset();
    emit(b);

    result.steps.push_back({epoch, s, loss.loss, fwd.orders, grads.orders});
  };

  OverlapOptions ov;
  ov.enabled = cfg.overlap;
  result.timeline = run_overlapped(total - first, ov, produce, consume);
  result.model = std::move(model);
  result.next_step = total;
  for (std::size_t s = first; s < total; ++s) result.traces.push_back(std::move(traces[s]));
  return result;
}

}  // namespace vcgnn
