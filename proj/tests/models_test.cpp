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

#include "model_util.hpp"
#include "vcgnn/errors.hpp"
#include "vcgnn/graph_store.hpp"
#include "vcgnn/models.hpp"
#include "vcgnn/trainer.hpp"

namespace vcgnn {
namespace {

using testing::check_gradients;
using testing::make_instance;
using testing::relative_diff;

TEST(Models, ModesAndNames) {
  EXPECT_FALSE(modes_for(ModelKind::gcn).weighted());
  EXPECT_EQ(modes_for(ModelKind::ngcf).g, EdgeWeightFn::element_wise_product);
  EXPECT_EQ(modes_for(ModelKind::ngcf).h, WeightApply::sum);
  EXPECT_EQ(modes_for(ModelKind::ngcf_scalar).h, WeightApply::scale);
  EXPECT_EQ(parse_model_kind("ngcf-scalar"), ModelKind::ngcf_scalar);
  EXPECT_EQ(parse_backend("scatter"), Backend::scatter);
  EXPECT_THROW(parse_backend("gpu"), ConfigError);
  EXPECT_THROW(parse_model_kind("gat"), ConfigError);
}

TEST(Models, ConstructionAndValidation) {
  const GnnModel m = make_model(ModelKind::gcn, 8, 6, 3, 3, 5);
  EXPECT_EQ(m.n_layers(), 3u);
  EXPECT_EQ(m.in_dim(), 8u);
  EXPECT_EQ(m.out_dim(), 3u);
  EXPECT_EQ(m.layers[0].mlp.activation, Activation::relu);
  EXPECT_EQ(m.layers[2].mlp.activation, Activation::identity);
  EXPECT_EQ(m, make_model(ModelKind::gcn, 8, 6, 3, 3, 5));
  EXPECT_FALSE(m == make_model(ModelKind::gcn, 8, 6, 3, 3, 6));
  GnnModel bad = m;
  bad.layers[1].mlp = MlpLayer::init(5, 3, Activation::relu, 1);
  EXPECT_THROW(bad.validate(), ShapeMismatchError);
  EXPECT_THROW(make_model(ModelKind::gcn, 8, 6, 3, 0, 1), InvalidArgumentError);
}

TEST(Models, GradientsMatchFiniteDifferences) {
  for (ModelKind kind : {ModelKind::gcn, ModelKind::ngcf, ModelKind::ngcf_scalar}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto inst = make_instance(seed, 30, 5, 6, 2, 3);
      GnnModel model = make_model(kind, 5, 4, 3, 2, seed);
      testing::randomize_biases(model, seed);
      for (DkpPolicy p : {DkpPolicy::force_aggr, DkpPolicy::force_comb}) {
        ExecOptions opt;
        opt.policy = p;
        const auto check = check_gradients(model, inst, opt);
        EXPECT_LT(check.worst, 1e-5) << to_string(kind) << " seed " << seed;
      }
    }
  }
}

TEST(Models, BackendsAgree) {
  for (ModelKind kind : {ModelKind::gcn, ModelKind::ngcf, ModelKind::ngcf_scalar}) {
    const auto inst = make_instance(11, 80, 7, 10, 2, 4, 4);
    const GnnModel model = make_model(kind, 7, 6, 4, 2, 3);
    ExecOptions napa;
    napa.threads = 3;
    const ForwardResult ref = model_forward(model, inst.batch, napa);
    const LossResult loss = xent_loss(ref.logits, inst.labels);
    const ModelGrads gref = model_backward(model, ref.cache, loss.dlogits, inst.batch, napa);
    for (Backend b : {Backend::edgewise, Backend::scatter}) {
      ExecOptions opt;
      opt.backend = b;
      const ForwardResult f = model_forward(model, inst.batch, opt);
      EXPECT_LT(max_abs_diff(f.logits, ref.logits), 1e-10);
      const ModelGrads g = model_backward(model, f.cache, loss.dlogits, inst.batch, opt);
      for (std::size_t l = 0; l < model.n_layers(); ++l) {
        EXPECT_LT(max_abs_diff(g.weight[l], gref.weight[l]), 1e-10);
      }
    }
  }
}

TEST(Models, OrderInvarianceOnEligibleLayers) {
  for (ModelKind kind : {ModelKind::gcn, ModelKind::ngcf_scalar}) {
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
      const auto inst = make_instance(seed, 60, 12, 8, 2, 3, 3);
      const GnnModel model = make_model(kind, 12, 5, 3, 2, seed);
      ExecOptions a, c;
      a.policy = DkpPolicy::force_aggr;
      c.policy = DkpPolicy::force_comb;
      const ForwardResult fa = model_forward(model, inst.batch, a);
      const ForwardResult fc = model_forward(model, inst.batch, c);
      for (Order o : fc.orders) EXPECT_EQ(o, Order::comb_first);
      EXPECT_LT(relative_diff(fc.logits, fa.logits), 1e-9);
      const LossResult loss = xent_loss(fa.logits, inst.labels);
      const ModelGrads ga = model_backward(model, fa.cache, loss.dlogits, inst.batch, a);
      const ModelGrads gc = model_backward(model, fc.cache, loss.dlogits, inst.batch, c);
      for (std::size_t l = 0; l < model.n_layers(); ++l) {
        EXPECT_LT(relative_diff(gc.weight[l], ga.weight[l]), 1e-9);
        EXPECT_LT(relative_diff(gc.bias[l], ga.bias[l]), 1e-9);
      }
    }
  }
}

TEST(Models, IneligibleLayersStayAggrFirst) {
  const auto inst = make_instance(3, 40, 6, 5, 2, 3);
  const GnnModel model = make_model(ModelKind::ngcf, 6, 4, 3, 2, 1);
  ExecOptions opt;
  opt.policy = DkpPolicy::force_comb;
  const ForwardResult f = model_forward(model, inst.batch, opt);
  for (Order o : f.orders) EXPECT_EQ(o, Order::aggr_first);
  for (const LayerCache& c : f.cache.layers) EXPECT_FALSE(c.eligible);
}

TEST(Models, CombFirstReducesMultiplyAddsOnNarrowingLayers) {
  const auto inst = make_instance(4, 200, 64, 20, 1, 4, 5);
  const GnnModel model = make_model(ModelKind::gcn, 64, 8, 4, 1, 1);
  KernelCounters ka, kc;
  ExecOptions a, c;
  a.policy = DkpPolicy::force_aggr;
  a.counters = &ka;
  c.policy = DkpPolicy::force_comb;
  c.counters = &kc;
  model_forward(model, inst.batch, a);
  model_forward(model, inst.batch, c);
  EXPECT_LT(kc.aggregation_macs + kc.combination_macs, ka.aggregation_macs + ka.combination_macs);
}

TEST(Models, TranslationsPerBackend) {
  const auto inst = make_instance(5, 50, 4, 6, 2, 3);
  const GnnModel model = make_model(ModelKind::gcn, 4, 4, 3, 2, 1);
  for (Backend b : {Backend::napa, Backend::edgewise, Backend::scatter}) {
    ExecOptions opt;
    opt.backend = b;
    reset_translation_count();
    const ForwardResult f = model_forward(model, inst.batch, opt);
    const std::uint64_t fwd = translation_count();
    const LossResult loss = xent_loss(f.logits, inst.labels);
    model_backward(model, f.cache, loss.dlogits, inst.batch, opt);
    const std::uint64_t bwd = translation_count() - fwd;
    if (b == Backend::napa) {
      EXPECT_EQ(fwd + bwd, 0u);
    } else {
      EXPECT_GE(fwd, model.n_layers());
      EXPECT_GE(bwd, model.n_layers());
    }
  }
}

TEST(Models, CacheMisuse) {
  const auto a = make_instance(6, 30, 4, 4, 2, 3);
  const auto b = make_instance(7, 30, 4, 4, 2, 3);
  const GnnModel model = make_model(ModelKind::gcn, 4, 4, 3, 2, 1);
  const ForwardResult f = model_forward(model, a.batch);
  const LossResult loss = xent_loss(f.logits, a.labels);
  EXPECT_THROW(model_backward(model, f.cache, loss.dlogits, b.batch), ConsistencyError);
  ForwardCache stale = f.cache;
  stale.valid = false;
  EXPECT_THROW(model_backward(model, stale, loss.dlogits, a.batch), ConsistencyError);
  const GnnModel wide = make_model(ModelKind::gcn, 5, 4, 3, 2, 1);
  EXPECT_THROW(model_forward(wide, a.batch), ShapeMismatchError);
}

TEST(Models, SgdUpdate) {
  GnnModel m = make_model(ModelKind::gcn, 3, 2, 2, 1, 1);
  ModelGrads g;
  g.weight.push_back(DenseMatrix(3, 2, 1.0));
  g.bias.push_back({2.0, -2.0});
  const GnnModel before = m;
  sgd_update(m, g, 0.0);
  EXPECT_EQ(m, before);
  sgd_update(m, g, 0.5);
  EXPECT_DOUBLE_EQ(m.layers[0].mlp.weight(1, 1), before.layers[0].mlp.weight(1, 1) - 0.5);
  EXPECT_DOUBLE_EQ(m.layers[0].mlp.bias[1], 1.0);
}

TEST(Models, AssembleBatchMatchesPipeline) {
  const auto inst = make_instance(8, 40, 3, 5, 2, 3);
  std::vector<BatchLayer> layers = inst.batch.layers;
  const PreparedBatch direct =
      assemble_batch(std::move(layers), inst.batch.input_embeddings(), inst.batch.batch_size);
  const GnnModel model = make_model(ModelKind::ngcf, 3, 4, 3, 2, 1);
  EXPECT_EQ(model_forward(model, direct).logits, model_forward(model, inst.batch).logits);
}

// Repeating one batch with a small step size lowers the loss monotonically.
TEST(Models, RepeatedBatchLossIsNonIncreasing) {
  const auto inst = make_instance(9, 60, 6, 12, 2, 3);
  GnnModel model = make_model(ModelKind::gcn, 6, 8, 3, 2, 2);
  double prev = 1e300;
  for (int step = 0; step < 20; ++step) {
    const ForwardResult f = model_forward(model, inst.batch);
    const LossResult loss = xent_loss(f.logits, inst.labels);
    EXPECT_LE(loss.loss, prev + 1e-12) << "step " << step;
    prev = loss.loss;
    sgd_update(model, model_backward(model, f.cache, loss.dlogits, inst.batch), 0.05);
  }
}

struct TrainFixture {
  Csr graph;
  DenseMatrix features;
  Dataset data;

  explicit TrainFixture(std::uint64_t seed, std::size_t n = 400, std::size_t dim = 16,
                        std::size_t classes = 4) {
    CounterRng rng(seed);
    graph = coo_to_csr(testing::random_simple_coo(rng, n, n * 6));
    features = testing::random_matrix(rng, n, dim);
    data.graph = &graph;
    data.embeddings = &features;
    data.labels = synthetic_labels(n, classes);
    data.n_classes = classes;
  }
};

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden_dim = 8;
  cfg.batch_size = 50;
  cfg.fanouts = {4, 4};
  cfg.epochs = 2;
  cfg.steps_per_epoch = 3;
  cfg.seed = 17;
  cfg.calibrate = false;
  return cfg;
}

TEST(Trainer, SameSeedSameParameters) {
  TrainFixture fx(1);
  const TrainConfig cfg = small_config();
  const GnnModel init = make_model(ModelKind::gcn, 16, 8, 4, 2, cfg.seed);
  const TrainResult a = train(init, fx.data, cfg);
  const TrainResult b = train(init, fx.data, cfg);
  EXPECT_EQ(a.model, b.model);
  ASSERT_EQ(a.steps.size(), 6u);
  for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].loss, b.steps[i].loss);
  EXPECT_FALSE(a.model == init);
}

TEST(Trainer, ZeroLearningRateKeepsParameters) {
  TrainFixture fx(2);
  TrainConfig cfg = small_config();
  cfg.learning_rate = 0.0;
  const GnnModel init = make_model(ModelKind::ngcf, 16, 8, 4, 2, 3);
  EXPECT_EQ(train(init, fx.data, cfg).model, init);
}

TEST(Trainer, ThreadsPipelineAndOverlapDoNotChangeResults) {
  TrainFixture fx(3);
  const GnnModel init = make_model(ModelKind::gcn, 16, 8, 4, 2, 1);
  TrainConfig base = small_config();
  std::vector<PhaseRecord> base_records;
  const TrainResult ref = train(init, fx.data, base, [&](const PhaseRecord& r) {
    base_records.push_back(r);
  });
  for (int threads : {2, 4}) {
    for (PipelineMode mode : {PipelineMode::serial, PipelineMode::parallel_pipelined_t}) {
      for (bool overlap : {false, true}) {
        TrainConfig cfg = base;
        cfg.threads = threads;
        cfg.pipeline = mode;
        cfg.overlap = overlap;
        std::vector<PhaseRecord> records;
        const TrainResult r = train(init, fx.data, cfg, [&](const PhaseRecord& p) {
          records.push_back(p);
        });
        EXPECT_EQ(r.model, ref.model);
        ASSERT_EQ(records.size(), base_records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
          EXPECT_EQ(records[i].phase, base_records[i].phase);
          EXPECT_EQ(records[i].counters, base_records[i].counters);
          EXPECT_EQ(records[i].bytes_transferred, base_records[i].bytes_transferred);
        }
      }
    }
  }
}

TEST(Trainer, PhaseRecordsPerStep) {
  TrainFixture fx(4);
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  std::vector<std::string> phases;
  train(make_model(ModelKind::gcn, 16, 8, 4, 2, 1), fx.data, cfg,
        [&](const PhaseRecord& r) { phases.push_back(r.phase); });
  ASSERT_EQ(phases.size(), 18u);
  EXPECT_EQ(std::vector<std::string>(phases.begin(), phases.begin() + 6),
            (std::vector<std::string>{"S", "R", "K", "T", "FWP", "BWP"}));
}

TEST(Trainer, ResumeReproducesTheNextStep) {
  TrainFixture fx(5);
  TrainConfig cfg = small_config();
  const GnnModel init = make_model(ModelKind::gcn, 16, 8, 4, 2, 1);
  const TrainResult full = train(init, fx.data, cfg);

  TrainConfig first_half = cfg;
  first_half.epochs = 1;
  const TrainResult half = train(init, fx.data, first_half);
  TrainConfig rest = cfg;
  rest.start_step = half.next_step;
  const TrainResult resumed = train(half.model, fx.data, rest);
  ASSERT_EQ(resumed.steps.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(resumed.steps[i].loss, full.steps[3 + i].loss);
  EXPECT_EQ(resumed.model, full.model);
}

TEST(Trainer, DkpOnMatchesForcedAggrFirst) {
  TrainFixture fx(6, 600, 256, 4);
  TrainConfig cfg = small_config();
  cfg.hidden_dim = 4;
  cfg.fanouts = {2, 2};
  cfg.coeffs = DkpCoefficients::gpu_defaults();
  const GnnModel init = make_model(ModelKind::gcn, 256, 4, 4, 2, 1);
  const TrainResult on = train(init, fx.data, cfg);
  cfg.dkp = DkpPolicy::force_aggr;
  const TrainResult aggr = train(init, fx.data, cfg);
  bool any_comb = false;
  for (std::size_t i = 0; i < on.steps.size(); ++i) {
    EXPECT_NEAR(on.steps[i].loss, aggr.steps[i].loss, 1e-8);
    for (Order o : on.steps[i].fwd_orders) any_comb |= o == Order::comb_first;
  }
  EXPECT_TRUE(any_comb);
}

TEST(Trainer, CalibrationFitsAtStart) {
  TrainFixture fx(7, 400, 32, 4);
  TrainConfig cfg = small_config();
  cfg.calibrate = true;
  cfg.epochs = 1;
  const TrainResult r = train(make_model(ModelKind::gcn, 32, 8, 4, 2, 1), fx.data, cfg);
  EXPECT_TRUE(r.fitted);
  EXPECT_FALSE(r.fit_samples.empty());
  EXPECT_FALSE(r.coeffs == DkpCoefficients::gpu_defaults());
}

TEST(Trainer, TranslationsOnlyForBaselines) {
  TrainFixture fx(8);
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  const GnnModel init = make_model(ModelKind::gcn, 16, 8, 4, 2, 1);
  EXPECT_EQ(train(init, fx.data, cfg).translations, 0u);
  cfg.backend = Backend::edgewise;
  EXPECT_GE(train(init, fx.data, cfg).translations, 3u * 2 * 2);
}

TEST(Trainer, ConfigErrors) {
  TrainFixture fx(9);
  const GnnModel init = make_model(ModelKind::gcn, 16, 8, 4, 2, 1);
  TrainConfig cfg = small_config();
  cfg.fanouts = {4};
  EXPECT_THROW(train(init, fx.data, cfg), ConfigError);
  cfg = small_config();
  cfg.batch_size = 0;
  EXPECT_THROW(train(init, fx.data, cfg), ConfigError);
  cfg = small_config();
  cfg.learning_rate = -1.0;
  EXPECT_THROW(train(init, fx.data, cfg), ConfigError);
  EXPECT_THROW(train(make_model(ModelKind::gcn, 15, 8, 4, 2, 1), fx.data, small_config()),
               ShapeMismatchError);
}

TEST(Trainer, NonFiniteLossAborts) {
  TrainFixture fx(10);
  fx.features(0, 0) = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < fx.features.rows(); ++v) fx.features(v, 1) = 1e308;
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  EXPECT_THROW(train(make_model(ModelKind::gcn, 16, 8, 4, 2, 1), fx.data, cfg), NumericError);
}

TEST(Trainer, BatchOrderIsAPermutation) {
  TrainFixture fx(11, 120);
  TrainConfig cfg = small_config();
  cfg.batch_size = 50;
  cfg.steps_per_epoch = 0;
  EXPECT_EQ(steps_per_epoch(fx.data, cfg), 3u);
  std::set<VertexId> seen;
  for (std::size_t s = 0; s < 3; ++s) {
    for (VertexId v : batch_vertices(fx.data, cfg, 0, s)) EXPECT_TRUE(seen.insert(v).second);
  }
  EXPECT_EQ(seen.size(), 120u);
  EXPECT_NE(batch_vertices(fx.data, cfg, 0, 0), batch_vertices(fx.data, cfg, 1, 0));
  const auto labels = synthetic_labels(100, 7);
  for (std::size_t v = 0; v < 100; ++v) EXPECT_EQ(labels[v], mix64(v) % 7);
}

}  // namespace
}  // namespace vcgnn
