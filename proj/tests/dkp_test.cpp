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

#include <vector>

#include "test_util.hpp"
#include "vcgnn/dkp.hpp"
#include "vcgnn/errors.hpp"
#include "vcgnn/models.hpp"

namespace vcgnn {
namespace {

const LayerDims kExample{1000, 100, 2000, 128, 64};

TEST(CostModel, AggrFirstExample) {
  const Benefit b =
      estimate_benefit(kExample, DkpCoefficients::gpu_defaults(), Direction::fwp, false);
  EXPECT_NEAR(b.aggr_first, 442.944, 1e-9);
  // (128 - 64) * (1e-3 * 2000 + 1e-12 * 100).
  EXPECT_NEAR(b.comb_first, 64 * (1e-3 * 2000 + 1e-12 * 100), 1e-12);
}

TEST(CostModel, BackwardFormulas) {
  const DkpCoefficients c = DkpCoefficients::gpu_defaults();
  const Benefit b = estimate_benefit(kExample, c, Direction::bwp, false);
  EXPECT_NEAR(b.aggr_first, 900 * (1e-7 * 64 * 128 + 4e-6 * 128), 1e-12);
  EXPECT_NEAR(b.comb_first, 64 * (1e-6 * 2000 + 1e-8 * 1000), 1e-15);
  const Benefit first = estimate_benefit(kExample, c, Direction::bwp, true);
  EXPECT_NEAR(first.aggr_first, 1000 * (1e-7 * 64 * 128 + 4e-6 * 128), 1e-12);
  EXPECT_EQ(reduction_factor(kExample, Direction::fwp, true), 900.0);
  EXPECT_EQ(reduction_factor(kExample, Direction::bwp, true), 1000.0);
}

TEST(CostModel, ZeroBenefits) {
  const DkpCoefficients c = DkpCoefficients::gpu_defaults();
  LayerDims same_rows = kExample;
  same_rows.n_dst = same_rows.n_src;
  EXPECT_EQ(estimate_benefit(same_rows, c, Direction::fwp, false).aggr_first, 0.0);
  LayerDims same_width = kExample;
  same_width.n_hid = same_width.n_feat;
  const Benefit b = estimate_benefit(same_width, c, Direction::fwp, false);
  EXPECT_EQ(b.comb_first, 0.0);
  // Narrowing layers may yield negative comb-first benefit.
  LayerDims widening = kExample;
  widening.n_hid = 256;
  EXPECT_LT(estimate_benefit(widening, c, Direction::fwp, false).comb_first, 0.0);
}

TEST(CostModel, Decisions) {
  const DkpCoefficients c = DkpCoefficients::gpu_defaults();
  EXPECT_EQ(decide(estimate_benefit(kExample, c, Direction::fwp, false)), Order::aggr_first);
  const LayerDims wide{500, 400, 900, 4353, 64};
  EXPECT_EQ(decide(estimate_benefit(wide, c, Direction::fwp, false)), Order::comb_first);
  EXPECT_EQ(decide({1.0, 1.0}), Order::aggr_first);
  EXPECT_EQ(decide({1.0, 1.0 + 1e-12}), Order::comb_first);

  EXPECT_EQ(choose_order(DkpPolicy::on, false, wide, c, Direction::fwp, false), Order::aggr_first);
  EXPECT_EQ(choose_order(DkpPolicy::force_comb, false, wide, c, Direction::fwp, false),
            Order::aggr_first);
  EXPECT_EQ(choose_order(DkpPolicy::force_comb, true, kExample, c, Direction::fwp, false),
            Order::comb_first);
  EXPECT_EQ(choose_order(DkpPolicy::off, true, wide, c, Direction::fwp, false), Order::aggr_first);
  EXPECT_EQ(choose_order(DkpPolicy::on, true, wide, c, Direction::fwp, false), Order::comb_first);
}

// Growing n_feat never flips comb-first back to aggr-first.
TEST(CostModel, DecisionMonotoneInFeatureWidth) {
  const DkpCoefficients c = DkpCoefficients::gpu_defaults();
  CounterRng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    LayerDims d;
    d.n_src = 2 + rng.bounded(2000);
    d.n_dst = 1 + rng.bounded(d.n_src);
    d.n_edge = 1 + rng.bounded(20000);
    d.n_hid = 1 + rng.bounded(256);
    for (Direction dir : {Direction::fwp, Direction::bwp}) {
      bool comb = false;
      for (std::size_t feat = 1; feat < 5000; feat += 37) {
        d.n_feat = feat;
        const bool now = decide(estimate_benefit(d, c, dir, false)) == Order::comb_first;
        EXPECT_FALSE(comb && !now) << "flip at feat=" << feat;
        comb = now;
      }
    }
  }
}

TEST(CostModel, PolicyNames) {
  EXPECT_EQ(parse_dkp_policy("force-aggr"), DkpPolicy::force_aggr);
  EXPECT_STREQ(to_string(DkpPolicy::force_comb), "force-comb");
  EXPECT_THROW(parse_dkp_policy("sometimes"), ConfigError);
}

TEST(CostModel, DimsValidation) {
  EXPECT_NO_THROW(kExample.validate());
  LayerDims bad = kExample;
  bad.n_dst = 0;
  EXPECT_THROW(bad.validate(), InvalidArgumentError);
  bad = kExample;
  bad.n_feat = 0;
  EXPECT_THROW(bad.validate(), InvalidArgumentError);
}

std::vector<FitSample> synthetic_samples(const DkpCoefficients& truth, CounterRng& rng,
                                         std::size_t per_pair, double noise) {
  std::vector<FitSample> out;
  for (Direction dir : {Direction::fwp, Direction::bwp}) {
    for (Order order : {Order::aggr_first, Order::comb_first}) {
      for (std::size_t i = 0; i < per_pair; ++i) {
        FitSample s;
        s.dims.n_src = 100 + rng.bounded(5000);
        s.dims.n_dst = 1 + rng.bounded(s.dims.n_src - 1);
        s.dims.n_edge = 1 + rng.bounded(50000);
        s.dims.n_hid = 1 + rng.bounded(256);
        s.dims.n_feat = s.dims.n_hid + 1 + rng.bounded(512);
        s.direction = dir;
        s.order = order;
        s.is_first_layer = rng.bounded(2) == 1;
        s.seconds = predict_seconds(s, truth) * (1.0 + noise * rng.uniform(-1.0, 1.0));
        out.push_back(s);
      }
    }
  }
  return out;
}

TEST(Fitting, NoiselessRecovery) {
  const DkpCoefficients truth = DkpCoefficients::gpu_defaults();
  CounterRng rng(42);
  const auto samples = synthetic_samples(truth, rng, 20, 0.0);
  std::vector<std::string> warnings;
  const DkpCoefficients fit = fit_coefficients(samples, &warnings);
  for (Direction d : {Direction::fwp, Direction::bwp}) {
    for (Order o : {Order::aggr_first, Order::comb_first}) {
      EXPECT_NEAR(fit.at(d, o).first, truth.at(d, o).first, 1e-9);
      EXPECT_NEAR(fit.at(d, o).second, truth.at(d, o).second, 1e-9);
    }
  }
  EXPECT_LT(mean_relative_error(samples, fit), 1e-9);
}

TEST(Fitting, NoisyPredictionError) {
  const DkpCoefficients truth = DkpCoefficients::gpu_defaults();
  CounterRng rng(43);
  const auto train = synthetic_samples(truth, rng, 50, 0.05);
  const auto test = synthetic_samples(truth, rng, 50, 0.05);
  const DkpCoefficients fit = fit_coefficients(train);
  EXPECT_LE(mean_relative_error(test, fit), 0.15);
}

TEST(Fitting, DegenerateInputs) {
  const DkpCoefficients truth = DkpCoefficients::gpu_defaults();
  CounterRng rng(44);
  auto samples = synthetic_samples(truth, rng, 1, 0.0);
  EXPECT_THROW(fit_pair(samples, Direction::fwp, Order::aggr_first), FittingError);
  try {
    fit_coefficients(samples);
    FAIL() << "expected FittingError";
  } catch (const FittingError& e) {
    EXPECT_NE(std::string(e.what()).find("n_hid"), std::string::npos);
  }
  // Two samples with proportional regressors.
  FitSample a;
  a.dims = kExample;
  a.seconds = 1.0;
  FitSample b = a;
  b.dims.n_src = 1900;
  b.dims.n_dst = 1000;
  b.seconds = 2.0;
  const std::vector<FitSample> collinear{a, b};
  EXPECT_THROW(fit_pair(collinear, Direction::fwp, Order::aggr_first), FittingError);
}

TEST(Fitting, NegativeCoefficientsAreClamped) {
  std::vector<FitSample> samples;
  for (std::size_t i = 1; i <= 6; ++i) {
    FitSample s;
    s.dims = {100 + 10 * i, 50, 1000, 16 + i, 8};
    // Decreasing in the second regressor.
    const auto x = regressors(s.dims, Direction::fwp, Order::aggr_first, false);
    s.seconds = 1e-6 * x[0] - 1e-4 * x[1] + 1.0;
    s.seconds = std::max(s.seconds, 1e-3);
    samples.push_back(s);
  }
  std::vector<std::string> warnings;
  const CoefficientPair p = fit_pair(samples, Direction::fwp, Order::aggr_first, &warnings);
  EXPECT_GE(p.first, 0.0);
  EXPECT_GE(p.second, 0.0);
  EXPECT_FALSE(warnings.empty());
}

TEST(Calibration, GridAndMeasurement) {
  const std::vector<LayerDims> observed{{200, 50, 800, 32, 8}};
  const std::vector<double> fractions{0.5, 1.0};
  const auto grid = calibration_grid(observed, fractions);
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(grid[2], observed[0]);
  for (const LayerDims& d : grid) EXPECT_NO_THROW(d.validate());

  const std::vector<bool> first(grid.size(), false);
  const auto samples = measure_samples(grid, first, {3, 1, 5});
  EXPECT_EQ(samples.size(), grid.size() * 4);
  for (const FitSample& s : samples) EXPECT_GT(s.seconds, 0.0);
  EXPECT_NO_THROW(fit_coefficients(samples));
}

TEST(Dfg, GcnRewriteFusesEveryLayer) {
  const GnnModel m = make_model(ModelKind::gcn, 8, 6, 3, 2, 1);
  const Dfg dfg = build_model_dfg(m);
  EXPECT_EQ(dfg.count(DfgKind::pull), 2u);
  EXPECT_EQ(dfg.count(DfgKind::matmul), 2u);
  const Dfg out = rewrite_dfg(dfg);
  EXPECT_EQ(out.count(DfgKind::cost_dkp), 2u);
  EXPECT_EQ(out.count(DfgKind::pull), 0u);
  EXPECT_EQ(out.count(DfgKind::matmul), 0u);
  EXPECT_TRUE(out.is_acyclic());
  EXPECT_EQ(out.size(), dfg.size() - 2);
  for (const DfgNode& n : out.nodes()) {
    if (n.kind != DfgKind::cost_dkp) continue;
    EXPECT_EQ(n.plans[0][0], DfgKind::pull);
    EXPECT_EQ(n.plans[1][0], DfgKind::matmul);
    EXPECT_EQ(out.consumers(&n - out.nodes().data()).size(), 1u);
  }
}

TEST(Dfg, VectorWeightsAreNotFused) {
  const Dfg ngcf = rewrite_dfg(build_model_dfg(make_model(ModelKind::ngcf, 8, 6, 3, 2, 1)));
  EXPECT_EQ(ngcf.count(DfgKind::cost_dkp), 0u);
  EXPECT_EQ(ngcf.count(DfgKind::pull), 2u);
  EXPECT_EQ(ngcf.count(DfgKind::neighbor_apply), 2u);
  const Dfg scalar =
      rewrite_dfg(build_model_dfg(make_model(ModelKind::ngcf_scalar, 8, 6, 3, 2, 1)));
  EXPECT_EQ(scalar.count(DfgKind::cost_dkp), 2u);
  EXPECT_EQ(scalar.count(DfgKind::neighbor_apply), 2u);
  EXPECT_TRUE(scalar.is_acyclic());
}

TEST(Dfg, GraphWithoutPullIsUnchanged) {
  Dfg dfg;
  const std::size_t in = dfg.add({DfgKind::input});
  const std::size_t mm = dfg.add({DfgKind::matmul, 0, {in}});
  dfg.add({DfgKind::activation, 0, {mm}});
  const Dfg out = rewrite_dfg(dfg);
  ASSERT_EQ(out.size(), dfg.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out.node(i).kind, dfg.node(i).kind);
    EXPECT_EQ(out.node(i).inputs, dfg.node(i).inputs);
  }
}

TEST(Dfg, PullWithTwoConsumersIsNotFused) {
  Dfg dfg;
  const std::size_t in = dfg.add({DfgKind::input});
  const std::size_t p = dfg.add({DfgKind::pull, 0, {in}});
  dfg.add({DfgKind::matmul, 0, {p}});
  dfg.add({DfgKind::activation, 0, {p}});
  EXPECT_FALSE(dkp_eligible(dfg, p));
  EXPECT_EQ(rewrite_dfg(dfg).count(DfgKind::cost_dkp), 0u);
}

TEST(Dfg, CyclesAndDanglingInputs) {
  Dfg cyc;
  cyc.add({DfgKind::matmul, 0, {1}});
  cyc.add({DfgKind::pull, 0, {0}});
  EXPECT_FALSE(cyc.is_acyclic());
  EXPECT_THROW(cyc.topological_order(), ConsistencyError);
  Dfg dangling;
  dangling.add({DfgKind::pull, 0, {5}});
  EXPECT_THROW(dangling.topological_order(), ConsistencyError);
}

// Out-of-order node lists are emitted in topological order.
TEST(Dfg, RewriteHandlesUnsortedIds) {
  Dfg dfg;
  dfg.add({DfgKind::activation, 0, {2}});  // 0
  dfg.add({DfgKind::input});               // 1
  dfg.add({DfgKind::matmul, 0, {3}});      // 2
  dfg.add({DfgKind::pull, 0, {1}});        // 3
  const Dfg out = rewrite_dfg(dfg);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_TRUE(out.is_acyclic());
  const auto order = out.topological_order();
  EXPECT_EQ(out.node(order[0]).kind, DfgKind::input);
  EXPECT_EQ(out.node(order[1]).kind, DfgKind::cost_dkp);
  EXPECT_EQ(out.node(order[2]).kind, DfgKind::activation);
}

}  // namespace
}  // namespace vcgnn
