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

// Dynamic kernel placement: a linear cost model deciding, per layer and
// direction, whether aggregation runs before the dense transform
// (aggr-first) or after it (comb-first), the least-squares fit of its
// coefficients, and the dataflow-graph rewrite that installs the decision
// point.
//
// A benefit is the estimated time an order saves. Aggr-first shrinks the
// rows entering the dense transform from n_src to n_dst; comb-first shrinks
// the width entering aggregation from n_feat to n_hid.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vcgnn/napa.hpp"

namespace vcgnn {

struct LayerDims {
  std::size_t n_src = 0;   // distinct source vertices
  std::size_t n_dst = 0;   // destinations (the layer's outputs)
  std::size_t n_edge = 0;
  std::size_t n_feat = 0;  // input width
  std::size_t n_hid = 0;   // output width

  // Throws InvalidArgumentError when a width or n_dst is zero.
  void validate() const;
  bool operator==(const LayerDims&) const = default;
};

enum class Direction { fwp, bwp };
enum class Order { aggr_first, comb_first };

const char* to_string(Direction d);
const char* to_string(Order o);

// (alpha, beta) for aggr-first pairs, (gamma, delta) for comb-first.
struct CoefficientPair {
  double first = 0.0;
  double second = 0.0;
  bool operator==(const CoefficientPair&) const = default;
};

struct DkpCoefficients {
  CoefficientPair fwp_aggr;
  CoefficientPair bwp_aggr;
  CoefficientPair fwp_comb;
  CoefficientPair bwp_comb;

  CoefficientPair& at(Direction d, Order o);
  const CoefficientPair& at(Direction d, Order o) const;

  // Coefficients measured for a discrete GPU; used when no fit is run.
  static DkpCoefficients gpu_defaults();
  bool operator==(const DkpCoefficients&) const = default;
};

struct Benefit {
  double aggr_first = 0.0;
  double comb_first = 0.0;
};

// The rows the aggr-first order removes from the dense side. In backward
// propagation of the first layer no input gradient is needed, so the whole
// n_src side is saved.
double reduction_factor(const LayerDims& dims, Direction dir, bool is_first_layer);

// The two regressors multiplying an order's coefficient pair.
std::array<double, 2> regressors(const LayerDims& dims, Direction dir, Order order,
                                 bool is_first_layer);

Benefit estimate_benefit(const LayerDims& dims, const DkpCoefficients& coeffs,
                         Direction dir, bool is_first_layer);

// Comb-first only when its benefit is strictly larger.
Order decide(const Benefit& b);

enum class DkpPolicy { on, off, force_aggr, force_comb };

const char* to_string(DkpPolicy p);
// Throws ConfigError on an unknown name.
DkpPolicy parse_dkp_policy(const std::string& name);

// The order a layer runs in. Ineligible layers always run aggr-first.
Order choose_order(DkpPolicy policy, bool eligible, const LayerDims& dims,
                   const DkpCoefficients& coeffs, Direction dir, bool is_first_layer);

struct FitSample {
  LayerDims dims;
  Order order = Order::aggr_first;
  Direction direction = Direction::fwp;
  bool is_first_layer = false;
  double seconds = 0.0;
};

// Ordinary least squares for one coefficient pair. Throws FittingError
// naming the regressor set when fewer than two samples are given or the
// regressors are linearly dependent. Negative estimates are clamped to 0 and
// reported through `warnings`.
CoefficientPair fit_pair(std::span<const FitSample> samples, Direction dir, Order order,
                         std::vector<std::string>* warnings = nullptr);

// Fits all four pairs; every pair needs its own samples.
DkpCoefficients fit_coefficients(std::span<const FitSample> samples,
                                 std::vector<std::string>* warnings = nullptr);

double predict_seconds(const FitSample& sample, const DkpCoefficients& coeffs);
// Mean of |predicted - measured| / measured over samples with measured > 0.
double mean_relative_error(std::span<const FitSample> samples, const DkpCoefficients& coeffs);

// Times the work each order eliminates at the given dims: the dense
// transform over the reduced rows for aggr-first, the aggregation at width
// n_feat - n_hid for comb-first. Reported time is the median of `reps`
// runs. Inputs are random with a fixed `seed`.
struct CalibrationOptions {
  int reps = 5;
  int threads = 1;
  std::uint64_t seed = 1;
};

std::vector<FitSample> measure_samples(std::span<const LayerDims> dims,
                                       const std::vector<bool>& is_first_layer,
                                       const CalibrationOptions& options = {});

// Dims at the given fractions of a layer's rows and edges, for a better
// conditioned fit than the observed layers alone.
std::vector<LayerDims> calibration_grid(std::span<const LayerDims> observed,
                                        std::span<const double> fractions);

// ---------------------------------------------------------------------------
// Dataflow graph.

enum class DfgKind { input, neighbor_apply, pull, matmul, bias_add, activation, cost_dkp };

const char* to_string(DfgKind k);

struct DfgNode {
  DfgKind kind = DfgKind::input;
  std::size_t layer = 0;            // 0-based GNN layer
  std::vector<std::size_t> inputs;  // node ids
  KernelModes modes;                // neighbor_apply, pull and cost_dkp
  // cost_dkp only: the two plans it can run, as node kinds in execution
  // order. Plans[0] is aggr-first.
  std::array<std::array<DfgKind, 2>, 2> plans{};
};

class Dfg {
 public:
  std::size_t add(DfgNode node);
  const std::vector<DfgNode>& nodes() const { return nodes_; }
  const DfgNode& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  std::size_t count(DfgKind kind) const;
  // Ids of nodes consuming `id`.
  std::vector<std::size_t> consumers(std::size_t id) const;
  // Kahn's algorithm; throws ConsistencyError on a cycle or dangling input.
  std::vector<std::size_t> topological_order() const;
  bool is_acyclic() const;

 private:
  std::vector<DfgNode> nodes_;
};

// A Pull feeding a MatMul with no other consumer, whose weighting commutes
// with the dense transform.
bool dkp_eligible(const Dfg& dfg, std::size_t pull_id);

// Replaces every eligible Pull -> MatMul pair by one CostDkp node that takes
// the Pull's inputs and feeds the MatMul's consumers. Other nodes keep their
// relative order; ids are renumbered densely.
Dfg rewrite_dfg(const Dfg& dfg);

}  // namespace vcgnn
