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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "vcgnn/dkp.hpp"
#include "vcgnn/errors.hpp"

namespace vcgnn {

void LayerDims::validate() const {
  if (n_feat == 0 || n_hid == 0) throw InvalidArgumentError("layer widths must be positive");
  if (n_dst == 0) throw InvalidArgumentError("layer has no destinations");
}

const char* to_string(Direction d) { return d == Direction::fwp ? "fwp" : "bwp"; }
const char* to_string(Order o) { return o == Order::aggr_first ? "aggr_first" : "comb_first"; }

CoefficientPair& DkpCoefficients::at(Direction d, Order o) {
  if (d == Direction::fwp) return o == Order::aggr_first ? fwp_aggr : fwp_comb;
  return o == Order::aggr_first ? bwp_aggr : bwp_comb;
}

const CoefficientPair& DkpCoefficients::at(Direction d, Order o) const {
  return const_cast<DkpCoefficients*>(this)->at(d, o);
}

DkpCoefficients DkpCoefficients::gpu_defaults() {
  DkpCoefficients c;
  c.fwp_aggr = {6e-5, 1e-5};
  c.bwp_aggr = {1e-7, 4e-6};
  c.fwp_comb = {1e-3, 1e-12};
  c.bwp_comb = {1e-6, 1e-8};
  return c;
}

double reduction_factor(const LayerDims& dims, Direction dir, bool is_first_layer) {
  if (dir == Direction::bwp && is_first_layer) return static_cast<double>(dims.n_src);
  return static_cast<double>(dims.n_src) - static_cast<double>(dims.n_dst);
}

std::array<double, 2> regressors(const LayerDims& dims, Direction dir, Order order,
                                 bool is_first_layer) {
  const double feat = static_cast<double>(dims.n_feat);
  const double hid = static_cast<double>(dims.n_hid);
  if (order == Order::aggr_first) {
    const double r = reduction_factor(dims, dir, is_first_layer);
    return {r * hid * feat, r * (dir == Direction::fwp ? hid : feat)};
  }
  const double w = feat - hid;
  const double rows = static_cast<double>(dir == Direction::fwp ? dims.n_dst : dims.n_src);
  return {w * static_cast<double>(dims.n_edge), w * rows};
}

Benefit estimate_benefit(const LayerDims& dims, const DkpCoefficients& coeffs,
                         Direction dir, bool is_first_layer) {
  Benefit b;
  for (Order o : {Order::aggr_first, Order::comb_first}) {
    const auto x = regressors(dims, dir, o, is_first_layer);
    const auto& c = coeffs.at(dir, o);
    const double v = c.first * x[0] + c.second * x[1];
    (o == Order::aggr_first ? b.aggr_first : b.comb_first) = v;
  }
  return b;
}

Order decide(const Benefit& b) {
  return b.comb_first > b.aggr_first ? Order::comb_first : Order::aggr_first;
}

const char* to_string(DkpPolicy p) {
  switch (p) {
    case DkpPolicy::on: return "on";
    case DkpPolicy::off: return "off";
    case DkpPolicy::force_aggr: return "force-aggr";
    case DkpPolicy::force_comb: return "force-comb";
  }
  return "?";
}

DkpPolicy parse_dkp_policy(const std::string& name) {
  if (name == "on") return DkpPolicy::on;
  if (name == "off") return DkpPolicy::off;
  if (name == "force-aggr") return DkpPolicy::force_aggr;
  if (name == "force-comb") return DkpPolicy::force_comb;
  throw ConfigError("unknown dkp mode '" + name + "' (expected on, off, force-aggr, force-comb)");
}

Order choose_order(DkpPolicy policy, bool eligible, const LayerDims& dims,
                   const DkpCoefficients& coeffs, Direction dir, bool is_first_layer) {
  if (!eligible) return Order::aggr_first;
  switch (policy) {
    case DkpPolicy::off:
    case DkpPolicy::force_aggr: return Order::aggr_first;
    case DkpPolicy::force_comb: return Order::comb_first;
    case DkpPolicy::on: break;
  }
  return decide(estimate_benefit(dims, coeffs, dir, is_first_layer));
}

namespace {

std::string pair_name(Direction d, Order o) {
  return std::string(to_string(d)) + "/" + to_string(o);
}

std::string regressor_set(Direction d, Order o) {
  if (o == Order::aggr_first) {
    return d == Direction::fwp ? "{r*n_hid*n_feat, r*n_hid}" : "{r*n_hid*n_feat, r*n_feat}";
  }
  return d == Direction::fwp ? "{(n_feat-n_hid)*n_edge, (n_feat-n_hid)*n_dst}"
                             : "{(n_feat-n_hid)*n_edge, (n_feat-n_hid)*n_src}";
}

}  // namespace

CoefficientPair fit_pair(std::span<const FitSample> samples, Direction dir, Order order,
                         std::vector<std::string>* warnings) {
  std::vector<const FitSample*> mine;
  for (const auto& s : samples) {
    if (s.direction == dir && s.order == order) mine.push_back(&s);
  }
  const std::string name = pair_name(dir, order);
  if (mine.size() < 2) {
    throw FittingError(name + ": need at least 2 samples for regressors " +
                       regressor_set(dir, order) + ", got " + std::to_string(mine.size()));
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(mine.size()), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(mine.size()));
  for (std::size_t i = 0; i < mine.size(); ++i) {
    const auto r = regressors(mine[i]->dims, dir, order, mine[i]->is_first_layer);
    x(static_cast<Eigen::Index>(i), 0) = r[0];
    x(static_cast<Eigen::Index>(i), 1) = r[1];
    y(static_cast<Eigen::Index>(i)) = mine[i]->seconds;
  }
  // Rows are weighted by 1/t so residuals are relative; timings span orders
  // of magnitude and plain residuals would fit only the largest shapes.
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) > 0.0) {
      x.row(i) /= y(i);
      y(i) = 1.0;
    }
  }
  // Regressors differ by orders of magnitude; scale columns to unit norm so
  // the rank test is meaningful.
  Eigen::Vector2d scale;
  for (int c = 0; c < 2; ++c) {
    const double n = x.col(c).norm();
    if (n == 0.0 || !std::isfinite(n)) {
      throw FittingError(name + ": regressor " + std::to_string(c) + " of " +
                         regressor_set(dir, order) + " is identically zero");
    }
    scale(c) = n;
    x.col(c) /= n;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) {
    throw FittingError(name + ": regressors " + regressor_set(dir, order) +
                       " are linearly dependent across the samples");
  }
  Eigen::Vector2d beta = qr.solve(y);
  CoefficientPair out{beta(0) / scale(0), beta(1) / scale(1)};
  for (double* c : {&out.first, &out.second}) {
    if (*c < 0.0) {
      if (warnings) {
        warnings->push_back(name + ": negative coefficient " + std::to_string(*c) +
                            " clamped to 0");
      }
      *c = 0.0;
    }
  }
  return out;
}

DkpCoefficients fit_coefficients(std::span<const FitSample> samples,
                                 std::vector<std::string>* warnings) {
  DkpCoefficients c;
  for (Direction d : {Direction::fwp, Direction::bwp}) {
    for (Order o : {Order::aggr_first, Order::comb_first}) {
      c.at(d, o) = fit_pair(samples, d, o, warnings);
    }
  }
  return c;
}

double predict_seconds(const FitSample& sample, const DkpCoefficients& coeffs) {
  const auto x = regressors(sample.dims, sample.direction, sample.order, sample.is_first_layer);
  const auto& c = coeffs.at(sample.direction, sample.order);
  return c.first * x[0] + c.second * x[1];
}

double mean_relative_error(std::span<const FitSample> samples, const DkpCoefficients& coeffs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    if (s.seconds <= 0.0) continue;
    sum += std::abs(predict_seconds(s, coeffs) - s.seconds) / s.seconds;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace vcgnn
