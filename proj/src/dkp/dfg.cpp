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

#include <algorithm>
#include <deque>
#include <string>

#include "vcgnn/dkp.hpp"
#include "vcgnn/errors.hpp"

namespace vcgnn {

const char* to_string(DfgKind k) {
  switch (k) {
    case DfgKind::input: return "Input";
    case DfgKind::neighbor_apply: return "NeighborApply";
    case DfgKind::pull: return "Pull";
    case DfgKind::matmul: return "MatMul";
    case DfgKind::bias_add: return "BiasAdd";
    case DfgKind::activation: return "Activation";
    case DfgKind::cost_dkp: return "CostDkp";
  }
  return "?";
}

std::size_t Dfg::add(DfgNode node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

std::size_t Dfg::count(DfgKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      nodes_.begin(), nodes_.end(), [&](const DfgNode& n) { return n.kind == kind; }));
}

std::vector<std::size_t> Dfg::consumers(std::size_t id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& in = nodes_[i].inputs;
    if (std::find(in.begin(), in.end(), id) != in.end()) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dfg::topological_order() const {
  const std::size_t n = nodes_.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> out_edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t src : nodes_[i].inputs) {
      if (src >= n) {
        throw ConsistencyError("dfg node " + std::to_string(i) + " reads missing node " +
                               std::to_string(src));
      }
      out_edges[src].push_back(i);
      ++indegree[i];
    }
  }
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::size_t v = ready.front();
    ready.pop_front();
    order.push_back(v);
    for (std::size_t w : out_edges[v]) {
      if (--indegree[w] == 0) ready.push_back(w);
    }
  }
  if (order.size() != n) throw ConsistencyError("dfg has a cycle");
  return order;
}

bool Dfg::is_acyclic() const {
  try {
    topological_order();
    return true;
  } catch (const ConsistencyError&) {
    return false;
  }
}

bool dkp_eligible(const Dfg& dfg, std::size_t pull_id) {
  const auto& pull = dfg.node(pull_id);
  if (pull.kind != DfgKind::pull) return false;
  auto users = dfg.consumers(pull_id);
  if (users.size() != 1 || dfg.node(users[0]).kind != DfgKind::matmul) return false;
  return pull.modes.commutes_with_dense_transform();
}

Dfg rewrite_dfg(const Dfg& dfg) {
  const std::size_t n = dfg.size();
  // absorbed_by[m] = pull id for a MatMul absorbed into a CostDkp.
  std::vector<std::size_t> absorbed_by(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (dkp_eligible(dfg, i)) absorbed_by[dfg.consumers(i)[0]] = i;
  }

  Dfg out;
  std::vector<std::size_t> new_id(n, n);
  auto remap = [&](std::size_t old) {
    if (new_id[old] == n) throw ConsistencyError("dfg input used before definition");
    return new_id[old];
  };
  // Keep the original order when it is already topological.
  std::vector<std::size_t> order(n);
  bool ordered = true;
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
    for (std::size_t in : dfg.node(i).inputs) ordered = ordered && in < i;
  }
  if (!ordered) order = dfg.topological_order();
  for (std::size_t i : order) {
    const DfgNode& node = dfg.node(i);
    const bool fused_pull =
        node.kind == DfgKind::pull &&
        std::find(absorbed_by.begin(), absorbed_by.end(), i) != absorbed_by.end();
    if (fused_pull) continue;  // emitted together with its MatMul
    DfgNode copy = node;
    if (absorbed_by[i] != n) {
      const DfgNode& pull = dfg.node(absorbed_by[i]);
      copy.kind = DfgKind::cost_dkp;
      copy.layer = pull.layer;
      copy.modes = pull.modes;
      copy.inputs = pull.inputs;
      // The MatMul's own inputs besides the Pull (none in our graphs) are
      // kept after the Pull's.
      for (std::size_t in : node.inputs) {
        if (in != absorbed_by[i]) copy.inputs.push_back(in);
      }
      copy.plans = {{{DfgKind::pull, DfgKind::matmul}, {DfgKind::matmul, DfgKind::pull}}};
    }
    for (auto& in : copy.inputs) in = remap(in);
    new_id[i] = out.add(std::move(copy));
  }
  return out;
}

}  // namespace vcgnn
