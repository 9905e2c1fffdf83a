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

// Times the parallel feature-wise kernels against the serial reference and
// the edge-wise and scatter baselines on a synthetic power-law graph. One
// JSON object per (kernel, implementation) on stdout.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcgnn/cli.hpp"
#include "vcgnn/napa.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double median_ms(int reps, F&& body) {
  body();
  std::vector<double> t;
  for (int i = 0; i < reps; ++i) {
    auto start = Clock::now();
    body();
    t.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());
  }
  std::nth_element(t.begin(), t.begin() + t.size() / 2, t.end());
  return t[t.size() / 2];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel_bench: feature-wise kernels vs serial reference and baselines"};
  std::size_t vertices = 20000;
  double degree = 10.0;
  std::size_t dim = 64;
  int threads = 1;
  int reps = 5;
  std::uint64_t seed = 7;
  app.add_option("--vertices", vertices, "graph vertices");
  app.add_option("--degree", degree, "average degree");
  app.add_option("--dim", dim, "feature width");
  app.add_option("--threads", threads, "worker partitions for the parallel kernels");
  app.add_option("--reps", reps, "timed repetitions (median reported)");
  app.add_option("--seed", seed, "random seed");
  CLI11_PARSE(app, argc, argv);

  using namespace vcgnn;
  Coo coo = synthetic_power_law_graph(vertices, degree, 2.1, seed);
  Csr csr = coo_to_csr(coo);
  Csc csc = coo_to_csc(coo);
  Coo ordered = csr_to_coo(csr);
  EmbeddingTable x = synthetic_embeddings(vertices, dim, seed);
  DenseMatrix grad = synthetic_embeddings(vertices, dim, seed + 1);
  const auto g = EdgeWeightFn::element_wise_product;
  const auto f = Aggregation::mean;
  const auto h = WeightApply::sum;

  auto report = [&](const std::string& kernel, const std::string& impl, double ms,
                    const KernelCounters& c) {
    nlohmann::json j = {{"kernel", kernel},
                        {"impl", impl},
                        {"ms", ms},
                        {"threads", threads},
                        {"vertices", vertices},
                        {"edges", csr.n_edges()},
                        {"dim", dim},
                        {"embedding_rows_loaded", c.embedding_rows_loaded},
                        {"dst_rows_loaded", c.dst_rows_loaded},
                        {"intermediate_rows_materialized", c.intermediate_rows_materialized}};
    std::cout << j.dump() << '\n';
  };

  KernelCounters c;
  KernelContext ctx{threads, nullptr};
  KernelContext counted{threads, &c};
  EdgeWeights w = neighbor_apply(csr, x, g, ctx);

  neighbor_apply(csr, x, g, counted);
  report("neighbor_apply", "napa", median_ms(reps, [&] { neighbor_apply(csr, x, g, ctx); }), c);
  report("neighbor_apply", "reference",
         median_ms(reps, [&] { reference::neighbor_apply(csr, x, g); }), {});
  c = {};
  sddmm_edgewise(ordered, x, g, counted);
  report("neighbor_apply", "edgewise", median_ms(reps, [&] { sddmm_edgewise(ordered, x, g, ctx); }), c);
  c = {};
  sddmm_scatter(ordered, x, g, counted);
  report("neighbor_apply", "scatter", median_ms(reps, [&] { sddmm_scatter(ordered, x, g, ctx); }), c);

  c = {};
  pull(csr, x, &w, f, h, counted);
  report("pull", "napa", median_ms(reps, [&] { pull(csr, x, &w, f, h, ctx); }), c);
  report("pull", "reference", median_ms(reps, [&] { reference::pull(csr, x, &w, f, h); }), {});
  c = {};
  spmm_edgewise(ordered, x, &w, f, h, counted);
  report("pull", "edgewise", median_ms(reps, [&] { spmm_edgewise(ordered, x, &w, f, h, ctx); }), c);
  c = {};
  spmm_scatter(ordered, x, &w, f, h, counted);
  report("pull", "scatter", median_ms(reps, [&] { spmm_scatter(ordered, x, &w, f, h, ctx); }), c);

  report("pull_backward", "napa",
         median_ms(reps, [&] { pull_backward(csr, csc, grad, &w, &x, f, h, true, ctx); }), {});
  report("pull_backward", "reference",
         median_ms(reps, [&] { reference::pull_backward(csr, grad, &w, &x, f, h); }), {});
  report("pull_backward", "edgewise",
         median_ms(reps, [&] { spmm_backward_edgewise(ordered, grad, &w, &x, f, h, true, ctx); }), {});
  report("pull_backward", "scatter",
         median_ms(reps, [&] { spmm_backward_scatter(ordered, grad, &w, &x, f, h, true, ctx); }), {});
  return 0;
}
