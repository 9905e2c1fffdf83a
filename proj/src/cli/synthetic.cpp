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
#include <cmath>
#include <numeric>

#include "vcgnn/cli.hpp"
#include "vcgnn/errors.hpp"
#include "vcgnn/rng.hpp"

namespace vcgnn {

Coo synthetic_power_law_graph(std::size_t n_vertices, double avg_degree, double exponent,
                              std::uint64_t seed) {
  if (n_vertices == 0) throw InvalidArgumentError("synthetic graph needs vertices");
  if (!(avg_degree >= 0.0) || !(exponent > 1.0)) {
    throw InvalidArgumentError("synthetic graph needs degree >= 0 and exponent > 1");
  }
  std::vector<double> cumulative(n_vertices);
  double total = 0.0;
  for (std::size_t i = 0; i < n_vertices; ++i) {
    total += std::pow(static_cast<double>(i + 1), -1.0 / (exponent - 1.0));
    cumulative[i] = total;
  }
  std::vector<VertexId> relabel(n_vertices);
  std::iota(relabel.begin(), relabel.end(), VertexId{0});
  auto perm_rng = CounterRng::stream(seed, 1, 0);
  for (std::size_t i = n_vertices; i > 1; --i) std::swap(relabel[i - 1], relabel[perm_rng.bounded(i)]);

  auto rng = CounterRng::stream(seed, 2, 0);
  auto draw = [&] {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto i = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - cumulative.begin(), static_cast<std::ptrdiff_t>(n_vertices) - 1));
    return relabel[i];
  };
  const auto m = static_cast<std::size_t>(std::llround(avg_degree * static_cast<double>(n_vertices)));
  Coo coo;
  coo.n_vertices = n_vertices;
  coo.src.reserve(m);
  coo.dst.reserve(m);
  for (std::size_t e = 0; e < m; ++e) {
    VertexId s = draw();
    VertexId d = draw();
    if (n_vertices > 1) {
      while (d == s) d = draw();
    }
    coo.src.push_back(s);
    coo.dst.push_back(d);
  }
  return coo;
}

EmbeddingTable synthetic_embeddings(std::size_t n_vertices, std::size_t dim, std::uint64_t seed) {
  EmbeddingTable t(n_vertices, dim);
  // One stream per row keeps generation cost independent of access order.
  for (std::size_t r = 0; r < n_vertices; ++r) {
    auto rng = CounterRng::stream(seed, 3, r);
    for (double& v : t.row(r)) v = rng.uniform(-1.0, 1.0);
  }
  return t;
}

}  // namespace vcgnn
