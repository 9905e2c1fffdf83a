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

// On-disk formats.
//
//   edge list   one "src dst" pair of decimal ids per line; '#' starts a
//               comment line; blank lines are skipped
//   GTGR        "GTGR", u16 version, u64 n_vertices, u64 n_edges,
//               u64 src[n_edges], u64 dst[n_edges]
//   GTEM        "GTEM", u16 version, u64 n_vertices, u32 dim,
//               f32 values[n_vertices * dim] row-major
//   GTCK        "GTCK", u16 version, u64 next_step, u32 model kind,
//               u64 n_layers, per layer: u8 activation, u64 rows, u64 cols,
//               f64 W[rows * cols], u64 n_bias, f64 b[n_bias];
//               u8 has_coeffs, then 8 f64 cost-model coefficients
//   labels      one class index per line, line i is vertex i
//
// All binary integers and floats are little-endian.

#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "vcgnn/dkp.hpp"
#include "vcgnn/graph_store.hpp"
#include "vcgnn/models.hpp"
#include "vcgnn/tensor.hpp"

namespace vcgnn {

inline constexpr std::uint16_t kFormatVersion = 1;

// n_vertices is one past the largest id seen. Throws ParseError naming the
// line, MalformedGraphError for ids beyond the 32-bit range.
Coo read_edge_list(std::istream& in);
Coo read_edge_list_file(const std::string& path);

void write_graph(const std::string& path, const Coo& coo);
// Throws MalformedGraphError for a bad header, truncation or ids that do not
// fit in 32 bits.
Coo read_graph(const std::string& path);

void write_embeddings(const std::string& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings(const std::string& path);

std::vector<std::uint32_t> read_labels(const std::string& path, std::size_t n_vertices);

struct Checkpoint {
  ModelKind kind = ModelKind::gcn;
  GnnModel model;
  std::size_t next_step = 0;
  std::optional<DkpCoefficients> coeffs;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws ConfigError for a missing file or bad header.
Checkpoint read_checkpoint(const std::string& path);

}  // namespace vcgnn
