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

#pragma once

#include <cstdint>

namespace vcgnn {

// Work and traffic counters shared by the dense and sparse kernels. Every
// field is a plain count so values are identical across thread counts.
struct KernelCounters {
  // Embedding rows read by sparse kernels (source and destination rows).
  std::uint64_t embedding_rows_loaded = 0;
  // Subset of the above: destination rows only.
  std::uint64_t dst_rows_loaded = 0;
  // Rows of gathered per-edge tensors materialized by sparse-to-dense paths.
  std::uint64_t intermediate_rows_materialized = 0;
  // Multiply-adds spent in graph aggregation (Pull and its backward).
  std::uint64_t aggregation_macs = 0;
  // Multiply-adds spent in dense combination (matrix products).
  std::uint64_t combination_macs = 0;

  KernelCounters& operator+=(const KernelCounters& o) {
    embedding_rows_loaded += o.embedding_rows_loaded;
    dst_rows_loaded += o.dst_rows_loaded;
    intermediate_rows_materialized += o.intermediate_rows_materialized;
    aggregation_macs += o.aggregation_macs;
    combination_macs += o.combination_macs;
    return *this;
  }
  bool operator==(const KernelCounters&) const = default;
};

}  // namespace vcgnn
