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

// Overlap of batch preprocessing with training compute: a producer thread
// prepares batch i+1 (and further, up to the slot count) while the caller
// trains on batch i. Batches are consumed strictly in order, so results do
// not depend on whether overlap is enabled.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "vcgnn/pipeline.hpp"

namespace vcgnn {

struct OverlapInterval {
  std::size_t batch = 0;
  bool preprocessing = false;  // false: compute
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
};

struct OverlapOptions {
  bool enabled = true;
  std::size_t slots = 2;  // prepared batches held at once; >= 2 when enabled
};

using ProduceFn = std::function<PreparedBatch(std::size_t batch)>;
using ConsumeFn = std::function<void(std::size_t batch, PreparedBatch& prepared)>;

// Runs produce(i) then consume(i, ...) for i in [0, n_batches). Exceptions
// from either side stop the other and are rethrown on the calling thread.
// Throws InvalidArgumentError when enabled with fewer than 2 slots.
std::vector<OverlapInterval> run_overlapped(std::size_t n_batches, const OverlapOptions& options,
                                            const ProduceFn& produce, const ConsumeFn& consume);

// True when some preprocessing interval of batch b + 1 intersects the
// compute interval of batch b.
bool preprocessing_overlaps_compute(const std::vector<OverlapInterval>& timeline,
                                    std::size_t b);

}  // namespace vcgnn
