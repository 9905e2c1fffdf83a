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

#include "vcgnn/overlap.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

namespace vcgnn {
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
}

}  // namespace

std::vector<OverlapInterval> run_overlapped(std::size_t n_batches, const OverlapOptions& options,
                                            const ProduceFn& produce, const ConsumeFn& consume) {
  std::vector<OverlapInterval> timeline;
  const auto t0 = Clock::now();
  std::mutex timeline_mu;
  auto timed = [&](std::size_t b, bool pre, auto&& body) {
    OverlapInterval iv{b, pre, since(t0), 0};
    body();
    iv.end_ns = since(t0);
    std::lock_guard lock(timeline_mu);
    timeline.push_back(iv);
  };

  if (!options.enabled || n_batches <= 1) {
    for (std::size_t b = 0; b < n_batches; ++b) {
      PreparedBatch prepared;
      timed(b, true, [&] { prepared = produce(b); });
      timed(b, false, [&] { consume(b, prepared); });
    }
    return timeline;
  }
  if (options.slots < 2) throw InvalidArgumentError("overlap needs at least 2 batch slots");

  std::mutex mu;
  std::condition_variable cv;
  std::deque<PreparedBatch> queue;
  bool stop = false;
  bool producer_done = false;
  std::exception_ptr producer_error;

  std::thread producer([&] {
    for (std::size_t b = 0; b < n_batches; ++b) {
      {
        std::unique_lock lock(mu);
        // One slot is held by the batch being trained on.
        cv.wait(lock, [&] { return stop || queue.size() + 1 < options.slots; });
        if (stop) break;
      }
      PreparedBatch prepared;
      try {
        timed(b, true, [&] { prepared = produce(b); });
      } catch (...) {
        std::lock_guard lock(mu);
        producer_error = std::current_exception();
        break;
      }
      std::lock_guard lock(mu);
      queue.push_back(std::move(prepared));
      cv.notify_all();
    }
    std::lock_guard lock(mu);
    producer_done = true;
    cv.notify_all();
  });

  std::exception_ptr consumer_error;
  for (std::size_t b = 0; b < n_batches; ++b) {
    std::optional<PreparedBatch> prepared;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return !queue.empty() || producer_done; });
      if (queue.empty()) break;  // producer failed
      prepared.emplace(std::move(queue.front()));
      queue.pop_front();
      cv.notify_all();
    }
    try {
      timed(b, false, [&] { consume(b, *prepared); });
    } catch (...) {
      consumer_error = std::current_exception();
      std::lock_guard lock(mu);
      stop = true;
      cv.notify_all();
      break;
    }
  }
  producer.join();
  if (consumer_error) std::rethrow_exception(consumer_error);
  if (producer_error) std::rethrow_exception(producer_error);
  return timeline;
}

bool preprocessing_overlaps_compute(const std::vector<OverlapInterval>& timeline,
                                    std::size_t b) {
  for (const auto& c : timeline) {
    if (c.preprocessing || c.batch != b) continue;
    for (const auto& p : timeline) {
      if (!p.preprocessing || p.batch != b + 1) continue;
      if (p.start_ns < c.end_ns && c.start_ns < p.end_ns) return true;
    }
  }
  return false;
}

}  // namespace vcgnn
