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

// Command-line harness: run configuration, synthetic datasets and the
// convert / prep / train / bench subcommands.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "vcgnn/graph_store.hpp"
#include "vcgnn/tensor.hpp"
#include "vcgnn/trainer.hpp"

namespace vcgnn {

struct RunConfig {
  std::string command;

  // Dataset. Without --graph a synthetic power-law graph is generated.
  std::string graph_path;       // GTGR or edge list (by extension .txt/.el/.edges)
  std::string embeddings_path;  // GTEM; otherwise seeded uniform features
  std::string labels_path;      // otherwise hash(vid) mod classes
  std::size_t synthetic_vertices = 2000;
  double synthetic_degree = 8.0;
  double synthetic_exponent = 2.1;
  std::size_t features_dim = 64;
  std::size_t classes = 8;

  std::string model = "gcn";
  std::size_t layers = 2;
  std::vector<std::size_t> fanouts{10, 10};
  std::size_t batch_size = 300;
  std::size_t hidden = 64;
  double learning_rate = 0.01;
  std::size_t epochs = 1;
  std::size_t steps = 0;  // steps per epoch; 0 = full pass
  int threads = 1;
  std::string dkp = "on";
  std::string pipeline = "parallel";
  std::string backend = "napa";
  std::uint64_t seed = 0;
  std::size_t chunk_rows = 1024;
  bool overlap = false;
  bool contended = false;
  std::size_t batches = 1;  // prep

  std::string out;         // metrics (JSON lines); empty = stdout
  std::string trace_path;  // schedule trace (JSON lines)
  std::string checkpoint;  // train: where to write the final checkpoint
  std::string resume;      // train: checkpoint to resume from
  std::string input;       // convert: edge list to read

  // Throws ConfigError naming the offending field.
  void validate() const;
  TrainConfig train_config() const;
};

// Applies one key=value setting. Keys match the long flag names without the
// leading dashes. Throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Flat key=value lines; '#' comments and blank lines ignored.
std::map<std::string, std::string> read_config_file(const std::string& path);

// Chung-Lu style graph with power-law expected degrees; ids are shuffled so
// hubs are not clustered at low ids.
Coo synthetic_power_law_graph(std::size_t n_vertices, double avg_degree, double exponent,
                              std::uint64_t seed);
EmbeddingTable synthetic_embeddings(std::size_t n_vertices, std::size_t dim, std::uint64_t seed);

struct LoadedData {
  Csr graph;
  EmbeddingTable embeddings;
  std::vector<std::uint32_t> labels;
};

LoadedData load_dataset(const RunConfig& cfg);

// Entry point of the vcgnn binary. Returns the process exit code; errors are
// reported on `err`.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace vcgnn
