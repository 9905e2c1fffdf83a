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
#include <fstream>
#include <sstream>

#include "vcgnn/cli.hpp"
#include "vcgnn/errors.hpp"
#include "vcgnn/formats.hpp"

namespace vcgnn {
namespace {

std::size_t to_count(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": value '" + v + "' out of range");
  }
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_count(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool is_text_graph(const std::string& path) {
  for (const char* ext : {".txt", ".el", ".edges", ".tsv"}) {
    const std::string e(ext);
    if (path.size() >= e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0) {
      return true;
    }
  }
  return false;
}

}  // namespace

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "graph") c.graph_path = value;
  else if (key == "embeddings") c.embeddings_path = value;
  else if (key == "labels") c.labels_path = value;
  else if (key == "vertices") c.synthetic_vertices = to_count(key, value);
  else if (key == "degree") c.synthetic_degree = to_real(key, value);
  else if (key == "exponent") c.synthetic_exponent = to_real(key, value);
  else if (key == "features-dim") c.features_dim = to_count(key, value);
  else if (key == "classes") c.classes = to_count(key, value);
  else if (key == "model") c.model = value;
  else if (key == "layers") c.layers = to_count(key, value);
  else if (key == "fanout") c.fanouts = to_list(key, value);
  else if (key == "batch-size") c.batch_size = to_count(key, value);
  else if (key == "hidden") c.hidden = to_count(key, value);
  else if (key == "lr") c.learning_rate = to_real(key, value);
  else if (key == "epochs") c.epochs = to_count(key, value);
  else if (key == "steps") c.steps = to_count(key, value);
  else if (key == "threads") c.threads = static_cast<int>(to_count(key, value));
  else if (key == "dkp") c.dkp = value;
  else if (key == "pipeline") c.pipeline = value;
  else if (key == "backend") c.backend = value;
  else if (key == "seed") c.seed = to_count(key, value);
  else if (key == "chunk-rows") c.chunk_rows = to_count(key, value);
  else if (key == "overlap") c.overlap = to_bool(key, value);
  else if (key == "contended") c.contended = to_bool(key, value);
  else if (key == "batches") c.batches = to_count(key, value);
  else if (key == "out") c.out = value;
  else if (key == "trace") c.trace_path = value;
  else if (key == "checkpoint") c.checkpoint = value;
  else if (key == "resume") c.resume = value;
  else if (key == "input") c.input = value;
  else throw ConfigError("unknown setting '" + key + "'");
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::map<std::string, std::string> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    const std::string t = trim(text);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line);
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line);
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

void RunConfig::validate() const {
  parse_model_kind(model);
  parse_dkp_policy(dkp);
  parse_pipeline_mode(pipeline);
  parse_backend(backend);
  if (layers == 0) throw ConfigError("layers must be positive");
  if (fanouts.size() != 1 && fanouts.size() != layers) {
    throw ConfigError("fanout needs 1 or " + std::to_string(layers) + " values");
  }
  if (std::find(fanouts.begin(), fanouts.end(), 0) != fanouts.end()) {
    throw ConfigError("fanout values must be positive");
  }
  if (batch_size == 0) throw ConfigError("batch-size must be positive");
  if (hidden == 0) throw ConfigError("hidden must be positive");
  if (features_dim == 0) throw ConfigError("features-dim must be positive");
  if (classes == 0) throw ConfigError("classes must be positive");
  if (threads < 1) throw ConfigError("threads must be positive");
  if (chunk_rows == 0) throw ConfigError("chunk-rows must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("lr must be non-negative");
  if (graph_path.empty() && synthetic_vertices == 0) throw ConfigError("vertices must be positive");
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.model = parse_model_kind(model);
  t.n_layers = layers;
  t.hidden_dim = hidden;
  t.batch_size = batch_size;
  t.fanouts = fanouts.size() == 1 ? std::vector<std::size_t>(layers, fanouts[0]) : fanouts;
  t.learning_rate = learning_rate;
  t.epochs = epochs;
  t.steps_per_epoch = steps;
  t.seed = seed;
  t.threads = threads;
  t.backend = parse_backend(backend);
  t.dkp = parse_dkp_policy(dkp);
  t.pipeline = parse_pipeline_mode(pipeline);
  t.chunk_rows = chunk_rows;
  t.overlap = overlap;
  return t;
}

LoadedData load_dataset(const RunConfig& cfg) {
  Coo coo;
  if (cfg.graph_path.empty()) {
    coo = synthetic_power_law_graph(cfg.synthetic_vertices, cfg.synthetic_degree,
                                    cfg.synthetic_exponent, cfg.seed);
  } else if (is_text_graph(cfg.graph_path)) {
    coo = read_edge_list_file(cfg.graph_path);
  } else {
    coo = read_graph(cfg.graph_path);
  }
  if (coo.n_vertices == 0) throw EmptyGraphError("dataset graph has no vertices");
  LoadedData d;
  d.graph = coo_to_csr(coo);
  if (cfg.embeddings_path.empty()) {
    d.embeddings = synthetic_embeddings(coo.n_vertices, cfg.features_dim, cfg.seed);
  } else {
    d.embeddings = read_embeddings(cfg.embeddings_path);
    if (d.embeddings.rows() != coo.n_vertices) {
      throw ShapeMismatchError("embeddings have " + std::to_string(d.embeddings.rows()) +
                               " rows for " + std::to_string(coo.n_vertices) + " vertices");
    }
  }
  d.labels = cfg.labels_path.empty() ? synthetic_labels(coo.n_vertices, cfg.classes)
                                     : read_labels(cfg.labels_path, coo.n_vertices);
  for (auto y : d.labels) {
    if (y >= cfg.classes) {
      throw ConfigError("label " + std::to_string(y) + " needs classes > " + std::to_string(y));
    }
  }
  return d;
}

}  // namespace vcgnn
