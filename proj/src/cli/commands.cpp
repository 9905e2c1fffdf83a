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

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include <json.hpp>

#include "vcgnn/cli.hpp"
#include "vcgnn/errors.hpp"
#include "vcgnn/formats.hpp"
#include "vcgnn/pipeline.hpp"

namespace vcgnn {
namespace {

using nlohmann::json;

json counters_json(const KernelCounters& c) {
  return {{"embedding_rows_loaded", c.embedding_rows_loaded},
          {"dst_rows_loaded", c.dst_rows_loaded},
          {"intermediate_rows_materialized", c.intermediate_rows_materialized},
          {"aggregation_macs", c.aggregation_macs},
          {"combination_macs", c.combination_macs}};
}

json phase_json(const PhaseRecord& r) {
  json j = {{"type", "phase"},
            {"phase", r.phase},
            {"epoch", r.epoch},
            {"batch", r.step},
            {"wall_ns", r.wall_ns},
            {"counters", counters_json(r.counters)},
            {"bytes_transferred", r.bytes_transferred},
            {"translations", r.translations}};
  if (r.loss) j["loss"] = *r.loss;
  if (r.logits_sum) j["logits_sum"] = *r.logits_sum;
  return j;
}

json coeffs_json(const DkpCoefficients& c) {
  auto pair = [](const CoefficientPair& p) { return json::array({p.first, p.second}); };
  return {{"fwp_aggr_first", pair(c.fwp_aggr)},
          {"bwp_aggr_first", pair(c.bwp_aggr)},
          {"fwp_comb_first", pair(c.fwp_comb)},
          {"bwp_comb_first", pair(c.bwp_comb)}};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Metrics go to --out when given, else to the command's stdout.
class MetricsStream {
 public:
  MetricsStream(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ConfigError("cannot open metrics output " + path);
      os_ = file_.get();
    }
  }
  void write(const json& j) { *os_ << j.dump() << '\n'; }
  void flush() {
    os_->flush();
    if (!*os_) throw ConfigError("writing metrics failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

void write_trace_lines(std::ostream& os, const ScheduleTrace& trace, std::size_t batch) {
  for (const auto& r : trace.records) {
    std::string kind = to_string(r.kind);
    if (r.kind == SubtaskKind::t) kind += r.payload == Payload::graph ? "_graph" : "_emb";
    os << json{{"batch", batch},         {"kind", kind},
               {"layer", r.layer},       {"start_ns", r.start_ns},
               {"end_ns", r.end_ns},     {"worker", r.worker}}
              .dump()
       << '\n';
  }
}

std::unique_ptr<std::ofstream> open_trace(const RunConfig& cfg) {
  if (cfg.trace_path.empty()) return nullptr;
  auto f = std::make_unique<std::ofstream>(cfg.trace_path);
  if (!*f) throw ConfigError("cannot open trace output " + cfg.trace_path);
  return f;
}

Dataset make_dataset(const LoadedData& d, const RunConfig& cfg) {
  Dataset ds;
  ds.graph = &d.graph;
  ds.embeddings = &d.embeddings;
  ds.labels = d.labels;
  ds.n_classes = cfg.classes;
  return ds;
}

int cmd_convert(const RunConfig& cfg, std::ostream& out) {
  if (cfg.input.empty()) throw ConfigError("convert needs an input edge list");
  if (cfg.out.empty()) throw ConfigError("convert needs --out");
  Coo coo = read_edge_list_file(cfg.input);
  write_graph(cfg.out, coo);
  out << json{{"type", "convert"},
              {"vertices", coo.n_vertices},
              {"edges", coo.n_edges()},
              {"out", cfg.out}}
             .dump()
      << '\n';
  return 0;
}

int cmd_prep(const RunConfig& cfg, std::ostream& out) {
  LoadedData data = load_dataset(cfg);
  const TrainConfig tc = cfg.train_config();
  Dataset ds = make_dataset(data, cfg);
  const TaskDag dag = build_task_dag(tc.n_layers, tc.pipeline, cfg.contended);
  MetricsStream metrics(cfg.out, out);
  auto trace_file = open_trace(cfg);
  const std::size_t spe = steps_per_epoch(ds, tc);
  for (std::size_t b = 0; b < cfg.batches; ++b) {
    PipelineInputs in;
    in.graph = &data.graph;
    in.embeddings = &data.embeddings;
    in.batch = batch_vertices(ds, tc, b / spe, b % spe);
    in.fanouts = tc.fanouts;
    in.seed = step_seed(tc.seed, b);
    in.chunk_rows = tc.chunk_rows;
    PipelineResult pr = run_pipeline(dag, tc.threads, in);
    const auto violations = validate_trace(dag, pr.trace);
    json edges = json::array();
    for (const auto& l : pr.batch.layers) edges.push_back(l.csr.n_edges());
    std::map<std::string, std::int64_t> wall;
    for (const auto& r : pr.trace.records) {
      const bool sampling = r.kind == SubtaskKind::s_algo || r.kind == SubtaskKind::s_hash;
      wall[sampling ? "S" : to_string(r.kind)] += r.end_ns - r.start_ns;
    }
    for (const char* phase : {"S", "R", "K", "T"}) {
      PhaseRecord rec;
      rec.phase = phase;
      rec.step = b;
      rec.wall_ns = wall[phase];
      if (rec.phase == "T") {
        rec.bytes_transferred = pr.batch.graph_transfer.bytes + pr.batch.embedding_transfer.bytes;
      }
      metrics.write(phase_json(rec));
    }
    metrics.write({{"type", "batch"},
                   {"batch", b},
                   {"mode", to_string(tc.pipeline)},
                   {"workers", tc.threads},
                   {"vertices", pr.batch.n_vertices()},
                   {"edges", edges},
                   {"digest", hex64(pr.batch.digest())},
                   {"wall_ns", pr.trace.wall_ns},
                   {"exclusion_wait_ns", pr.trace.exclusion_wait_ns},
                   {"lock_wait_ns", pr.trace.lock_wait_ns},
                   {"embedding_bytes", pr.batch.embedding_transfer.bytes},
                   {"embedding_chunks", pr.batch.embedding_transfer.chunks},
                   {"graph_bytes", pr.batch.graph_transfer.bytes},
                   {"trace_violations", violations.size()}});
    if (trace_file) write_trace_lines(*trace_file, pr.trace, b);
    if (!violations.empty()) throw ConsistencyError("schedule trace violation: " + violations[0]);
  }
  metrics.flush();
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, bool bench) {
  LoadedData data = load_dataset(cfg);
  TrainConfig tc = cfg.train_config();
  Dataset ds = make_dataset(data, cfg);

  const ModelKind kind = tc.model;
  GnnModel model;
  if (!cfg.resume.empty()) {
    Checkpoint ck = read_checkpoint(cfg.resume);
    if (ck.kind != kind) throw ConfigError("checkpoint holds a different model kind");
    model = std::move(ck.model);
    tc.start_step = ck.next_step;
    tc.coeffs = ck.coeffs;
    if (model.n_layers() != tc.n_layers) throw ConfigError("checkpoint layer count differs");
  } else {
    model = make_model(kind, data.embeddings.cols(), tc.hidden_dim, cfg.classes, tc.n_layers,
                       tc.seed);
  }

  MetricsStream metrics(cfg.out, out);
  TrainResult result = train(model, ds, tc, [&](const PhaseRecord& r) { metrics.write(phase_json(r)); });

  json dkp = {{"type", "dkp"},
              {"policy", to_string(tc.dkp)},
              {"fitted", result.fitted},
              {"coefficients", coeffs_json(result.coeffs)},
              {"fit_samples", result.fit_samples.size()},
              {"warnings", result.warnings}};
  if (result.fitted) dkp["fit_error"] = result.fit_error;
  metrics.write(dkp);

  if (auto trace_file = open_trace(cfg)) {
    for (std::size_t i = 0; i < result.traces.size(); ++i) {
      write_trace_lines(*trace_file, result.traces[i], tc.start_step + i);
    }
  }
  json summary = {{"type", "summary"},
                  {"command", bench ? "bench" : "train"},
                  {"model", to_string(kind)},
                  {"backend", to_string(tc.backend)},
                  {"steps", result.steps.size()},
                  {"next_step", result.next_step},
                  {"translations", result.translations}};
  if (!result.steps.empty()) summary["final_loss"] = result.steps.back().loss;
  metrics.write(summary);
  metrics.flush();

  if (!bench && !cfg.checkpoint.empty()) {
    Checkpoint ck;
    ck.kind = kind;
    ck.model = result.model;
    ck.next_step = result.next_step;
    if (result.fitted || tc.coeffs) ck.coeffs = result.coeffs;
    write_checkpoint(cfg.checkpoint, ck);
  }
  return 0;
}

struct Flag {
  std::string key;
  std::string help;
  bool boolean = false;
};

const std::vector<Flag>& flags() {
  static const std::vector<Flag> f = {
      {"graph", "graph file (GTGR, or edge list with .txt/.el/.edges)"},
      {"embeddings", "embedding table (GTEM)"},
      {"labels", "labels file, one class per line"},
      {"vertices", "synthetic graph vertex count"},
      {"degree", "synthetic graph average degree"},
      {"exponent", "synthetic graph power-law exponent"},
      {"features-dim", "synthetic feature width"},
      {"classes", "number of classes"},
      {"model", "gcn | ngcf | ngcf-scalar"},
      {"layers", "GNN layers"},
      {"fanout", "neighbors per layer, comma separated from layer 1 (one value: all)"},
      {"batch-size", "vertices per batch"},
      {"hidden", "hidden width"},
      {"lr", "SGD learning rate"},
      {"epochs", "training epochs"},
      {"steps", "steps per epoch (0: full pass)"},
      {"threads", "worker threads"},
      {"dkp", "on | off | force-aggr | force-comb"},
      {"pipeline", "serial | parallel | pipelined"},
      {"backend", "napa | edgewise | scatter"},
      {"seed", "random seed"},
      {"chunk-rows", "rows per pipelined transfer chunk"},
      {"batches", "batches to prepare (prep)"},
      {"out", "output path (metrics, or the GTGR file for convert)"},
      {"trace", "schedule trace output (JSON lines)"},
      {"checkpoint", "checkpoint to write after training"},
      {"resume", "checkpoint to resume from"},
      {"overlap", "overlap preprocessing with compute", true},
      {"contended", "share a locked vid table instead of serializing (benchmark only)", true},
  };
  return f;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"vcgnn: CPU GNN training engine and preprocessing benchmark"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::string input;

  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"convert", "convert an edge list to the binary graph format"},
           {"prep", "run preprocessing only and report batch digests"},
           {"train", "train a model"},
           {"bench", "train and report the per-phase breakdown"}}) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key=value config file");
    for (const auto& f : flags()) {
      if (f.boolean) {
        sub->add_flag("--" + f.key, switches[f.key], f.help);
      } else {
        sub->add_option("--" + f.key, values[f.key], f.help);
      }
    }
    if (name == "convert") sub->add_option("input", input, "edge list to convert");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    RunConfig cfg;
    for (CLI::App* sub : subs) {
      if (sub->parsed()) cfg.command = sub->get_name();
    }
    CLI::App* sub = app.get_subcommand(cfg.command);
    if (!config_path.empty()) {
      for (const auto& [k, v] : read_config_file(config_path)) apply_setting(cfg, k, v);
    }
    for (const auto& f : flags()) {
      if (sub->count("--" + f.key) == 0) continue;
      apply_setting(cfg, f.key, f.boolean ? "true" : values[f.key]);
    }
    if (!input.empty()) cfg.input = input;
    cfg.validate();
    if (cfg.command == "convert") return cmd_convert(cfg, out);
    if (cfg.command == "prep") return cmd_prep(cfg, out);
    if (cfg.command == "train") return cmd_train(cfg, out, false);
    return cmd_train(cfg, out, true);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace vcgnn
