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

#include "vcgnn/formats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "vcgnn/errors.hpp"

namespace vcgnn {
namespace {

constexpr std::uint64_t kMaxId = std::numeric_limits<VertexId>::max();

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw ConfigError("cannot open " + path + " for writing");
  }
  void magic(const char* m) { out_.write(m, 4); }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void close() {
    out_.close();
    if (!out_) throw ConfigError("write to " + path_ + " failed");
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  Reader(const std::string& path, const char* what) : in_(path, std::ios::binary), what_(what) {
    if (!in_) throw ConfigError("cannot open " + std::string(what) + " file " + path);
  }
  void magic(const char* m) {
    char buf[4] = {};
    in_.read(buf, 4);
    if (!in_ || std::memcmp(buf, m, 4) != 0) fail(std::string("bad magic, expected ") + m);
    auto version = uint<std::uint16_t>();
    if (version != kFormatVersion) fail("unsupported version " + std::to_string(version));
  }
  template <typename T>
  T uint() {
    unsigned char buf[sizeof(T)];
    in_.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in_) fail("truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  [[noreturn]] virtual void fail(const std::string& msg) {
    throw ConfigError(std::string(what_) + ": " + msg);
  }
  virtual ~Reader() = default;

 protected:
  std::ifstream in_;
  const char* what_;
};

class GraphReader : public Reader {
 public:
  using Reader::Reader;
  [[noreturn]] void fail(const std::string& msg) override {
    throw MalformedGraphError(std::string(what_) + ": " + msg);
  }
};

std::uint64_t parse_id(const std::string& tok, std::size_t line) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError("expected a decimal vertex id, got '" + tok + "'", line);
  }
  try {
    return std::stoull(tok);
  } catch (const std::exception&) {
    throw ParseError("vertex id '" + tok + "' out of range", line);
  }
}

}  // namespace

Coo read_edge_list(std::istream& in) {
  Coo coo;
  std::string text;
  std::size_t line = 0;
  std::uint64_t max_id = 0;
  bool any = false;
  while (std::getline(in, text)) {
    ++line;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    std::istringstream fields(text);
    std::string a, b, extra;
    fields >> a >> b;
    if (b.empty()) throw ParseError("expected 'src dst'", line);
    if (fields >> extra) throw ParseError("unexpected trailing field '" + extra + "'", line);
    const std::uint64_t s = parse_id(a, line);
    const std::uint64_t d = parse_id(b, line);
    if (s >= kMaxId || d >= kMaxId) {
      throw MalformedGraphError("line " + std::to_string(line) + ": vertex id exceeds 32-bit range");
    }
    coo.src.push_back(static_cast<VertexId>(s));
    coo.dst.push_back(static_cast<VertexId>(d));
    max_id = std::max({max_id, s, d});
    any = true;
  }
  coo.n_vertices = any ? max_id + 1 : 0;
  return coo;
}

Coo read_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open edge list " + path);
  return read_edge_list(in);
}

void write_graph(const std::string& path, const Coo& coo) {
  coo.validate();
  Writer w(path);
  w.magic("GTGR");
  w.uint<std::uint16_t>(kFormatVersion);
  w.uint<std::uint64_t>(coo.n_vertices);
  w.uint<std::uint64_t>(coo.n_edges());
  for (VertexId v : coo.src) w.uint<std::uint64_t>(v);
  for (VertexId v : coo.dst) w.uint<std::uint64_t>(v);
  w.close();
}

Coo read_graph(const std::string& path) {
  GraphReader r(path, "graph");
  r.magic("GTGR");
  const auto n = r.uint<std::uint64_t>();
  const auto m = r.uint<std::uint64_t>();
  if (n > kMaxId) r.fail("vertex count exceeds 32-bit range");
  if (m > (std::uint64_t{1} << 40)) r.fail("implausible edge count");
  Coo coo;
  coo.n_vertices = n;
  coo.src.resize(m);
  coo.dst.resize(m);
  for (auto* side : {&coo.src, &coo.dst}) {
    for (auto& v : *side) {
      const auto id = r.uint<std::uint64_t>();
      if (id >= n) r.fail("vertex id " + std::to_string(id) + " out of range");
      v = static_cast<VertexId>(id);
    }
  }
  return coo;
}

void write_embeddings(const std::string& path, const EmbeddingTable& table) {
  if (table.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeMismatchError("embedding width exceeds 32 bits");
  }
  Writer w(path);
  w.magic("GTEM");
  w.uint<std::uint16_t>(kFormatVersion);
  w.uint<std::uint64_t>(table.rows());
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(table.cols()));
  for (double v : table.data()) w.f32(static_cast<float>(v));
  w.close();
}

EmbeddingTable read_embeddings(const std::string& path) {
  Reader r(path, "embeddings");
  r.magic("GTEM");
  const auto n = r.uint<std::uint64_t>();
  const auto dim = r.uint<std::uint32_t>();
  if (n > kMaxId) r.fail("vertex count exceeds 32-bit range");
  EmbeddingTable t(n, dim);
  for (double& v : t.data()) {
    v = r.f32();
    if (!std::isfinite(v)) r.fail("non-finite embedding value");
  }
  return t;
}

std::vector<std::uint32_t> read_labels(const std::string& path, std::size_t n_vertices) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open labels " + path);
  std::vector<std::uint32_t> labels;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    std::istringstream fields(text);
    std::string tok;
    fields >> tok;
    const std::uint64_t y = parse_id(tok, line);
    if (y > std::numeric_limits<std::uint32_t>::max()) throw ParseError("label too large", line);
    labels.push_back(static_cast<std::uint32_t>(y));
  }
  if (labels.size() != n_vertices) {
    throw ConfigError("labels file has " + std::to_string(labels.size()) + " entries for " +
                      std::to_string(n_vertices) + " vertices");
  }
  return labels;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  Writer w(path);
  w.magic("GTCK");
  w.uint<std::uint16_t>(kFormatVersion);
  w.uint<std::uint64_t>(ckpt.next_step);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ckpt.kind));
  w.uint<std::uint64_t>(ckpt.model.n_layers());
  for (const auto& layer : ckpt.model.layers) {
    const auto& mlp = layer.mlp;
    w.uint<std::uint8_t>(mlp.activation == Activation::relu ? 1 : 0);
    w.uint<std::uint64_t>(mlp.weight.rows());
    w.uint<std::uint64_t>(mlp.weight.cols());
    for (double v : mlp.weight.data()) w.f64(v);
    w.uint<std::uint64_t>(mlp.bias.size());
    for (double v : mlp.bias) w.f64(v);
  }
  w.uint<std::uint8_t>(ckpt.coeffs ? 1 : 0);
  const DkpCoefficients c = ckpt.coeffs.value_or(DkpCoefficients{});
  for (const auto* p : {&c.fwp_aggr, &c.bwp_aggr, &c.fwp_comb, &c.bwp_comb}) {
    w.f64(p->first);
    w.f64(p->second);
  }
  w.close();
}

Checkpoint read_checkpoint(const std::string& path) {
  Reader r(path, "checkpoint");
  r.magic("GTCK");
  Checkpoint ck;
  ck.next_step = r.uint<std::uint64_t>();
  const auto kind = r.uint<std::uint32_t>();
  if (kind > static_cast<std::uint32_t>(ModelKind::ngcf_scalar)) r.fail("unknown model kind");
  ck.kind = static_cast<ModelKind>(kind);
  const auto n_layers = r.uint<std::uint64_t>();
  if (n_layers == 0 || n_layers > 64) r.fail("implausible layer count");
  for (std::uint64_t l = 0; l < n_layers; ++l) {
    GnnLayer layer;
    layer.modes = modes_for(ck.kind);
    layer.mlp.activation = r.uint<std::uint8_t>() ? Activation::relu : Activation::identity;
    const auto rows = r.uint<std::uint64_t>();
    const auto cols = r.uint<std::uint64_t>();
    if (rows * cols > (std::uint64_t{1} << 32)) r.fail("implausible weight shape");
    layer.mlp.weight = DenseMatrix(rows, cols);
    for (double& v : layer.mlp.weight.data()) v = r.f64();
    const auto nb = r.uint<std::uint64_t>();
    if (nb != cols) r.fail("bias length differs from weight columns");
    layer.mlp.bias.resize(nb);
    for (double& v : layer.mlp.bias) v = r.f64();
    ck.model.layers.push_back(std::move(layer));
  }
  const bool has = r.uint<std::uint8_t>() != 0;
  DkpCoefficients c;
  for (auto* p : {&c.fwp_aggr, &c.bwp_aggr, &c.fwp_comb, &c.bwp_comb}) {
    p->first = r.f64();
    p->second = r.f64();
  }
  if (has) ck.coeffs = c;
  try {
    ck.model.validate();
  } catch (const Error& e) {
    r.fail(std::string("inconsistent model: ") + e.what());
  }
  return ck;
}

}  // namespace vcgnn
