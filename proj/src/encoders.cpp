/*
 * Copyright 2026 The PAN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pan/encoders.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "pan/errors.hpp"
#include "pan/io.hpp"

namespace pan {

SimilarityGraph::SimilarityGraph(std::size_t n, std::vector<ItemPair> edges) : n_(n) {
  for (auto& [i, j] : edges) {
    if (i >= n || j >= n) {
      throw IndexError("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") out of range for " + std::to_string(n) + " nodes");
    }
    if (i == j) throw ContractError("self-edge on node " + std::to_string(i));
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);
}

bool SimilarityGraph::hasEdge(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges_.begin(), edges_.end(), ItemPair{i, j});
}

std::vector<std::size_t> SimilarityGraph::degrees() const {
  std::vector<std::size_t> deg(n_, 0);
  for (const auto& [i, j] : edges_) {
    ++deg[i];
    ++deg[j];
  }
  return deg;
}

SimilarityGraph SimilarityGraph::clique(std::size_t n, std::span<const std::size_t> nodes) {
  std::vector<ItemPair> edges;
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b)
      if (nodes[a] != nodes[b]) edges.emplace_back(nodes[a], nodes[b]);
  return SimilarityGraph(n, std::move(edges));
}

SimilarityGraph SimilarityGraph::induced(std::span<const std::size_t> nodes) const {
  std::vector<std::size_t> local(n_, SIZE_MAX);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] >= n_) throw IndexError("induced: node " + std::to_string(nodes[k]) + " out of range");
    local[nodes[k]] = k;
  }
  std::vector<ItemPair> edges;
  for (const auto& [i, j] : edges_) {
    if (local[i] != SIZE_MAX && local[j] != SIZE_MAX) edges.emplace_back(local[i], local[j]);
  }
  return SimilarityGraph(nodes.size(), std::move(edges));
}

Matrix normalizeAdjacency(const SimilarityGraph& g) {
  const std::size_t n = g.n();
  const auto deg = g.degrees();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0 / static_cast<double>(deg[i] + 1);
  for (const auto& [i, j] : g.edges()) {
    const double v = 1.0 / std::sqrt(static_cast<double>(deg[i] + 1) * static_cast<double>(deg[j] + 1));
    a(i, j) = v;
    a(j, i) = v;
  }
  return a;
}

SimilarityGraph dropEdges(const SimilarityGraph& g, double p, Engine& engine) {
  if (!(p >= 0.0 && p < 1.0)) throw ContractError("edge dropout must be in [0, 1)");
  std::vector<ItemPair> kept;
  kept.reserve(g.edgeCount());
  for (const auto& e : g.edges()) {
    if (uniformUnit(engine) >= p) kept.push_back(e);
  }
  return SimilarityGraph(g.n(), std::move(kept));
}

SimilarityGraph dropEdges(const SimilarityGraph& g, double p, std::uint64_t seed) {
  Engine engine = makeEngine(seed, "encoder.edge-dropout");
  return dropEdges(g, p, engine);
}

EncoderKind parseEncoderKind(const std::string& text) {
  if (text == "identity") return EncoderKind::kIdentity;
  if (text == "mlp") return EncoderKind::kMlp;
  if (text == "gcn") return EncoderKind::kGcn;
  throw ParseError("unknown encoder '" + text + "'");
}

std::string toString(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kIdentity:
      return "identity";
    case EncoderKind::kMlp:
      return "mlp";
    case EncoderKind::kGcn:
      return "gcn";
  }
  return "identity";
}

Activation parseActivation(const std::string& text) {
  if (text == "relu") return Activation::kRelu;
  if (text == "linear") return Activation::kLinear;
  throw ParseError("unknown activation '" + text + "'");
}

std::string toString(Activation a) { return a == Activation::kRelu ? "relu" : "linear"; }

void EncoderSpec::validate() const {
  if (!(layer_dropout_p >= 0.0 && layer_dropout_p < 1.0)) {
    throw ContractError("layer dropout must be in [0, 1)");
  }
  if (!(edge_dropout_p >= 0.0 && edge_dropout_p < 1.0)) {
    throw ContractError("edge dropout must be in [0, 1)");
  }
  if (kind == EncoderKind::kMlp) {
    if (layer_dims.empty()) throw ContractError("mlp encoder needs at least one layer");
    for (auto w : layer_dims)
      if (w < 1) throw ContractError("mlp layer width must be >= 1");
  }
  if (kind == EncoderKind::kGcn) {
    if (num_layers < 1) throw ContractError("gcn needs at least one layer");
    if (hidden_dim < 1) throw ContractError("gcn hidden width must be >= 1");
  }
}

std::size_t EncoderSpec::outputDim(std::size_t input_dim) const {
  switch (kind) {
    case EncoderKind::kIdentity:
      return input_dim;
    case EncoderKind::kMlp:
      return layer_dims.back();
    case EncoderKind::kGcn:
      return hidden_dim;
  }
  return input_dim;
}

namespace {

std::vector<std::size_t> layerWidths(const EncoderSpec& spec) {
  if (spec.kind == EncoderKind::kMlp) return spec.layer_dims;
  if (spec.kind == EncoderKind::kGcn) return std::vector<std::size_t>(spec.num_layers, spec.hidden_dim);
  return {};
}

ad::Var applyDropout(ad::Var h, double p, Engine* engine) {
  if (engine == nullptr || p == 0.0) return h;
  const Matrix& v = h.value();
  Matrix keep(v.rows(), v.cols());
  const double scale = 1.0 / (1.0 - p);
  for (double& k : keep.data()) k = uniformUnit(*engine) >= p ? scale : 0.0;
  return ad::multiply(h, h.tape().constant(std::move(keep)));
}

}  // namespace

ad::ParameterList initEncoder(const EncoderSpec& spec, std::size_t input_dim,
                              std::uint64_t seed) {
  spec.validate();
  ad::ParameterList params;
  Engine engine = makeEngine(seed, "encoder.init");
  std::size_t fan_in = input_dim;
  const auto widths = layerWidths(spec);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_in, widths[l]);
    for (double& v : w.data()) v = (2.0 * uniformUnit(engine) - 1.0) * bound;
    params.push_back({"enc.w" + std::to_string(l), std::move(w)});
    if (spec.kind == EncoderKind::kMlp) {
      params.push_back({"enc.b" + std::to_string(l), Matrix(1, widths[l])});
    }
    fan_in = widths[l];
  }
  return params;
}

ad::Var encodeOnTape(const EncoderSpec& spec, std::span<const ad::Var> params, ad::Var x,
                     const Matrix* adjacency, Engine* dropout) {
  if (spec.kind == EncoderKind::kIdentity) return x;
  const auto widths = layerWidths(spec);
  const std::size_t per_layer = spec.kind == EncoderKind::kMlp ? 2 : 1;
  if (params.size() != widths.size() * per_layer) {
    throw ContractError("encoder expects " + std::to_string(widths.size() * per_layer) +
                        " parameter tensors, got " + std::to_string(params.size()));
  }
  ad::Var h = x;
  ad::Var a_hat;
  if (spec.kind == EncoderKind::kGcn) {
    if (adjacency == nullptr) throw ContractError("gcn encoder requires a graph");
    if (adjacency->rows() != x.value().rows()) {
      throw DimensionError("adjacency " + adjacency->shapeString() + " does not match " +
                           std::to_string(x.value().rows()) + " nodes");
    }
    a_hat = x.tape().constant(*adjacency);
  }
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const bool last = l + 1 == widths.size();
    if (spec.kind == EncoderKind::kGcn) {
      h = applyDropout(h, spec.layer_dropout_p, dropout);
      h = ad::matmul(ad::matmul(a_hat, h), params[l]);
    } else {
      h = ad::addRowBroadcast(ad::matmul(h, params[2 * l]), params[2 * l + 1]);
    }
    if (!last && spec.activation == Activation::kRelu) h = ad::relu(h);
  }
  return h;
}

Matrix encode(const EncoderSpec& spec, const ad::ParameterList& params, const Matrix& x,
              const SimilarityGraph* graph, bool training, std::uint64_t seed) {
  spec.validate();
  if (spec.kind == EncoderKind::kIdentity) return x;
  Matrix adjacency;
  if (spec.kind == EncoderKind::kGcn) {
    if (graph == nullptr) throw ContractError("gcn encoder requires a graph");
    if (graph->n() != x.rows()) {
      throw DimensionError("graph has " + std::to_string(graph->n()) + " nodes but features have " +
                           std::to_string(x.rows()) + " rows");
    }
    adjacency = normalizeAdjacency(*graph);
  }
  ad::Tape tape;
  const auto vars = tape.parameters(params);
  Engine engine = makeEngine(seed, "encoder.dropout");
  const ad::Var out = encodeOnTape(spec, vars, tape.constant(x),
                                   spec.kind == EncoderKind::kGcn ? &adjacency : nullptr,
                                   training ? &engine : nullptr);
  return out.value();
}

Matrix roundToFloat32(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

namespace {

void putU32(std::string& buf, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) buf += static_cast<char>((v >> (8 * b)) & 0xFF);
}

std::uint32_t getU32(const std::string& buf, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + b])) << (8 * b);
  }
  return v;
}

}  // namespace

Matrix readFeatures(const std::string& path) {
  const std::string buf = readTextFile(path);
  if (buf.size() < 12) {
    throw ParseError(path + ": truncated header: expected 12 bytes, got " +
                     std::to_string(buf.size()));
  }
  if (buf.compare(0, 4, "PANF") != 0) throw ParseError(path + ": bad magic, expected PANF");
  const std::size_t n = getU32(buf, 4);
  const std::size_t d = getU32(buf, 8);
  const std::size_t expected = 12 + 4 * n * d;
  if (buf.size() != expected) {
    throw ParseError(path + ": expected " + std::to_string(expected) + " bytes for " +
                     std::to_string(n) + "x" + std::to_string(d) + " features, got " +
                     std::to_string(buf.size()));
  }
  Matrix out(n, d);
  for (std::size_t e = 0; e < n * d; ++e) {
    const float f = std::bit_cast<float>(getU32(buf, 12 + 4 * e));
    if (!std::isfinite(f)) {
      throw NumericError(path + ": non-finite feature at row " + std::to_string(e / d) +
                         " column " + std::to_string(e % d));
    }
    out[e] = static_cast<double>(f);
  }
  return out;
}

void writeFeatures(const Matrix& features, const std::string& path) {
  std::string buf = "PANF";
  putU32(buf, static_cast<std::uint32_t>(features.rows()));
  putU32(buf, static_cast<std::uint32_t>(features.cols()));
  for (double v : features.values()) putU32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  writeTextFile(path, buf);
}

Matrix readFeatureCsv(const std::string& path) {
  const CsvTable csv = readCsv(path);
  if (csv.header.empty() || csv.header[0] != "item_id") {
    throw ParseError(path + ": line 1: expected header starting with item_id");
  }
  const std::size_t d = csv.header.size() - 1;
  Matrix out(csv.rows.size(), d);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const std::size_t line = r + 2;
    if (csv.rows[r].size() != d + 1) {
      throw ParseError(path + ": line " + std::to_string(line) + ": expected " +
                       std::to_string(d + 1) + " cells");
    }
    if (parseIndex(csv.rows[r][0], path, line) != r) {
      throw ParseError(path + ": line " + std::to_string(line) + ": item_id out of order");
    }
    for (std::size_t c = 0; c < d; ++c) out(r, c) = parseReal(csv.rows[r][c + 1], path, line);
  }
  return out;
}

void writeFeatureCsv(const Matrix& features, const std::string& path) {
  std::ostringstream out;
  out << "item_id";
  for (std::size_t c = 0; c < features.cols(); ++c) out << ",f_" << c;
  out << '\n';
  for (std::size_t r = 0; r < features.rows(); ++r) {
    out << r;
    for (double v : features.row(r)) out << ',' << formatReal(v);
    out << '\n';
  }
  writeTextFile(path, out.str());
}

}  // namespace pan
