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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pan/autodiff.hpp"
#include "pan/csm.hpp"
#include "pan/matrix.hpp"
#include "pan/rng.hpp"

namespace pan {

/// Undirected graph on nodes 0..n-1. Edges are stored once as (i, j) with
/// i < j, sorted, without duplicates or self-loops.
class SimilarityGraph {
 public:
  SimilarityGraph() = default;
  explicit SimilarityGraph(std::size_t n) : n_(n) {}
  SimilarityGraph(std::size_t n, std::vector<ItemPair> edges);

  std::size_t n() const { return n_; }
  const std::vector<ItemPair>& edges() const { return edges_; }
  std::size_t edgeCount() const { return edges_.size(); }
  bool hasEdge(std::size_t i, std::size_t j) const;
  std::vector<std::size_t> degrees() const;

  /// Graph on n nodes with every pair among `nodes` connected.
  static SimilarityGraph clique(std::size_t n, std::span<const std::size_t> nodes);

  /// Subgraph induced by `nodes`, renumbered 0..nodes.size()-1 in that order.
  SimilarityGraph induced(std::span<const std::size_t> nodes) const;

  friend bool operator==(const SimilarityGraph&, const SimilarityGraph&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<ItemPair> edges_;
};

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
Matrix normalizeAdjacency(const SimilarityGraph& g);

/// Removes each edge independently with probability p.
SimilarityGraph dropEdges(const SimilarityGraph& g, double p, Engine& engine);
SimilarityGraph dropEdges(const SimilarityGraph& g, double p, std::uint64_t seed);

enum class EncoderKind { kIdentity, kMlp, kGcn };
enum class Activation { kRelu, kLinear };

EncoderKind parseEncoderKind(const std::string& text);
std::string toString(EncoderKind kind);
Activation parseActivation(const std::string& text);
std::string toString(Activation a);

struct EncoderSpec {
  EncoderKind kind = EncoderKind::kIdentity;
  // mlp: output width of each dense layer.
  std::vector<std::size_t> layer_dims;
  // gcn: layer count and width of every layer.
  std::size_t num_layers = 2;
  std::size_t hidden_dim = 16;
  // Hidden layers use this activation; the last layer is linear.
  Activation activation = Activation::kRelu;
  double layer_dropout_p = 0.5;
  double edge_dropout_p = 0.15;

  void validate() const;
  std::size_t outputDim(std::size_t input_dim) const;
};

/// Encoder weights named enc.w<l> (and enc.b<l> for mlp), uniform in
/// +-1/sqrt(fan_in), biases zero.
ad::ParameterList initEncoder(const EncoderSpec& spec, std::size_t input_dim, std::uint64_t seed);

/// Differentiable encoder. `params` are the tape handles of initEncoder's list
/// in order. `adjacency` is the normalized adjacency for gcn (ignored
/// otherwise). `dropout` supplies layer-dropout draws; null means evaluation.
ad::Var encodeOnTape(const EncoderSpec& spec, std::span<const ad::Var> params, ad::Var x,
                     const Matrix* adjacency, Engine* dropout);

/// Value-only encode. Evaluation mode ignores `seed`. The graph is used as
/// given; edge dropout is the trainer's job, once per epoch.
Matrix encode(const EncoderSpec& spec, const ad::ParameterList& params, const Matrix& x,
              const SimilarityGraph* graph, bool training, std::uint64_t seed);

/// Binary features: "PANF", u32 n, u32 d, n*d float32, all little-endian.
/// Values are widened to double on load.
Matrix readFeatures(const std::string& path);
void writeFeatures(const Matrix& features, const std::string& path);

/// CSV features with header item_id,f_0..f_{d-1}.
Matrix readFeatureCsv(const std::string& path);
void writeFeatureCsv(const Matrix& features, const std::string& path);

/// Rounds every entry to the nearest float32, so binary round trips are exact.
Matrix roundToFloat32(const Matrix& m);

}  // namespace pan
