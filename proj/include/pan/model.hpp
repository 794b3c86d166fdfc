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

#include <span>
#include <string>
#include <vector>

#include "pan/autodiff.hpp"
#include "pan/csm.hpp"
#include "pan/encoders.hpp"

namespace pan {

/// A trained PAN: encoder head plus CSM. Training-only settings (lambda,
/// supervision layout, f_a) live in the run manifest, not here.
struct ModelBundle {
  EncoderSpec encoder;
  ad::ParameterList encoder_params;
  CsmParameters csm;
  bool relevance_enabled = true;

  CsmConfig csmConfig() const;
  /// Feature width the parameters were built for.
  std::size_t inputDim() const;
  void validate(std::size_t input_dim) const;

  /// Encoded features under `context` (used by gcn only).
  Matrix embed(const Matrix& features, const SimilarityGraph& context) const;
  std::vector<CsmOutput> forward(const Matrix& features, std::span<const ItemPair> pairs,
                                 const SimilarityGraph& context) const;

  /// Encoder parameters followed by csm.w1, csm.b1, csm.w2, csm.b2.
  ad::ParameterList parameters() const;
  void setParameters(const ad::ParameterList& params);
};

/// Dense link classifier: logit = |f_i - f_j| w + b.
struct LinkHead {
  Matrix w;
  Matrix b;
};

struct SiameseModel {
  EncoderSpec encoder;
  ad::ParameterList encoder_params;
  LinkHead link;
};

struct MultitaskModel {
  EncoderSpec encoder;
  ad::ParameterList encoder_params;
  LinkHead link;
  // Per-image attribute head: sigmoid(f w + b).
  Matrix attr_w;
  Matrix attr_b;
};

struct AttrSimilarityModel {
  EncoderSpec encoder;
  ad::ParameterList encoder_params;
  Matrix attr_w;
  Matrix attr_b;
  // Similarity logit = [a_i ; a_j] pair_w + pair_b over predicted attributes.
  Matrix pair_w;
  Matrix pair_b;

  Matrix predictAttributes(const Matrix& features, const SimilarityGraph& context) const;
};

std::string checkpointJson(const ModelBundle& model);
ModelBundle parseCheckpoint(const std::string& text, const std::string& origin);
void saveCheckpoint(const ModelBundle& model, const std::string& path);
ModelBundle loadCheckpoint(const std::string& path);

}  // namespace pan
