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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pan/attributes.hpp"
#include "pan/autodiff.hpp"
#include "pan/csm.hpp"
#include "pan/data.hpp"
#include "pan/encoders.hpp"
#include "pan/model.hpp"
#include "pan/rng.hpp"

namespace pan {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  void validate() const;
};

struct AdamState {
  std::map<std::string, Matrix> m;
  std::map<std::string, Matrix> v;
};

/// One bias-corrected Adam update at step t >= 1.
void adamStep(ad::ParameterList& params, const ad::GradientStore& grads, AdamState& state,
              std::size_t t, double learning_rate, const AdamConfig& config);

enum class TrainMode { kSingleBatch, kMinibatch };
enum class ValidationMetric { kPairAuc, kPairAccuracy, kFewShot, kNone };

TrainMode parseTrainMode(const std::string& text);
std::string toString(TrainMode mode);
ValidationMetric parseValidationMetric(const std::string& text);
std::string toString(ValidationMetric metric);

struct TrainConfig {
  double lambda = 1.0;
  double learning_rate = 1e-3;
  std::size_t epochs = 1000;
  TrainMode mode = TrainMode::kSingleBatch;
  std::size_t batch_size = 96;
  std::uint64_t seed = 0;
  AdamConfig adam;
  CombineFn fa = CombineFn::kOr;
  std::size_t validation_every = 10;
  // Positive and negative pairs drawn per epoch, each.
  std::size_t pairs_per_class = 1000;
  std::size_t val_pairs_per_class = 500;
  ValidationMetric val_metric = ValidationMetric::kPairAuc;
  std::string train_split = "train";
  std::string val_split = "val";
  std::size_t val_way = 5;
  std::size_t val_shot = 5;
  std::size_t val_query = 5;
  std::size_t val_episodes = 50;

  void validate() const;
};

/// BCE(p, e) + lambda * maskedBceMean(rho prefix, labels, mask).
double totalLoss(double e, double p, std::span<const double> labels, std::span<const double> mask,
                 std::span<const double> rho, double lambda);

struct PairSample {
  std::size_t i = 0;
  std::size_t j = 0;
  int e = 0;
};

/// count_per_class positives uniform over edges, then as many negatives
/// uniform over non-edges (rejection sampled).
std::vector<PairSample> samplePairs(const SimilarityGraph& g, std::size_t count_per_class,
                                    Engine& engine);
std::vector<PairSample> samplePairs(const SimilarityGraph& g, std::size_t count_per_class,
                                    std::uint64_t seed);

/// samplePairs on the subgraph induced by `nodes`, in original item indices.
std::vector<PairSample> samplePairsWithin(const SimilarityGraph& g,
                                          std::span<const std::size_t> nodes,
                                          std::size_t count_per_class, Engine& engine);

/// Row-aligned tensors for one batch of pairs.
struct PairBatch {
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
  Matrix targets;
  // Pair attribute labels and mask, width = supervised prefix; empty when the
  // attribute term is off for this batch.
  Matrix labels;
  Matrix mask;
};

/// `width` 0 disables attribute labels. Masks that are all zero also leave
/// labels empty, since the term is then exactly zero.
PairBatch makeBatch(std::span<const PairSample> pairs, const AttributeTable* attributes,
                    CombineFn fa, std::size_t width);

/// Mean over the batch of the per-pair objective, built on the tape.
ad::Var panObjective(const EncoderSpec& encoder, std::span<const ad::Var> encoder_vars,
                     const CsmVars& csm, ad::Var x, const Matrix* adjacency, Engine* dropout,
                     const PairBatch& batch, bool relevance_enabled, double lambda);

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_metric;
};

std::string historyCsv(std::span<const HistoryRow> rows);

struct TrainResult {
  ModelBundle model;
  std::vector<HistoryRow> history;
  // Epoch after which the returned parameters were taken.
  std::optional<std::size_t> best_epoch;
  std::optional<double> best_val;
};

TrainResult trainPan(const DatasetBundle& data, const EncoderSpec& encoder, const CsmConfig& csm,
                     const TrainConfig& config);

/// Hinge triplet loss max(|x-y| - |x-z| + margin, 0) on single embeddings.
double tripletLoss(std::span<const double> fx, std::span<const double> fy,
                   std::span<const double> fz, double margin);

SiameseModel trainSiameseBaseline(const DatasetBundle& data, const EncoderSpec& encoder,
                                  double margin, const TrainConfig& config);

MultitaskModel trainMultitaskBaseline(const DatasetBundle& data, const EncoderSpec& encoder,
                                      const TrainConfig& config);

/// Stage 2 of the attribute-similarity baseline on given per-item attribute
/// vectors: a dense layer on [a_i ; a_j].
LinkHead trainConcatPairClassifier(const Matrix& attributes, const SimilarityGraph& graph,
                                   std::span<const std::size_t> train_items,
                                   const TrainConfig& config);

AttrSimilarityModel trainAttrSimilarityBaseline(const DatasetBundle& data,
                                                const EncoderSpec& encoder,
                                                const TrainConfig& config);

}  // namespace pan
