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
#include <string>
#include <vector>

#include "pan/attributes.hpp"
#include "pan/encoders.hpp"
#include "pan/matrix.hpp"

namespace pan {

using ItemSets = std::vector<std::vector<std::size_t>>;

struct DatasetBundle {
  Matrix features;
  std::optional<AttributeTable> attributes;
  SimilarityGraph graph;
  // Named disjoint index sets: train/val/test or base/val/novel.
  std::map<std::string, std::vector<std::size_t>> splits;
  // Per-item type labels (empty when absent).
  std::vector<int> categories;
  // Per-item class labels for episodic tasks (empty when absent).
  std::vector<int> classes;
  // Ground-truth compatible sets, grouped by split name.
  std::map<std::string, ItemSets> sets;

  std::size_t n() const { return features.rows(); }
  const std::vector<std::size_t>& split(const std::string& name) const;
  void validate() const;
};

enum class TaskKind { kCompatibilityManifestation, kFewShotClusters, kLinearSeparable };

/// compat-manifest, fewshot-clusters, linear-separable
TaskKind parseTaskKind(const std::string& text);
std::string toString(TaskKind kind);

struct SyntheticSpec {
  TaskKind task_kind = TaskKind::kCompatibilityManifestation;
  std::size_t n_items = 500;
  std::size_t d = 16;
  std::size_t m_attributes = 6;
  double noise_sd = 0.05;
  // compat-manifest
  std::size_t manifestation_count = 2;
  std::size_t attributes_per_item = 2;
  double shade_sd = 1.0;
  std::size_t category_count = 4;
  // fewshot-clusters: class centres sit at distance `separation` from the origin.
  std::size_t n_classes = 20;
  double separation = 0.5;
  // Item fractions (class fractions for fewshot-clusters); the rest is test.
  double train_fraction = 0.7;
  double val_fraction = 0.15;

  void validate() const;
};

struct OracleReport {
  // Best balanced pair accuracy achievable from binary attribute presence alone.
  double presence_bayes_rate = 1.0;
  // Probability that a uniformly drawn item pair is linked.
  double link_rate = 0.0;
  std::size_t presence_patterns = 0;
};

struct GeneratedDataset {
  DatasetBundle bundle;
  OracleReport oracle;
};

/// Items carry exactly `attributes_per_item` attributes, each with a hidden
/// manifestation. Attribute k owns two feature axes: axis k holds the
/// manifestation's hue and axis m+k a noisy shade that only marks presence.
/// Two items are linked iff they share at least one attribute and every
/// shared attribute has the same manifestation in both.
GeneratedDataset genCompatibilityManifestation(const SyntheticSpec& spec, std::uint64_t seed);

/// Exact presence-only Bayes rate for the manifestation rule.
OracleReport manifestationOracle(std::size_t m, std::size_t per_item, std::size_t manifestations);

/// Gaussian classes with attribute signatures built from mutually exclusive
/// attribute pairs (2t, 2t+1). Links join same-class items; splits are
/// class-disjoint and named base/val/novel.
DatasetBundle genFewShotClusters(const SyntheticSpec& spec, std::uint64_t seed);

/// Features 2a-1 plus noise on the first m axes; items linked iff attribute 0
/// agrees.
DatasetBundle genLinearSeparable(const SyntheticSpec& spec, std::uint64_t seed);

GeneratedDataset generate(const SyntheticSpec& spec, std::uint64_t seed);

struct FitbQuestion {
  std::vector<std::size_t> question_items;
  std::vector<std::size_t> candidates;
  std::size_t answer_index = 0;
};

struct Episode {
  std::size_t n_way = 0;
  std::size_t k_shot = 0;
  std::vector<std::vector<std::size_t>> support;
  // (item, class position in 0..n_way-1)
  std::vector<std::pair<std::size_t, std::size_t>> query;
};

/// One question per set: a random member becomes the answer, distractors are
/// drawn from `pool` with the answer's category.
std::vector<FitbQuestion> buildFitbQuestions(const ItemSets& sets, std::size_t num_choices,
                                             const std::vector<int>& categories,
                                             const std::vector<std::size_t>& pool,
                                             std::uint64_t seed);

/// Per set, replaces a uniformly drawn number (1..size) of positions with
/// same-category items from `pool`.
ItemSets resampleNegativeSets(const ItemSets& sets, const std::vector<int>& categories,
                              const std::vector<std::size_t>& pool, std::uint64_t seed);

std::vector<Episode> buildEpisodes(const DatasetBundle& bundle, const std::string& split,
                                   std::size_t n_way, std::size_t k_shot, std::size_t n_query,
                                   std::size_t count, std::uint64_t seed);

/// Writes features.panf, graph.csv, splits.json, items.csv, sets.json,
/// attributes.csv (+ confidence.csv) and manifest.json into `dir`.
void saveBundle(const DatasetBundle& bundle, const std::string& dir);

/// Accepts the bundle directory or its manifest.json. Content hashes and
/// cross-file consistency are checked.
DatasetBundle loadBundle(const std::string& path);

std::string oracleReportJson(const OracleReport& report, const SyntheticSpec& spec,
                             std::uint64_t seed);

}  // namespace pan
