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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pan/attributes.hpp"
#include "pan/data.hpp"
#include "pan/model.hpp"

namespace pan {

/// Anything that maps item pairs to similarity scores in [0, 1]. `context` is
/// the graph an encoder may look at; models without a graph encoder ignore it.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual std::vector<double> score(const Matrix& features, std::span<const ItemPair> pairs,
                                    const SimilarityGraph& context) const = 0;
};

class PanScorer : public PairScorer {
 public:
  explicit PanScorer(const ModelBundle& model) : model_(model) {}
  std::vector<double> score(const Matrix& features, std::span<const ItemPair> pairs,
                            const SimilarityGraph& context) const override;

 private:
  const ModelBundle& model_;
};

class SiameseScorer : public PairScorer {
 public:
  explicit SiameseScorer(const SiameseModel& model) : model_(model) {}
  std::vector<double> score(const Matrix& features, std::span<const ItemPair> pairs,
                            const SimilarityGraph& context) const override;

 private:
  const SiameseModel& model_;
};

class MultitaskScorer : public PairScorer {
 public:
  explicit MultitaskScorer(const MultitaskModel& model) : model_(model) {}
  std::vector<double> score(const Matrix& features, std::span<const ItemPair> pairs,
                            const SimilarityGraph& context) const override;

 private:
  const MultitaskModel& model_;
};

class AttrSimilarityScorer : public PairScorer {
 public:
  explicit AttrSimilarityScorer(const AttrSimilarityModel& model) : model_(model) {}
  std::vector<double> score(const Matrix& features, std::span<const ItemPair> pairs,
                            const SimilarityGraph& context) const override;

 private:
  const AttrSimilarityModel& model_;
};

/// Looks scores up in an N x N table: s(i, j) = table(i, j).
class TableScorer : public PairScorer {
 public:
  explicit TableScorer(Matrix table) : table_(std::move(table)) {}
  std::vector<double> score(const Matrix& features, std::span<const ItemPair> pairs,
                            const SimilarityGraph& context) const override;

 private:
  Matrix table_;
};

class ConstantScorer : public PairScorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  std::vector<double> score(const Matrix& features, std::span<const ItemPair> pairs,
                            const SimilarityGraph& context) const override;

 private:
  double value_;
};

struct MetricReport {
  std::string metric;
  double value = 0.0;
  // Half-width of a 95% interval, when one applies.
  std::optional<double> interval;
  std::size_t count = 0;
  std::string fingerprint;
};

std::string reportsCsv(const std::vector<MetricReport>& reports);
std::string reportsJson(const std::vector<MetricReport>& reports);

/// Fraction of pairs with (score >= threshold) == label.
double pairAccuracy(std::span<const double> scores, std::span<const int> labels,
                    double threshold = 0.5);

/// Mann-Whitney AUC; a tie between a positive and a negative counts 0.5.
double mannWhitneyAuc(std::span<const double> positive, std::span<const double> negative);

/// Step-wise average precision: mean over positives of precision at that
/// positive's score, counting every item scored at least as high.
/// Returns nullopt when there are no positives or no negatives.
std::optional<double> averagePrecision(std::span<const double> scores, std::span<const int> labels);

/// Sample mean and 1.96 * sd / sqrt(n) (0 when n < 2).
std::pair<double, double> meanWithInterval(std::span<const double> values);

/// Accuracy at threshold 0.5 on balanced pairs drawn from the graph induced by
/// `split` (count per class each), scored under the empty graph.
MetricReport heldoutPairAccuracy(const PairScorer& scorer, const DatasetBundle& bundle,
                                 const std::string& split, std::size_t count_per_class,
                                 std::uint64_t seed);

MetricReport fitbAccuracy(const PairScorer& scorer, std::span<const FitbQuestion> questions,
                          const Matrix& features);

MetricReport compatibilityAuc(const PairScorer& scorer, const ItemSets& positive_sets,
                              const ItemSets& negative_sets, const Matrix& features);

/// Score of each item set: mean over its unordered pairs, under the empty graph.
std::vector<double> setScores(const PairScorer& scorer, const ItemSets& sets,
                              const Matrix& features);

/// Supports of each class form a clique in the scoring context; queries are
/// isolated.
MetricReport fewShotAccuracy(const PairScorer& scorer, std::span<const Episode> episodes,
                             const Matrix& features);

/// With a scorer, query and gallery rows are stacked into one feature matrix
/// (queries first) and scored under the empty graph; without one, ranking is
/// by Euclidean distance.
MetricReport recallAtK(const Matrix& query_features, const Matrix& gallery_features,
                       std::span<const int> query_labels, std::span<const int> gallery_labels,
                       std::size_t k, const PairScorer* model = nullptr);

struct AttributeMapResult {
  MetricReport report;
  // Per condition; nullopt where AP is undefined (no positives or negatives).
  std::vector<std::optional<double>> ap;
  std::vector<std::size_t> skipped;
};

/// `scores` is P x W (rho prefix per pair), labels are the f_a-combined pair
/// labels of width W.
AttributeMapResult attributeMapFromScores(const Matrix& scores,
                                          std::span<const PairAttributeLabel> labels);

AttributeMapResult attributeMap(const ModelBundle& model, std::span<const ItemPair> pairs,
                                const Matrix& features, const AttributeTable& table,
                                CombineFn fa);

struct RankRow {
  std::size_t attribute = 0;
  double mean_rank_omega = 0.0;
  double sd_rank_omega = 0.0;
  double mean_rank_contribution = 0.0;
  double sd_rank_contribution = 0.0;
};

/// Per run, each attribute's rank (1 = highest, ties to the lower index)
/// averaged over pairs; then mean and sample sd across runs. Tables are
/// pairs x M, one per run.
std::vector<RankRow> rankStatistics(std::span<const Matrix> omega_tables,
                                    std::span<const Matrix> contribution_tables);

std::vector<RankRow> attributeRankReport(std::span<const ModelBundle> runs,
                                         std::span<const ItemPair> pairs, const Matrix& features);

std::string rankReportCsv(std::span<const RankRow> rows);

}  // namespace pan
