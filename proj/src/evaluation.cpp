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

#include "pan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pan/errors.hpp"
#include "pan/io.hpp"
#include "pan/training.hpp"

namespace pan {

namespace {

Matrix absDiffRows(const Matrix& h, std::span<const ItemPair> pairs) {
  Matrix diff(pairs.size(), h.cols());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto [i, j] = pairs[r];
    if (i >= h.rows() || j >= h.rows()) {
      throw IndexError("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") out of range for " + std::to_string(h.rows()) + " items");
    }
    for (std::size_t c = 0; c < h.cols(); ++c) diff(r, c) = std::fabs(h(i, c) - h(j, c));
  }
  return diff;
}

std::vector<double> linkScores(const Matrix& h, std::span<const ItemPair> pairs, const LinkHead& head) {
  const Matrix logits = addRowBroadcast(matmul(absDiffRows(h, pairs), head.w), head.b);
  std::vector<double> out(pairs.size());
  for (std::size_t r = 0; r < pairs.size(); ++r) out[r] = sigmoid(logits[r]);
  return out;
}

}  // namespace

std::vector<double> PanScorer::score(const Matrix& features, std::span<const ItemPair> pairs,
                                     const SimilarityGraph& context) const {
  const auto outputs = model_.forward(features, pairs, context);
  std::vector<double> s(outputs.size());
  for (std::size_t r = 0; r < outputs.size(); ++r) s[r] = outputs[r].p;
  return s;
}

std::vector<double> SiameseScorer::score(const Matrix& features, std::span<const ItemPair> pairs,
                                         const SimilarityGraph& context) const {
  const Matrix h = encode(model_.encoder, model_.encoder_params, features, &context, false, 0);
  return linkScores(h, pairs, model_.link);
}

std::vector<double> MultitaskScorer::score(const Matrix& features, std::span<const ItemPair> pairs,
                                           const SimilarityGraph& context) const {
  const Matrix h = encode(model_.encoder, model_.encoder_params, features, &context, false, 0);
  return linkScores(h, pairs, model_.link);
}

std::vector<double> AttrSimilarityScorer::score(const Matrix& features,
                                                std::span<const ItemPair> pairs,
                                                const SimilarityGraph& context) const {
  const Matrix a = model_.predictAttributes(features, context);
  const std::size_t m = a.cols();
  Matrix joined(pairs.size(), 2 * m);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto [i, j] = pairs[r];
    if (i >= a.rows() || j >= a.rows()) throw IndexError("pair index out of range");
    for (std::size_t k = 0; k < m; ++k) {
      joined(r, k) = a(i, k);
      joined(r, m + k) = a(j, k);
    }
  }
  const Matrix logits = addRowBroadcast(matmul(joined, model_.pair_w), model_.pair_b);
  std::vector<double> out(pairs.size());
  for (std::size_t r = 0; r < pairs.size(); ++r) out[r] = sigmoid(logits[r]);
  return out;
}

std::vector<double> TableScorer::score(const Matrix&, std::span<const ItemPair> pairs,
                                       const SimilarityGraph&) const {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    if (i >= table_.rows() || j >= table_.cols()) throw IndexError("pair outside score table");
    out.push_back(table_(i, j));
  }
  return out;
}

std::vector<double> ConstantScorer::score(const Matrix&, std::span<const ItemPair> pairs,
                                          const SimilarityGraph&) const {
  return std::vector<double>(pairs.size(), value_);
}

std::string reportsCsv(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << "metric,value,interval,count,fingerprint\n";
  for (const auto& r : reports) {
    out << r.metric << ',' << formatReal(r.value) << ','
        << (r.interval ? formatReal(*r.interval) : "") << ',' << r.count << ',' << r.fingerprint
        << '\n';
  }
  return out.str();
}

std::string reportsJson(const std::vector<MetricReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j{{"metric", r.metric}, {"value", r.value}, {"count", r.count},
                     {"fingerprint", r.fingerprint}};
    j["interval"] = r.interval ? nlohmann::json(*r.interval) : nlohmann::json(nullptr);
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

double pairAccuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw DimensionError("pairAccuracy: length mismatch");
  if (scores.empty()) throw ContractError("pairAccuracy: no pairs");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    correct += (scores[r] >= threshold) == (labels[r] == 1);
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double mannWhitneyAuc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) {
    throw ContractError("AUC needs at least one positive and one negative");
  }
  // Sort all scores; within a run of ties every negative counts 0.5 per positive.
  std::vector<std::pair<double, int>> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.emplace_back(s, 1);
  for (double s : negative) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end());
  double wins = 0.0;
  double negatives_below = 0.0;
  for (std::size_t a = 0; a < all.size();) {
    std::size_t b = a;
    double pos = 0.0;
    double neg = 0.0;
    while (b < all.size() && all[b].first == all[a].first) {
      (all[b].second == 1 ? pos : neg) += 1.0;
      ++b;
    }
    wins += pos * (negatives_below + 0.5 * neg);
    negatives_below += neg;
    a = b;
  }
  return wins / (static_cast<double>(positive.size()) * static_cast<double>(negative.size()));
}

std::optional<double> averagePrecision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("averagePrecision: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0 || positives == scores.size()) return std::nullopt;
  double sum = 0.0;
  std::size_t seen = 0;
  std::size_t seen_pos = 0;
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    std::size_t group_pos = 0;
    while (b < order.size() && scores[order[b]] == scores[order[a]]) {
      group_pos += labels[order[b]] == 1;
      ++b;
    }
    seen += b - a;
    seen_pos += group_pos;
    sum += static_cast<double>(group_pos) * static_cast<double>(seen_pos) / static_cast<double>(seen);
    a = b;
  }
  return sum / static_cast<double>(positives);
}

std::pair<double, double> meanWithInterval(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  // Welford updates; a constant sequence keeps its value exactly.
  double mean = 0.0;
  double ss = 0.0;
  std::size_t k = 0;
  for (double v : values) {
    ++k;
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    ss += delta * (v - mean);
  }
  if (values.size() < 2) return {mean, 0.0};
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

MetricReport heldoutPairAccuracy(const PairScorer& scorer, const DatasetBundle& bundle,
                                 const std::string& split, std::size_t count_per_class,
                                 std::uint64_t seed) {
  Engine engine = makeEngine(seed, "eval.pairs");
  const auto samples = samplePairsWithin(bundle.graph, bundle.split(split), count_per_class, engine);
  std::vector<ItemPair> pairs;
  std::vector<int> labels;
  for (const auto& s : samples) {
    pairs.emplace_back(s.i, s.j);
    labels.push_back(s.e);
  }
  const auto scores = scorer.score(bundle.features, pairs, SimilarityGraph(bundle.n()));
  MetricReport r;
  r.metric = "pair_accuracy";
  r.value = pairAccuracy(scores, labels);
  r.count = pairs.size();
  return r;
}

MetricReport fitbAccuracy(const PairScorer& scorer, std::span<const FitbQuestion> questions,
                          const Matrix& features) {
  if (questions.empty()) throw ContractError("fitbAccuracy: no questions");
  std::size_t correct = 0;
  for (const auto& q : questions) {
    if (q.candidates.empty()) throw ContractError("FITB question without candidates");
    if (q.answer_index >= q.candidates.size()) throw ContractError("FITB answer index out of range");
    const SimilarityGraph context = SimilarityGraph::clique(features.rows(), q.question_items);
    std::vector<ItemPair> pairs;
    for (std::size_t c : q.candidates)
      for (std::size_t item : q.question_items) pairs.emplace_back(item, c);
    const auto s = scorer.score(features, pairs, context);
    const std::size_t n = q.question_items.size();
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t c = 0; c < q.candidates.size(); ++c) {
      double total = 0.0;
      for (std::size_t t = 0; t < n; ++t) total += s[c * n + t];
      if (total > best_score) {
        best_score = total;
        best = c;
      }
    }
    correct += best == q.answer_index;
  }
  return {"fitb_accuracy", static_cast<double>(correct) / static_cast<double>(questions.size()),
          std::nullopt, questions.size(), ""};
}

std::vector<double> setScores(const PairScorer& scorer, const ItemSets& sets,
                              const Matrix& features) {
  const SimilarityGraph empty(features.rows());
  std::vector<ItemPair> pairs;
  for (const auto& s : sets) {
    if (s.size() < 2) throw ContractError("compatibility sets need at least two items");
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = a + 1; b < s.size(); ++b) pairs.emplace_back(s[a], s[b]);
  }
  const auto scores = scorer.score(features, pairs, empty);
  std::vector<double> out;
  std::size_t offset = 0;
  for (const auto& s : sets) {
    const std::size_t count = s.size() * (s.size() - 1) / 2;
    double total = 0.0;
    for (std::size_t t = 0; t < count; ++t) total += scores[offset + t];
    out.push_back(total / static_cast<double>(count));
    offset += count;
  }
  return out;
}

MetricReport compatibilityAuc(const PairScorer& scorer, const ItemSets& positive_sets,
                              const ItemSets& negative_sets, const Matrix& features) {
  const auto pos = setScores(scorer, positive_sets, features);
  const auto neg = setScores(scorer, negative_sets, features);
  return {"compatibility_auc", mannWhitneyAuc(pos, neg), std::nullopt, pos.size() + neg.size(), ""};
}

MetricReport fewShotAccuracy(const PairScorer& scorer, std::span<const Episode> episodes,
                             const Matrix& features) {
  if (episodes.empty()) throw ContractError("fewShotAccuracy: no episodes");
  std::vector<double> accuracies;
  for (const auto& ep : episodes) {
    if (ep.support.size() != ep.n_way || ep.query.empty()) throw ContractError("malformed episode");
    std::vector<ItemPair> edges;
    for (const auto& cls : ep.support)
      for (std::size_t a = 0; a < cls.size(); ++a)
        for (std::size_t b = a + 1; b < cls.size(); ++b) edges.emplace_back(cls[a], cls[b]);
    const SimilarityGraph context(features.rows(), std::move(edges));
    std::vector<ItemPair> pairs;
    for (const auto& [q, label] : ep.query)
      for (const auto& cls : ep.support)
        for (std::size_t s : cls) pairs.emplace_back(q, s);
    const auto scores = scorer.score(features, pairs, context);
    std::size_t offset = 0;
    std::size_t correct = 0;
    for (const auto& [q, label] : ep.query) {
      std::size_t best = 0;
      double best_score = -INFINITY;
      for (std::size_t w = 0; w < ep.n_way; ++w) {
        const std::size_t k = ep.support[w].size();
        double total = 0.0;
        for (std::size_t t = 0; t < k; ++t) total += scores[offset + t];
        offset += k;
        const double mean = total / static_cast<double>(k);
        if (mean > best_score) {
          best_score = mean;
          best = w;
        }
      }
      correct += best == label;
    }
    accuracies.push_back(static_cast<double>(correct) / static_cast<double>(ep.query.size()));
  }
  const auto [mean, interval] = meanWithInterval(accuracies);
  return {"fewshot_accuracy", mean, interval, episodes.size(), ""};
}

MetricReport recallAtK(const Matrix& query_features, const Matrix& gallery_features,
                       std::span<const int> query_labels, std::span<const int> gallery_labels,
                       std::size_t k, const PairScorer* model) {
  const std::size_t nq = query_features.rows();
  const std::size_t ng = gallery_features.rows();
  if (k < 1) throw ContractError("recall@k needs k >= 1");
  if (ng == 0) throw ContractError("recall@k needs a non-empty gallery");
  if (k > ng) {
    throw ContractError("k=" + std::to_string(k) + " exceeds gallery size " + std::to_string(ng));
  }
  if (query_labels.size() != nq || gallery_labels.size() != ng) {
    throw DimensionError("recall@k: label counts do not match feature rows");
  }
  if (query_features.cols() != gallery_features.cols()) {
    throw DimensionError("recall@k: query and gallery dimensions differ");
  }
  if (nq == 0) throw ContractError("recall@k needs at least one query");

  // Higher key ranks first.
  Matrix key(nq, ng);
  if (model != nullptr) {
    Matrix stacked(nq + ng, query_features.cols());
    for (std::size_t q = 0; q < nq; ++q)
      std::copy(query_features.row(q).begin(), query_features.row(q).end(), stacked.row(q).begin());
    for (std::size_t g = 0; g < ng; ++g)
      std::copy(gallery_features.row(g).begin(), gallery_features.row(g).end(),
                stacked.row(nq + g).begin());
    std::vector<ItemPair> pairs;
    for (std::size_t q = 0; q < nq; ++q)
      for (std::size_t g = 0; g < ng; ++g) pairs.emplace_back(q, nq + g);
    const auto s = model->score(stacked, pairs, SimilarityGraph(nq + ng));
    for (std::size_t e = 0; e < s.size(); ++e) key[e] = s[e];
  } else {
    for (std::size_t q = 0; q < nq; ++q) {
      for (std::size_t g = 0; g < ng; ++g) {
        double ss = 0.0;
        for (std::size_t c = 0; c < query_features.cols(); ++c) {
          const double diff = query_features(q, c) - gallery_features(g, c);
          ss += diff * diff;
        }
        key(q, g) = -std::sqrt(ss);
      }
    }
  }
  std::size_t hits = 0;
  std::vector<std::size_t> order(ng);
  for (std::size_t q = 0; q < nq; ++q) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key(q, a) > key(q, b); });
    for (std::size_t t = 0; t < k; ++t) {
      if (gallery_labels[order[t]] == query_labels[q]) {
        ++hits;
        break;
      }
    }
  }
  return {"recall@" + std::to_string(k), static_cast<double>(hits) / static_cast<double>(nq),
          std::nullopt, nq, ""};
}

AttributeMapResult attributeMapFromScores(const Matrix& scores,
                                          std::span<const PairAttributeLabel> labels) {
  if (scores.rows() != labels.size()) throw DimensionError("attributeMap: one label row per pair required");
  const std::size_t width = scores.cols();
  AttributeMapResult out;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < width; ++k) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r].labels.size() != width) throw DimensionError("attributeMap: label width mismatch");
      if (labels[r].mask[k] != 1.0) continue;
      s.push_back(scores(r, k));
      y.push_back(labels[r].labels[k] == 1.0 ? 1 : 0);
    }
    const auto ap = averagePrecision(s, y);
    out.ap.push_back(ap);
    if (ap) {
      sum += *ap;
      ++used;
    } else {
      out.skipped.push_back(k);
    }
  }
  out.report = {"attribute_map", used == 0 ? 0.0 : sum / static_cast<double>(used), std::nullopt,
                used, ""};
  return out;
}

AttributeMapResult attributeMap(const ModelBundle& model, std::span<const ItemPair> pairs,
                                const Matrix& features, const AttributeTable& table,
                                CombineFn fa) {
  const std::size_t width = labelWidth(fa, table.m());
  if (width > model.csm.m()) {
    throw ContractError("model has " + std::to_string(model.csm.m()) + " conditions, labels need " +
                        std::to_string(width));
  }
  const auto outputs = model.forward(features, pairs, SimilarityGraph(features.rows()));
  Matrix scores(pairs.size(), width);
  std::vector<PairAttributeLabel> labels;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    for (std::size_t k = 0; k < width; ++k) scores(r, k) = outputs[r].rho[k];
    labels.push_back(combineItems(table, pairs[r].first, pairs[r].second, fa));
  }
  return attributeMapFromScores(scores, labels);
}

namespace {

// Average rank per column over the table's rows.
std::vector<double> averageRanks(const Matrix& table) {
  const std::size_t m = table.cols();
  std::vector<double> totals(m, 0.0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t rank = 1;
      for (std::size_t l = 0; l < m; ++l) {
        if (table(r, l) > table(r, k) || (l < k && table(r, l) == table(r, k))) ++rank;
      }
      totals[k] += static_cast<double>(rank);
    }
  }
  for (double& t : totals) t /= static_cast<double>(table.rows());
  return totals;
}

std::pair<double, double> meanSd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

std::vector<RankRow> rankStatistics(std::span<const Matrix> omega_tables,
                                    std::span<const Matrix> contribution_tables) {
  if (omega_tables.empty() || omega_tables.size() != contribution_tables.size()) {
    throw ContractError("rank report needs one omega and one contribution table per run");
  }
  const std::size_t m = omega_tables[0].cols();
  for (std::size_t r = 0; r < omega_tables.size(); ++r) {
    if (omega_tables[r].cols() != m || contribution_tables[r].cols() != m) {
      throw ContractError("rank report: runs disagree on condition count M");
    }
    if (omega_tables[r].rows() == 0) throw ContractError("rank report: no pairs");
  }
  std::vector<std::vector<double>> per_run_omega;
  std::vector<std::vector<double>> per_run_contrib;
  for (std::size_t r = 0; r < omega_tables.size(); ++r) {
    per_run_omega.push_back(averageRanks(omega_tables[r]));
    per_run_contrib.push_back(averageRanks(contribution_tables[r]));
  }
  std::vector<RankRow> rows;
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> o;
    std::vector<double> c;
    for (std::size_t r = 0; r < per_run_omega.size(); ++r) {
      o.push_back(per_run_omega[r][k]);
      c.push_back(per_run_contrib[r][k]);
    }
    RankRow row;
    row.attribute = k;
    std::tie(row.mean_rank_omega, row.sd_rank_omega) = meanSd(o);
    std::tie(row.mean_rank_contribution, row.sd_rank_contribution) = meanSd(c);
    rows.push_back(row);
  }
  return rows;
}

std::vector<RankRow> attributeRankReport(std::span<const ModelBundle> runs,
                                         std::span<const ItemPair> pairs, const Matrix& features) {
  if (runs.empty()) throw ContractError("rank report needs at least one run");
  const std::size_t m = runs[0].csm.m();
  std::vector<Matrix> omega;
  std::vector<Matrix> contrib;
  for (const auto& run : runs) {
    if (run.csm.m() != m) {
      throw ContractError("rank report: run has M=" + std::to_string(run.csm.m()) + ", expected " +
                          std::to_string(m));
    }
    const auto out = run.forward(features, pairs, SimilarityGraph(features.rows()));
    Matrix o(pairs.size(), m);
    Matrix c(pairs.size(), m);
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      for (std::size_t k = 0; k < m; ++k) {
        o(r, k) = out[r].omega[k];
        c(r, k) = out[r].rho[k] * out[r].omega[k];
      }
    }
    omega.push_back(std::move(o));
    contrib.push_back(std::move(c));
  }
  return rankStatistics(omega, contrib);
}

std::string rankReportCsv(std::span<const RankRow> rows) {
  std::ostringstream out;
  out << "attribute,mean_rank_omega,sd_rank_omega,mean_rank_contribution,sd_rank_contribution\n";
  for (const auto& r : rows) {
    out << r.attribute << ',' << formatReal(r.mean_rank_omega) << ',' << formatReal(r.sd_rank_omega)
        << ',' << formatReal(r.mean_rank_contribution) << ','
        << formatReal(r.sd_rank_contribution) << '\n';
  }
  return out.str();
}

}  // namespace pan
