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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "pan/data.hpp"
#include "pan/errors.hpp"
#include "pan/evaluation.hpp"
#include "pan/training.hpp"

namespace pan {
namespace {

DatasetBundle linearData(std::uint64_t seed, std::size_t n = 120) {
  SyntheticSpec s;
  s.task_kind = TaskKind::kLinearSeparable;
  s.n_items = n;
  s.d = 6;
  s.m_attributes = 4;
  s.noise_sd = 0.2;
  return genLinearSeparable(s, seed);
}

TrainConfig quickConfig() {
  TrainConfig c;
  c.learning_rate = 0.05;
  c.epochs = 40;
  c.pairs_per_class = 64;
  c.val_metric = ValidationMetric::kNone;
  c.seed = 3;
  return c;
}

CsmConfig csmConfig(std::size_t m, Supervision s) {
  CsmConfig c;
  c.m = m;
  c.supervision = s;
  return c;
}

void expectSameParameters(const ad::ParameterList& a, const ad::ParameterList& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].name, b[k].name);
    EXPECT_EQ(a[k].value, b[k].value) << a[k].name;
  }
}

TEST(TotalLoss, WorkedExamples) {
  const std::vector<double> label{1.0};
  const std::vector<double> mask{1.0};
  const std::vector<double> rho{0.5};
  EXPECT_NEAR(totalLoss(1, 0.5, label, mask, rho, 1.0), 2.0 * std::log(2.0), 1e-12);
  EXPECT_EQ(totalLoss(1, 0.5, label, mask, rho, 0.0), binaryCrossEntropy(0.5, 1.0));
  const std::vector<double> off{0.0};
  EXPECT_NEAR(totalLoss(0, 0.5, label, off, rho, 5.0), std::log(2.0), 1e-15);
  // Only the supervised prefix of rho is read.
  const std::vector<double> long_rho{0.5, 0.01, 0.01};
  EXPECT_NEAR(totalLoss(1, 0.5, label, mask, long_rho, 1.0), 2.0 * std::log(2.0), 1e-12);
  EXPECT_THROW(totalLoss(1, 0.5, label, mask, rho, -1.0), ContractError);
  EXPECT_THROW(totalLoss(1, 0.5, long_rho, std::vector<double>(3, 1.0), rho, 1.0), DimensionError);
}

TEST(SamplePairs, BalancedAndUniformOverEdges) {
  const SimilarityGraph g(6, {{0, 1}, {2, 3}, {4, 5}});
  Engine e = makeEngine(1, "t");
  const auto pairs = samplePairs(g, 100000, e);
  ASSERT_EQ(pairs.size(), 200000u);
  std::map<ItemPair, int> pos;
  std::set<ItemPair> neg;
  for (const auto& p : pairs) {
    ASSERT_LT(p.i, p.j);
    EXPECT_EQ(g.hasEdge(p.i, p.j), p.e == 1);
    if (p.e == 1) ++pos[{p.i, p.j}];
    else neg.insert({p.i, p.j});
  }
  EXPECT_EQ(pos.size(), 3u);
  for (const auto& [pair, c] : pos) EXPECT_NEAR(c, 100000.0 / 3, 3.0 * std::sqrt(100000.0 * (1.0 / 3) * (2.0 / 3)));
  EXPECT_EQ(neg.size(), 12u);
  EXPECT_THROW(samplePairs(SimilarityGraph(4), 1, e), SamplingError);
  EXPECT_THROW(samplePairs(SimilarityGraph(2, {{0, 1}}), 1, e), SamplingError);
  const std::vector<std::size_t> all{0, 1, 2};
  EXPECT_THROW(samplePairs(SimilarityGraph::clique(3, all), 1, e), SamplingError);
}

TEST(SamplePairs, WithinStaysInsideNodes) {
  const DatasetBundle b = linearData(1);
  const auto& train = b.split("train");
  const std::set<std::size_t> allowed(train.begin(), train.end());
  Engine e = makeEngine(2, "t");
  for (const auto& p : samplePairsWithin(b.graph, train, 200, e)) {
    EXPECT_TRUE(allowed.count(p.i) && allowed.count(p.j));
    EXPECT_EQ(b.graph.hasEdge(p.i, p.j), p.e == 1);
  }
}

TEST(Adam, FirstStepsMatchHandComputation) {
  ad::ParameterList params{{"w", Matrix::fromRows({{1.0, -2.0}})}};
  ad::GradientStore g1{{"w", Matrix::fromRows({{0.5, -4.0}})}};
  ad::GradientStore g2{{"w", Matrix::fromRows({{-1.0, 2.0}})}};
  AdamState state;
  const AdamConfig cfg;
  const double lr = 0.1;
  adamStep(params, g1, state, 1, lr, cfg);
  // Step 1: m_hat = g and v_hat = g^2.
  EXPECT_NEAR(params[0].value[0], 1.0 - lr * 0.5 / (0.5 + 1e-8), 1e-14);
  EXPECT_NEAR(params[0].value[1], -2.0 + lr * 4.0 / (4.0 + 1e-8), 1e-14);
  adamStep(params, g2, state, 2, lr, cfg);
  for (int e = 0; e < 2; ++e) {
    const double a = g1["w"][e];
    const double b = g2["w"][e];
    const double m = 0.9 * (0.1 * a) + 0.1 * b;
    const double v = 0.999 * (0.001 * a * a) + 0.001 * b * b;
    const double m_hat = m / (1 - 0.81);
    const double v_hat = v / (1 - 0.999 * 0.999);
    const double first = (e == 0 ? 1.0 : -2.0) - lr * a / (std::abs(a) + 1e-8);
    EXPECT_NEAR(params[0].value[e], first - lr * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-12);
  }
  // A zero gradient still moves by the decayed first moment, and both moments decay.
  const Matrix m_before = state.m["w"];
  const Matrix v_before = state.v["w"];
  ad::GradientStore zero{{"w", Matrix(1, 2)}};
  adamStep(params, zero, state, 3, lr, cfg);
  for (int e = 0; e < 2; ++e) {
    EXPECT_EQ(state.m["w"][e], 0.9 * m_before[e]);
    EXPECT_EQ(state.v["w"][e], 0.999 * v_before[e]);
  }
  ad::ParameterList still{{"w", Matrix::fromRows({{3.0}})}};
  AdamState fresh;
  adamStep(still, {{"w", Matrix(1, 1)}}, fresh, 1, lr, cfg);
  EXPECT_EQ(still[0].value[0], 3.0);
  EXPECT_THROW(adamStep(params, {}, state, 3, lr, cfg), ContractError);
  EXPECT_THROW(adamStep(params, g1, state, 0, lr, cfg), ContractError);
}

TEST(MakeBatch, LabelsFollowWidthAndMask) {
  AttributeTable t = AttributeTable::fullyLabeled(Matrix::fromRows({{1, 0}, {1, 1}, {0, 0}}));
  const std::vector<PairSample> pairs{{0, 1, 1}, {1, 2, 0}};
  const PairBatch none = makeBatch(pairs, &t, CombineFn::kAnd, 0);
  EXPECT_TRUE(none.labels.empty());
  EXPECT_EQ(none.targets, Matrix::fromRows({{1}, {0}}));
  const PairBatch with = makeBatch(pairs, &t, CombineFn::kAnd, 2);
  EXPECT_EQ(with.labels, Matrix::fromRows({{1, 0}, {0, 0}}));
  EXPECT_EQ(with.mask, Matrix::fromRows({{1, 1}, {1, 1}}));
  EXPECT_THROW(makeBatch(pairs, &t, CombineFn::kAndConcatXor, 2), ContractError);
  EXPECT_THROW(makeBatch(pairs, nullptr, CombineFn::kAnd, 2), ContractError);
  t.mask = Matrix(3, 2);
  t.values = Matrix(3, 2);
  EXPECT_TRUE(makeBatch(pairs, &t, CombineFn::kAnd, 2).labels.empty());
}

TEST(HistoryCsv, Format) {
  const std::vector<HistoryRow> rows{{0, 0.5, std::nullopt}, {1, 0.25, 0.75}};
  EXPECT_EQ(historyCsv(rows), "epoch,train_loss,val_metric\n0,0.5,\n1,0.25,0.75\n");
}

TEST(TrainPan, ZeroEpochsReturnsInitialization) {
  const DatasetBundle b = linearData(2);
  TrainConfig c = quickConfig();
  c.epochs = 0;
  const TrainResult r = trainPan(b, EncoderSpec{}, csmConfig(4, Supervision::kUnsupervised), c);
  const CsmParameters init = initParams(6, 4, deriveSeed(c.seed, "pan.csm"));
  EXPECT_EQ(r.model.csm.w1, init.w1);
  EXPECT_EQ(r.model.csm.w2, init.w2);
  EXPECT_TRUE(r.history.empty());
}

TEST(TrainPan, ZeroLambdaMatchesUnsupervisedBitForBit) {
  const DatasetBundle b = linearData(4);
  TrainConfig c = quickConfig();
  c.fa = CombineFn::kOr;
  c.lambda = 0.0;
  const TrainResult sup = trainPan(b, EncoderSpec{}, csmConfig(4, Supervision::kSupervised), c);
  c.lambda = 3.0;
  const TrainResult uns = trainPan(b, EncoderSpec{}, csmConfig(4, Supervision::kUnsupervised), c);
  expectSameParameters(sup.model.parameters(), uns.model.parameters());
  ASSERT_EQ(sup.history.size(), uns.history.size());
  for (std::size_t e = 0; e < sup.history.size(); ++e)
    EXPECT_EQ(sup.history[e].train_loss, uns.history[e].train_loss);
}

TEST(TrainPan, FullyMaskedAttributesAreANoOp) {
  DatasetBundle b = linearData(4);
  TrainConfig c = quickConfig();
  c.lambda = 2.0;
  const TrainResult base = trainPan(b, EncoderSpec{}, csmConfig(4, Supervision::kUnsupervised), c);
  b.attributes->mask = Matrix(b.n(), 4);
  b.attributes->values = Matrix(b.n(), 4);
  const TrainResult masked = trainPan(b, EncoderSpec{}, csmConfig(4, Supervision::kSupervised), c);
  expectSameParameters(base.model.parameters(), masked.model.parameters());
}

TEST(TrainPan, AttributeSupervisionChangesTheModel) {
  const DatasetBundle b = linearData(4);
  TrainConfig c = quickConfig();
  c.lambda = 2.0;
  const TrainResult a = trainPan(b, EncoderSpec{}, csmConfig(4, Supervision::kUnsupervised), c);
  const TrainResult s = trainPan(b, EncoderSpec{}, csmConfig(4, Supervision::kSupervised), c);
  EXPECT_NE(a.model.csm.w1, s.model.csm.w1);
  CsmConfig hybrid = csmConfig(6, Supervision::kHybrid);
  hybrid.m_sup = 4;
  EXPECT_NO_THROW(trainPan(b, EncoderSpec{}, hybrid, c));
  EXPECT_THROW(trainPan(b, EncoderSpec{}, csmConfig(5, Supervision::kSupervised), c), ContractError);
}

TEST(TrainPan, LearnsLinearSeparableTask) {
  const DatasetBundle b = linearData(5, 200);
  TrainConfig c = quickConfig();
  c.epochs = 150;
  c.pairs_per_class = 200;
  const TrainResult r = trainPan(b, EncoderSpec{}, csmConfig(4, Supervision::kUnsupervised), c);
  ASSERT_EQ(r.history.size(), 150u);
  EXPECT_LT(r.history.back().train_loss, 0.5 * r.history.front().train_loss);
  const PanScorer scorer(r.model);
  EXPECT_GE(heldoutPairAccuracy(scorer, b, "test", 300, 9).value, 0.95);
}

TEST(TrainPan, EncodersAndMinibatchRun) {
  const DatasetBundle b = linearData(6);
  TrainConfig c = quickConfig();
  c.epochs = 30;
  c.mode = TrainMode::kMinibatch;
  c.batch_size = 32;
  EncoderSpec mlp;
  mlp.kind = EncoderKind::kMlp;
  mlp.layer_dims = {8, 5};
  EncoderSpec gcn;
  gcn.kind = EncoderKind::kGcn;
  gcn.num_layers = 2;
  gcn.hidden_dim = 5;
  for (const auto& enc : {mlp, gcn}) {
    const TrainResult r = trainPan(b, enc, csmConfig(3, Supervision::kUnsupervised), c);
    EXPECT_EQ(r.model.csm.d(), 5u);
    EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  }
}

TEST(TrainPan, SeedDeterminism) {
  const DatasetBundle b = linearData(7);
  TrainConfig c = quickConfig();
  EncoderSpec mlp;
  mlp.kind = EncoderKind::kGcn;
  const auto a = trainPan(b, mlp, csmConfig(3, Supervision::kUnsupervised), c);
  const auto a2 = trainPan(b, mlp, csmConfig(3, Supervision::kUnsupervised), c);
  c.seed = 4;
  const auto other = trainPan(b, mlp, csmConfig(3, Supervision::kUnsupervised), c);
  expectSameParameters(a.model.parameters(), a2.model.parameters());
  EXPECT_NE(a.model.csm.w1, other.model.csm.w1);
}

TEST(TrainPan, KeepsBestValidationCheckpoint) {
  const DatasetBundle b = linearData(8);
  TrainConfig c = quickConfig();
  c.val_metric = ValidationMetric::kPairAccuracy;
  c.validation_every = 5;
  c.val_pairs_per_class = 100;
  const TrainResult r = trainPan(b, EncoderSpec{}, csmConfig(4, Supervision::kUnsupervised), c);
  ASSERT_TRUE(r.best_epoch.has_value());
  ASSERT_TRUE(r.best_val.has_value());
  double best = -1;
  std::size_t best_epoch = 0;
  std::size_t validated = 0;
  for (const auto& row : r.history) {
    if (!row.val_metric) continue;
    ++validated;
    if (*row.val_metric > best) {
      best = *row.val_metric;
      best_epoch = row.epoch;
    }
  }
  EXPECT_EQ(validated, 8u);
  EXPECT_EQ(*r.best_val, best);
  EXPECT_EQ(*r.best_epoch, best_epoch);
}

TEST(Triplet, WorkedExamples) {
  const std::vector<double> x{0, 0};
  const std::vector<double> near{1, 0};
  const std::vector<double> far{3, 0};
  EXPECT_DOUBLE_EQ(tripletLoss(x, near, far, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(tripletLoss(x, far, near, 1.0), 3.0);
  EXPECT_DOUBLE_EQ(tripletLoss(x, near, near, 0.5), 0.5);
  const std::vector<double> origin{0.0};
  const std::vector<double> one{1.0};
  const std::vector<double> three{3.0};
  EXPECT_EQ(tripletLoss(origin, one, three, 0.2), 0.0);
  // x == y leaves only the margin against the negative distance.
  EXPECT_DOUBLE_EQ(tripletLoss(one, one, three, 2.5), 0.5);
  EXPECT_EQ(tripletLoss(one, one, three, 1.5), 0.0);
}

TEST(Siamese, RejectsNodeLinkedToEverything) {
  DatasetBundle b = linearData(9, 40);
  std::vector<ItemPair> star;
  const auto& train = b.split("train");
  for (std::size_t t = 1; t < train.size(); ++t) star.emplace_back(train[0], train[t]);
  b.graph = SimilarityGraph(b.n(), star);
  EXPECT_THROW(trainSiameseBaseline(b, EncoderSpec{}, 1.0, quickConfig()), SamplingError);
}

TEST(Siamese, LearnsLinearSeparableTask) {
  const DatasetBundle b = linearData(10, 200);
  TrainConfig c = quickConfig();
  c.epochs = 100;
  c.pairs_per_class = 200;
  EncoderSpec mlp;
  mlp.kind = EncoderKind::kMlp;
  mlp.layer_dims = {8};
  const SiameseModel m = trainSiameseBaseline(b, mlp, 1.0, c);
  EXPECT_GE(heldoutPairAccuracy(SiameseScorer(m), b, "test", 300, 2).value, 0.9);
}

TEST(Multitask, ZeroLambdaIgnoresAttributeValues) {
  DatasetBundle b = linearData(11);
  TrainConfig c = quickConfig();
  c.lambda = 0.0;
  const MultitaskModel a = trainMultitaskBaseline(b, EncoderSpec{}, c);
  b.attributes = randomizeLabels(*b.attributes, 5);
  const MultitaskModel r = trainMultitaskBaseline(b, EncoderSpec{}, c);
  EXPECT_EQ(a.link.w, r.link.w);
  EXPECT_EQ(a.link.b, r.link.b);
  // The attribute term reaches the link head only through a shared encoder.
  EncoderSpec mlp;
  mlp.kind = EncoderKind::kMlp;
  mlp.layer_dims = {5};
  const Matrix link_only = trainMultitaskBaseline(b, mlp, c).link.w;
  c.lambda = 1.0;
  EXPECT_NE(trainMultitaskBaseline(b, mlp, c).link.w, link_only);
}

TEST(Multitask, AttributeHeadRanksAttributes) {
  const DatasetBundle b = linearData(12, 200);
  TrainConfig c = quickConfig();
  c.epochs = 150;
  c.lambda = 1.0;
  const MultitaskModel m = trainMultitaskBaseline(b, EncoderSpec{}, c);
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < b.n(); ++i) {
      double logit = m.attr_b[k];
      for (std::size_t col = 0; col < 6; ++col) logit += b.features(i, col) * m.attr_w(col, k);
      scores.push_back(logit);
      labels.push_back(b.attributes->values(i, k) == 1.0 ? 1 : 0);
    }
    EXPECT_GE(averagePrecision(scores, labels).value(), 0.99) << k;
  }
  const MultitaskModel again = trainMultitaskBaseline(b, EncoderSpec{}, c);
  EXPECT_EQ(again.attr_w, m.attr_w);
  EXPECT_EQ(again.link.w, m.link.w);
}

TEST(AttrSimilarity, ConcatClassifierFitsLinearRule) {
  // Link iff either item has attribute 0: linear in [a_i ; a_j].
  const DatasetBundle b = linearData(13, 120);
  const Matrix& a = b.attributes->values;
  std::vector<ItemPair> edges;
  for (std::size_t i = 0; i < b.n(); ++i)
    for (std::size_t j = i + 1; j < b.n(); ++j)
      if (a(i, 0) + a(j, 0) >= 1.0) edges.emplace_back(i, j);
  const SimilarityGraph g(b.n(), edges);
  std::vector<std::size_t> all(b.n());
  for (std::size_t i = 0; i < b.n(); ++i) all[i] = i;
  TrainConfig c = quickConfig();
  c.epochs = 200;
  c.learning_rate = 0.1;
  const LinkHead head = trainConcatPairClassifier(a, g, all, c);
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < b.n(); ++i) {
    for (std::size_t j = i + 1; j < b.n(); ++j) {
      double logit = head.b[0];
      for (std::size_t k = 0; k < 4; ++k) logit += a(i, k) * head.w(k, 0) + a(j, k) * head.w(4 + k, 0);
      correct += (logit > 0) == g.hasEdge(i, j);
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(correct) / total, 0.99);
}

TEST(AttrSimilarity, TrainsEndToEnd) {
  const DatasetBundle b = linearData(14);
  const AttrSimilarityModel m = trainAttrSimilarityBaseline(b, EncoderSpec{}, quickConfig());
  EXPECT_EQ(m.pair_w.rows(), 8u);
  const Matrix pred = m.predictAttributes(b.features, SimilarityGraph(b.n()));
  EXPECT_EQ(pred.rows(), b.n());
  EXPECT_EQ(pred.cols(), 4u);
  const AttrSimilarityModel again = trainAttrSimilarityBaseline(b, EncoderSpec{}, quickConfig());
  EXPECT_EQ(again.pair_w, m.pair_w);
  EXPECT_EQ(again.attr_w, m.attr_w);
}

}  // namespace
}  // namespace pan
