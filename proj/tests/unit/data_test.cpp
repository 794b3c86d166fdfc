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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "oracles.hpp"
#include "pan/data.hpp"
#include "pan/errors.hpp"

namespace pan {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pan_data_test_" + name);
  fs::remove_all(p);
  return p;
}

SyntheticSpec smallCompat() {
  SyntheticSpec s;
  s.n_items = 240;
  s.d = 12;
  s.m_attributes = 6;
  return s;
}

// Recovers the hidden manifestation of every present attribute from the hue axis.
std::vector<int> hueSigns(const DatasetBundle& b, std::size_t m) {
  std::vector<int> out(b.n() * m, 0);
  for (std::size_t i = 0; i < b.n(); ++i)
    for (std::size_t k = 0; k < m; ++k)
      if (b.attributes->values(i, k) == 1.0) out[i * m + k] = b.features(i, k) > 0 ? 1 : -1;
  return out;
}

TEST(PresenceOracle, MatchesHypergeometricForm) {
  for (std::size_t m : {3u, 4u, 6u, 8u}) {
    for (std::size_t r = 1; r <= std::min<std::size_t>(m, 3); ++r) {
      for (std::size_t k : {1u, 2u, 3u}) {
        const OracleReport got = manifestationOracle(m, r, k);
        const auto [rate, p_link] = oracle::manifestationBayes(m, r, k);
        EXPECT_NEAR(got.link_rate, p_link, 1e-12) << m << " " << r << " " << k;
        if (p_link > 0.0 && p_link < 1.0) {
          EXPECT_NEAR(got.presence_bayes_rate, rate, 1e-12) << m << " " << r << " " << k;
        }
        EXPECT_EQ(got.presence_patterns, static_cast<std::size_t>(oracle::choose(m, r)));
      }
    }
  }
}

TEST(PresenceOracle, SingleManifestationLosesNothing) {
  EXPECT_DOUBLE_EQ(manifestationOracle(6, 2, 1).presence_bayes_rate, 1.0);
  SyntheticSpec s = smallCompat();
  s.manifestation_count = 1;
  s.noise_sd = 0.0;
  EXPECT_DOUBLE_EQ(genCompatibilityManifestation(s, 1).oracle.presence_bayes_rate, 1.0);
}

TEST(PresenceOracle, DefaultConfiguration) {
  const OracleReport r = manifestationOracle(6, 2, 2);
  EXPECT_NEAR(r.link_rate, 17.0 / 60.0, 1e-12);
  EXPECT_NEAR(r.presence_bayes_rate, 0.784542, 1e-6);
  EXPECT_LT(r.presence_bayes_rate, 0.8);
  EXPECT_THROW(manifestationOracle(17, 2, 2), ContractError);
  EXPECT_THROW(manifestationOracle(4, 5, 2), ContractError);
}

TEST(CompatManifest, StructureAndLinkRule) {
  const SyntheticSpec spec = smallCompat();
  const GeneratedDataset g = genCompatibilityManifestation(spec, 7);
  const DatasetBundle& b = g.bundle;
  ASSERT_TRUE(b.attributes.has_value());
  EXPECT_EQ(b.n(), 240u);
  EXPECT_EQ(b.features.cols(), 12u);
  EXPECT_EQ(b.categories.size(), 240u);
  EXPECT_EQ(b.split("train").size(), 168u);
  EXPECT_EQ(b.split("val").size(), 36u);
  EXPECT_EQ(b.split("test").size(), 36u);
  const std::size_t m = 6;
  for (std::size_t i = 0; i < b.n(); ++i) {
    double count = 0;
    for (std::size_t k = 0; k < m; ++k) count += b.attributes->values(i, k);
    EXPECT_EQ(count, 2.0);
  }
  std::vector<int> owner(b.n());
  int id = 0;
  for (const auto& [name, items] : b.splits) {
    for (std::size_t i : items) owner[i] = id;
    ++id;
  }
  const auto hue = hueSigns(b, m);
  std::size_t within = 0;
  std::size_t linked = 0;
  for (std::size_t i = 0; i < b.n(); ++i) {
    for (std::size_t j = i + 1; j < b.n(); ++j) {
      bool any = false;
      bool agree = true;
      for (std::size_t k = 0; k < m; ++k) {
        if (hue[i * m + k] == 0 || hue[j * m + k] == 0) continue;
        any = true;
        agree = agree && hue[i * m + k] == hue[j * m + k];
      }
      const bool expected = owner[i] == owner[j] && any && agree;
      ASSERT_EQ(b.graph.hasEdge(i, j), expected) << i << "," << j;
      if (owner[i] == owner[j]) {
        ++within;
        linked += expected;
      }
    }
  }
  // Empirical link rate near the analytic 17/60.
  EXPECT_NEAR(static_cast<double>(linked) / within, 17.0 / 60.0, 0.03);
  EXPECT_NEAR(g.oracle.presence_bayes_rate, 0.784542, 1e-6);
}

TEST(CompatManifest, SetsAreLinkedCliquesWithinOneSplit) {
  const DatasetBundle b = genCompatibilityManifestation(smallCompat(), 3).bundle;
  std::size_t total = 0;
  for (const auto& [name, sets] : b.sets) {
    const auto& items = b.split(name);
    for (const auto& set : sets) {
      ++total;
      ASSERT_GE(set.size(), 2u);
      ASSERT_LE(set.size(), 5u);
      std::set<int> cats;
      for (std::size_t a = 0; a < set.size(); ++a) {
        EXPECT_TRUE(std::binary_search(items.begin(), items.end(), set[a]));
        cats.insert(b.categories[set[a]]);
        for (std::size_t c = a + 1; c < set.size(); ++c) EXPECT_TRUE(b.graph.hasEdge(set[a], set[c]));
      }
      EXPECT_EQ(cats.size(), set.size());
    }
  }
  EXPECT_GT(total, 20u);
}

TEST(CompatManifest, SeedDeterminism) {
  const auto a = genCompatibilityManifestation(smallCompat(), 11).bundle;
  const auto b = genCompatibilityManifestation(smallCompat(), 11).bundle;
  const auto c = genCompatibilityManifestation(smallCompat(), 12).bundle;
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.graph, b.graph);
  EXPECT_EQ(a.sets, b.sets);
  EXPECT_NE(a.features, c.features);
}

TEST(CompatManifest, RejectsTooFewAxes) {
  SyntheticSpec s = smallCompat();
  s.d = 11;
  EXPECT_THROW(genCompatibilityManifestation(s, 1), ContractError);
  s.d = 12;
  s.attributes_per_item = 7;
  EXPECT_THROW(genCompatibilityManifestation(s, 1), ContractError);
}

SyntheticSpec fewShotSpec() {
  SyntheticSpec s;
  s.task_kind = TaskKind::kFewShotClusters;
  s.n_items = 400;
  s.d = 16;
  s.m_attributes = 6;
  s.n_classes = 20;
  s.separation = 1.0;
  s.noise_sd = 0.05;
  s.train_fraction = 0.5;
  s.val_fraction = 0.25;
  return s;
}

TEST(FewShotClusters, ClassDisjointSplitsAndExclusivePairs) {
  const DatasetBundle b = genFewShotClusters(fewShotSpec(), 5);
  std::map<std::string, std::set<int>> classes;
  for (const auto& [name, items] : b.splits)
    for (std::size_t i : items) classes[name].insert(b.classes[i]);
  EXPECT_EQ(classes["base"].size(), 10u);
  EXPECT_EQ(classes["val"].size(), 5u);
  EXPECT_EQ(classes["novel"].size(), 5u);
  for (int c : classes["base"]) {
    EXPECT_FALSE(classes["val"].count(c));
    EXPECT_FALSE(classes["novel"].count(c));
  }
  for (std::size_t i = 0; i < b.n(); ++i) {
    for (std::size_t k = 0; k + 1 < 6; k += 2) {
      EXPECT_LE(b.attributes->values(i, k) + b.attributes->values(i, k + 1), 1.0);
    }
  }
  for (const auto& [i, j] : b.graph.edges()) EXPECT_EQ(b.classes[i], b.classes[j]);
  // Same-class items inside a split are all linked.
  const auto& base = b.split("base");
  std::size_t same = 0;
  for (std::size_t a = 0; a < base.size(); ++a)
    for (std::size_t c = a + 1; c < base.size(); ++c) same += b.classes[base[a]] == b.classes[base[c]];
  std::size_t base_edges = 0;
  for (const auto& [i, j] : b.graph.edges()) base_edges += std::binary_search(base.begin(), base.end(), i);
  EXPECT_EQ(base_edges, same);
}

TEST(FewShotClusters, NearestCentroidSeparatesClasses) {
  const DatasetBundle b = genFewShotClusters(fewShotSpec(), 9);
  const std::size_t c_count = 20;
  const std::size_t d = b.features.cols();
  std::vector<std::vector<double>> mean(c_count, std::vector<double>(d, 0.0));
  std::vector<double> count(c_count, 0.0);
  for (std::size_t i = 0; i < b.n(); ++i) {
    count[b.classes[i]] += 1;
    for (std::size_t c = 0; c < d; ++c) mean[b.classes[i]][c] += b.features(i, c);
  }
  for (std::size_t k = 0; k < c_count; ++k)
    for (double& v : mean[k]) v /= count[k];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < b.n(); ++i) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t k = 0; k < c_count; ++k) {
      double dist = 0;
      for (std::size_t c = 0; c < d; ++c) dist += (b.features(i, c) - mean[k][c]) * (b.features(i, c) - mean[k][c]);
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
    correct += static_cast<int>(best) == b.classes[i];
  }
  EXPECT_GE(static_cast<double>(correct) / b.n(), 0.99);
}

TEST(LinearSeparable, SignMatchesAttributes) {
  SyntheticSpec s;
  s.task_kind = TaskKind::kLinearSeparable;
  s.n_items = 100;
  s.d = 8;
  s.m_attributes = 4;
  s.noise_sd = 0.1;
  const DatasetBundle b = genLinearSeparable(s, 2);
  for (std::size_t i = 0; i < b.n(); ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(b.features(i, k) > 0, b.attributes->values(i, k) == 1.0);
  for (const auto& [i, j] : b.graph.edges()) EXPECT_EQ(b.attributes->values(i, 0), b.attributes->values(j, 0));
}

TEST(TaskKindNames, RoundTrip) {
  for (auto k : {TaskKind::kCompatibilityManifestation, TaskKind::kFewShotClusters, TaskKind::kLinearSeparable})
    EXPECT_EQ(parseTaskKind(toString(k)), k);
  EXPECT_THROW(parseTaskKind("nope"), ParseError);
}

TEST(Fitb, QuestionsHoldOneAnswerAndSameCategoryDistractors) {
  const DatasetBundle b = genCompatibilityManifestation(smallCompat(), 4).bundle;
  const auto& sets = b.sets.at("train");
  const auto qs = buildFitbQuestions(sets, 4, b.categories, b.split("train"), 8);
  ASSERT_EQ(qs.size(), sets.size());
  std::vector<std::size_t> answer_positions(4, 0);
  for (std::size_t q = 0; q < qs.size(); ++q) {
    const auto& set = sets[q];
    ASSERT_EQ(qs[q].candidates.size(), 4u);
    EXPECT_EQ(qs[q].question_items.size(), set.size() - 1);
    const std::size_t answer = qs[q].candidates[qs[q].answer_index];
    ++answer_positions[qs[q].answer_index];
    EXPECT_NE(std::find(set.begin(), set.end(), answer), set.end());
    EXPECT_EQ(std::find(qs[q].question_items.begin(), qs[q].question_items.end(), answer),
              qs[q].question_items.end());
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_EQ(b.categories[qs[q].candidates[c]], b.categories[answer]);
      if (c != qs[q].answer_index) EXPECT_EQ(std::find(set.begin(), set.end(), qs[q].candidates[c]), set.end());
    }
  }
  for (std::size_t c : answer_positions) EXPECT_GT(c, 0u);
  EXPECT_EQ(qs.front().candidates, buildFitbQuestions(sets, 4, b.categories, b.split("train"), 8).front().candidates);
}

TEST(Fitb, SingleChoiceHoldsOnlyTheAnswer) {
  const ItemSets sets{{0, 1, 2}};
  const std::vector<int> cats{0, 1, 2};
  const auto qs = buildFitbQuestions(sets, 1, cats, {0, 1, 2}, 3);
  ASSERT_EQ(qs.size(), 1u);
  ASSERT_EQ(qs[0].candidates.size(), 1u);
  EXPECT_EQ(qs[0].answer_index, 0u);
  EXPECT_EQ(qs[0].question_items.size(), 2u);
}

TEST(Fitb, FailsWhenCategoryIsTooSmall) {
  const ItemSets sets{{0, 1}};
  const std::vector<int> cats{0, 1, 1};
  EXPECT_THROW(buildFitbQuestions(sets, 3, cats, {0, 1, 2}, 1), GenerationError);
  EXPECT_THROW(buildFitbQuestions({{0}}, 2, cats, {0, 1, 2}, 1), ContractError);
}

TEST(NegativeSets, ReplaceWithinCategory) {
  const DatasetBundle b = genCompatibilityManifestation(smallCompat(), 6).bundle;
  const auto& sets = b.sets.at("train");
  const auto neg = resampleNegativeSets(sets, b.categories, b.split("train"), 2);
  ASSERT_EQ(neg.size(), sets.size());
  std::size_t full_replacements = 0;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    ASSERT_EQ(neg[s].size(), sets[s].size());
    std::size_t changed = 0;
    for (std::size_t t = 0; t < sets[s].size(); ++t) {
      EXPECT_EQ(b.categories[neg[s][t]], b.categories[sets[s][t]]);
      if (neg[s][t] != sets[s][t]) {
        ++changed;
        EXPECT_EQ(std::find(sets[s].begin(), sets[s].end(), neg[s][t]), sets[s].end());
      }
    }
    EXPECT_GE(changed, 1u);
    full_replacements += changed == sets[s].size();
    EXPECT_EQ(std::set<std::size_t>(neg[s].begin(), neg[s].end()).size(), neg[s].size());
  }
  EXPECT_GT(full_replacements, 0u);
}

TEST(Episodes, ShapeAndDisjointness) {
  const DatasetBundle b = genFewShotClusters(fewShotSpec(), 5);
  const auto eps = buildEpisodes(b, "novel", 5, 5, 10, 30, 4);
  ASSERT_EQ(eps.size(), 30u);
  const auto& novel = b.split("novel");
  for (const auto& ep : eps) {
    ASSERT_EQ(ep.support.size(), 5u);
    ASSERT_EQ(ep.query.size(), 50u);
    std::set<std::size_t> seen;
    std::set<int> cls;
    for (std::size_t w = 0; w < 5; ++w) {
      ASSERT_EQ(ep.support[w].size(), 5u);
      cls.insert(b.classes[ep.support[w][0]]);
      for (std::size_t i : ep.support[w]) {
        EXPECT_TRUE(seen.insert(i).second);
        EXPECT_EQ(b.classes[i], b.classes[ep.support[w][0]]);
        EXPECT_TRUE(std::binary_search(novel.begin(), novel.end(), i));
      }
    }
    EXPECT_EQ(cls.size(), 5u);
    for (const auto& [i, w] : ep.query) {
      EXPECT_TRUE(seen.insert(i).second);
      EXPECT_EQ(b.classes[i], b.classes[ep.support[w][0]]);
    }
  }
  EXPECT_THROW(buildEpisodes(b, "novel", 6, 5, 10, 1, 4), GenerationError);
  EXPECT_THROW(buildEpisodes(b, "novel", 5, 15, 10, 1, 4), GenerationError);
}

TEST(Bundle, RoundTrip) {
  const auto dir = scratch("roundtrip");
  const DatasetBundle b = genCompatibilityManifestation(smallCompat(), 13).bundle;
  saveBundle(b, dir.string());
  for (auto path : {dir, dir / "manifest.json"}) {
    const DatasetBundle r = loadBundle(path.string());
    EXPECT_EQ(r.features, b.features);
    EXPECT_EQ(r.graph, b.graph);
    EXPECT_EQ(r.splits, b.splits);
    EXPECT_EQ(r.sets, b.sets);
    EXPECT_EQ(r.categories, b.categories);
    ASSERT_TRUE(r.attributes.has_value());
    EXPECT_EQ(r.attributes->values, b.attributes->values);
    EXPECT_EQ(r.attributes->mask, b.attributes->mask);
  }
  fs::remove_all(dir);
}

TEST(Bundle, FewShotRoundTripKeepsClasses) {
  const auto dir = scratch("fewshot");
  const DatasetBundle b = genFewShotClusters(fewShotSpec(), 2);
  saveBundle(b, dir.string());
  const DatasetBundle r = loadBundle(dir.string());
  EXPECT_EQ(r.classes, b.classes);
  EXPECT_EQ(r.splits, b.splits);
  fs::remove_all(dir);
}

TEST(Bundle, DetectsTruncationAndMissingFiles) {
  const auto dir = scratch("truncated");
  saveBundle(genCompatibilityManifestation(smallCompat(), 1).bundle, dir.string());
  {
    const auto p = dir / "features.panf";
    const auto size = fs::file_size(p);
    fs::resize_file(p, size - 4);
  }
  EXPECT_THROW(loadBundle(dir.string()), ParseError);
  try {
    readFeatures((dir / "features.panf").string());
    ADD_FAILURE() << "truncated file accepted";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("expected " + std::to_string(12 + 240 * 12 * 4) + " bytes"), std::string::npos) << what;
    EXPECT_NE(what.find(std::to_string(12 + 240 * 12 * 4 - 4)), std::string::npos) << what;
  }
  fs::remove_all(dir);
  saveBundle(genCompatibilityManifestation(smallCompat(), 1).bundle, dir.string());
  fs::remove(dir / "graph.csv");
  EXPECT_THROW(loadBundle(dir.string()), IoError);
  EXPECT_THROW(loadBundle((dir / "nothing").string()), IoError);
  fs::remove_all(dir);
}

TEST(Bundle, ValidateRejectsCrossSplitEdges) {
  DatasetBundle b = genCompatibilityManifestation(smallCompat(), 1).bundle;
  const std::size_t a = b.split("train").front();
  const std::size_t c = b.split("test").front();
  b.graph = SimilarityGraph(b.n(), {{std::min(a, c), std::max(a, c)}});
  EXPECT_THROW(b.validate(), ContractError);
  b.graph = SimilarityGraph(b.n());
  b.splits["test"].push_back(a);
  EXPECT_THROW(b.validate(), ContractError);
}

}  // namespace
}  // namespace pan
