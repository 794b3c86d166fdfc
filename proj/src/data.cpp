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

#include "pan/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pan/errors.hpp"
#include "pan/io.hpp"
#include "pan/rng.hpp"

namespace pan {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::size_t>& DatasetBundle::split(const std::string& name) const {
  const auto it = splits.find(name);
  if (it == splits.end()) throw ContractError("bundle has no split named '" + name + "'");
  return it->second;
}

void DatasetBundle::validate() const {
  const std::size_t n_items = n();
  if (graph.n() != n_items) {
    throw DimensionError("graph has " + std::to_string(graph.n()) + " nodes, features have " +
                         std::to_string(n_items) + " rows");
  }
  if (attributes) {
    attributes->validate();
    if (attributes->n() != n_items) {
      throw DimensionError("attribute table has " + std::to_string(attributes->n()) +
                           " rows, features have " + std::to_string(n_items));
    }
  }
  if (!categories.empty() && categories.size() != n_items) {
    throw DimensionError("category list has " + std::to_string(categories.size()) + " entries");
  }
  if (!classes.empty() && classes.size() != n_items) {
    throw DimensionError("class list has " + std::to_string(classes.size()) + " entries");
  }
  std::vector<int> owner(n_items, -1);
  int split_id = 0;
  for (const auto& [name, items] : splits) {
    for (std::size_t i : items) {
      if (i >= n_items) throw IndexError("split '" + name + "' holds out-of-range item " + std::to_string(i));
      if (owner[i] != -1) throw ContractError("item " + std::to_string(i) + " appears in two splits");
      owner[i] = split_id;
    }
    ++split_id;
  }
  if (!splits.empty()) {
    for (const auto& [i, j] : graph.edges()) {
      if (owner[i] != owner[j]) {
        throw ContractError("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") crosses a split boundary");
      }
    }
  }
  for (const auto& [name, group] : sets) {
    for (const auto& s : group) {
      for (std::size_t i : s) {
        if (i >= n_items) throw IndexError("set in '" + name + "' holds out-of-range item " + std::to_string(i));
      }
    }
  }
}

TaskKind parseTaskKind(const std::string& text) {
  if (text == "compat-manifest") return TaskKind::kCompatibilityManifestation;
  if (text == "fewshot-clusters") return TaskKind::kFewShotClusters;
  if (text == "linear-separable") return TaskKind::kLinearSeparable;
  throw ParseError("unknown task '" + text + "'");
}

std::string toString(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCompatibilityManifestation:
      return "compat-manifest";
    case TaskKind::kFewShotClusters:
      return "fewshot-clusters";
    case TaskKind::kLinearSeparable:
      return "linear-separable";
  }
  return "compat-manifest";
}

void SyntheticSpec::validate() const {
  if (n_items < 1 || d < 1 || m_attributes < 1 || manifestation_count < 1 ||
      attributes_per_item < 1 || category_count < 1 || n_classes < 1) {
    throw ContractError("synthetic counts must all be >= 1");
  }
  if (!(noise_sd >= 0.0) || !(shade_sd >= 0.0) || !(separation >= 0.0)) {
    throw ContractError("noise_sd, shade_sd and separation must be >= 0");
  }
  if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction > 1.0) {
    throw ContractError("split fractions must be positive and sum to at most 1");
  }
  switch (task_kind) {
    case TaskKind::kCompatibilityManifestation:
      if (2 * m_attributes > d) {
        throw ContractError("compat-manifest needs d >= 2*m (two axes per attribute), got d=" +
                            std::to_string(d) + " m=" + std::to_string(m_attributes));
      }
      if (attributes_per_item > m_attributes) {
        throw ContractError("attributes_per_item exceeds m_attributes");
      }
      break;
    case TaskKind::kLinearSeparable:
      if (m_attributes > d) throw ContractError("linear-separable needs d >= m");
      break;
    case TaskKind::kFewShotClusters:
      if (n_classes > n_items) throw ContractError("more classes than items");
      break;
  }
}

namespace {

std::vector<std::size_t> permutation(std::size_t n, Engine& engine) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[uniformIndex(engine, i)]);
  return p;
}

// Splits a shuffled list by the configured fractions into three named groups.
std::map<std::string, std::vector<std::size_t>> splitList(std::vector<std::size_t> order,
                                                          const SyntheticSpec& spec,
                                                          const char* a, const char* b,
                                                          const char* c) {
  const std::size_t n = order.size();
  const auto n_a = static_cast<std::size_t>(std::floor(spec.train_fraction * n));
  const auto n_b = static_cast<std::size_t>(std::floor(spec.val_fraction * n));
  std::map<std::string, std::vector<std::size_t>> out;
  out[a].assign(order.begin(), order.begin() + n_a);
  out[b].assign(order.begin() + n_a, order.begin() + n_a + n_b);
  out[c].assign(order.begin() + n_a + n_b, order.end());
  for (auto& [name, v] : out) std::sort(v.begin(), v.end());
  return out;
}

std::vector<int> splitOwner(const DatasetBundle& b) {
  std::vector<int> owner(b.n(), -1);
  int id = 0;
  for (const auto& [name, items] : b.splits) {
    for (std::size_t i : items) owner[i] = id;
    ++id;
  }
  return owner;
}

// Links every within-split pair satisfying `linked`.
template <typename Rule>
SimilarityGraph buildGraph(const DatasetBundle& b, Rule linked) {
  const auto owner = splitOwner(b);
  std::vector<ItemPair> edges;
  for (std::size_t i = 0; i < b.n(); ++i)
    for (std::size_t j = i + 1; j < b.n(); ++j)
      if (owner[i] == owner[j] && linked(i, j)) edges.emplace_back(i, j);
  return SimilarityGraph(b.n(), std::move(edges));
}

// Greedy clique growth inside one split: seed item, then random members that
// link to everyone so far and add a new category.
ItemSets growSets(const DatasetBundle& b, const std::vector<std::size_t>& pool, std::size_t count,
                  Engine& engine) {
  ItemSets sets;
  if (pool.size() < 2) return sets;
  const std::size_t max_attempts = 20 * count + 20;
  for (std::size_t attempt = 0; attempt < max_attempts && sets.size() < count; ++attempt) {
    const std::size_t target = 2 + uniformIndex(engine, 4);
    std::vector<std::size_t> members{pool[uniformIndex(engine, pool.size())]};
    while (members.size() < target) {
      std::vector<std::size_t> options;
      for (std::size_t c : pool) {
        bool ok = true;
        for (std::size_t m : members) {
          if (c == m || b.categories[c] == b.categories[m] || !b.graph.hasEdge(c, m)) {
            ok = false;
            break;
          }
        }
        if (ok) options.push_back(c);
      }
      if (options.empty()) break;
      members.push_back(options[uniformIndex(engine, options.size())]);
    }
    if (members.size() >= 2) sets.push_back(std::move(members));
  }
  return sets;
}

}  // namespace

OracleReport manifestationOracle(std::size_t m, std::size_t per_item, std::size_t manifestations) {
  if (m > 16) throw ContractError("presence oracle enumeration is limited to m <= 16");
  if (per_item > m || per_item < 1 || manifestations < 1) {
    throw ContractError("presence oracle needs 1 <= attributes_per_item <= m");
  }
  std::vector<std::uint32_t> patterns;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) == per_item) patterns.push_back(mask);
  }
  // Unnormalized link / no-link mass per ordered pattern pair. Every pair has
  // equal prior weight, so normalization is deferred to one final division.
  std::vector<double> link_mass;
  std::vector<double> none_mass;
  double link_total = 0.0;
  double none_total = 0.0;
  for (std::uint32_t a : patterns) {
    for (std::uint32_t b : patterns) {
      const int shared = std::popcount(a & b);
      const double given = shared == 0 ? 0.0 : std::pow(static_cast<double>(manifestations), -shared);
      link_mass.push_back(given);
      none_mass.push_back(1.0 - given);
      link_total += given;
      none_total += 1.0 - given;
    }
  }
  OracleReport r;
  r.link_rate = link_total / static_cast<double>(link_mass.size());
  r.presence_patterns = patterns.size();
  if (link_total <= 0.0 || none_total <= 0.0) {
    r.presence_bayes_rate = 1.0;
    return r;
  }
  // Balanced accuracy: 0.5 * sum max(l / L, n / N) = 0.5 * sum max(l N, n L) / (L N).
  double best = 0.0;
  for (std::size_t e = 0; e < link_mass.size(); ++e) {
    best += std::max(link_mass[e] * none_total, none_mass[e] * link_total);
  }
  r.presence_bayes_rate = 0.5 * best / (link_total * none_total);
  return r;
}

GeneratedDataset genCompatibilityManifestation(const SyntheticSpec& spec, std::uint64_t seed) {
  SyntheticSpec s = spec;
  s.task_kind = TaskKind::kCompatibilityManifestation;
  s.validate();
  const std::size_t n = s.n_items;
  const std::size_t m = s.m_attributes;
  const std::size_t k_man = s.manifestation_count;
  Engine attr_rng = makeEngine(seed, "gen.attributes");
  Engine feat_rng = makeEngine(seed, "gen.features");
  Engine split_rng = makeEngine(seed, "gen.splits");
  Engine set_rng = makeEngine(seed, "gen.sets");

  Matrix values(n, m);
  std::vector<std::size_t> manifestation(n * m, 0);
  std::vector<int> categories(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto order = permutation(m, attr_rng);
    for (std::size_t t = 0; t < s.attributes_per_item; ++t) {
      values(i, order[t]) = 1.0;
      manifestation[i * m + order[t]] = uniformIndex(attr_rng, k_man);
    }
    categories[i] = static_cast<int>(uniformIndex(attr_rng, s.category_count));
  }

  Matrix x(n, s.d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < s.d; ++c) x(i, c) = s.noise_sd * standardNormal(feat_rng);
    for (std::size_t k = 0; k < m; ++k) {
      if (values(i, k) != 1.0) continue;
      const std::size_t u = manifestation[i * m + k];
      const double hue = k_man == 1 ? 1.0 : 1.0 - 2.0 * static_cast<double>(u) / (k_man - 1);
      x(i, k) += hue;
      x(i, m + k) += 1.0 + s.shade_sd * standardNormal(feat_rng);
    }
  }

  GeneratedDataset out;
  DatasetBundle& b = out.bundle;
  b.features = roundToFloat32(x);
  b.attributes = AttributeTable::fullyLabeled(values);
  b.categories = std::move(categories);
  b.splits = splitList(permutation(n, split_rng), s, "train", "val", "test");
  b.graph = buildGraph(b, [&](std::size_t i, std::size_t j) {
    bool any = false;
    for (std::size_t k = 0; k < m; ++k) {
      if (values(i, k) != 1.0 || values(j, k) != 1.0) continue;
      if (manifestation[i * m + k] != manifestation[j * m + k]) return false;
      any = true;
    }
    return any;
  });
  for (const auto& [name, items] : b.splits) {
    b.sets[name] = growSets(b, items, items.size() / 4, set_rng);
  }
  b.validate();
  out.oracle = manifestationOracle(m, s.attributes_per_item, k_man);
  return out;
}

DatasetBundle genFewShotClusters(const SyntheticSpec& spec, std::uint64_t seed) {
  SyntheticSpec s = spec;
  s.task_kind = TaskKind::kFewShotClusters;
  s.validate();
  const std::size_t n = s.n_items;
  const std::size_t m = s.m_attributes;
  const std::size_t c_count = s.n_classes;
  Engine center_rng = makeEngine(seed, "gen.centers");
  Engine feat_rng = makeEngine(seed, "gen.features");
  Engine attr_rng = makeEngine(seed, "gen.attributes");
  Engine split_rng = makeEngine(seed, "gen.splits");

  Matrix centers(c_count, s.d);
  for (std::size_t c = 0; c < c_count; ++c) {
    double norm = 0.0;
    while (norm == 0.0) {
      norm = 0.0;
      for (double& v : centers.row(c)) {
        v = standardNormal(center_rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
    }
    for (double& v : centers.row(c)) v *= s.separation / norm;
  }

  // Signature per class: each pair (2t, 2t+1) holds the first, the second, or
  // neither; a trailing odd attribute is a coin flip.
  Matrix signature(c_count, m);
  for (std::size_t c = 0; c < c_count; ++c) {
    for (std::size_t k = 0; k + 1 < m; k += 2) {
      const std::size_t pick = uniformIndex(attr_rng, 3);
      if (pick < 2) signature(c, k + pick) = 1.0;
    }
    if (m % 2 == 1) signature(c, m - 1) = static_cast<double>(uniformIndex(attr_rng, 2));
  }

  DatasetBundle b;
  b.classes.resize(n);
  Matrix x(n, s.d);
  Matrix values(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % c_count;
    b.classes[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < s.d; ++j) x(i, j) = centers(c, j) + s.noise_sd * standardNormal(feat_rng);
    for (std::size_t k = 0; k < m; ++k) values(i, k) = signature(c, k);
  }
  b.features = roundToFloat32(x);
  b.attributes = AttributeTable::fullyLabeled(values);

  const auto class_split = splitList(permutation(c_count, split_rng), s, "base", "val", "novel");
  for (const auto& [name, cls] : class_split) {
    auto& items = b.splits[name];
    for (std::size_t i = 0; i < n; ++i) {
      if (std::binary_search(cls.begin(), cls.end(), static_cast<std::size_t>(b.classes[i]))) {
        items.push_back(i);
      }
    }
  }
  b.graph = buildGraph(b, [&](std::size_t i, std::size_t j) { return b.classes[i] == b.classes[j]; });
  b.validate();
  return b;
}

DatasetBundle genLinearSeparable(const SyntheticSpec& spec, std::uint64_t seed) {
  SyntheticSpec s = spec;
  s.task_kind = TaskKind::kLinearSeparable;
  s.validate();
  const std::size_t n = s.n_items;
  const std::size_t m = s.m_attributes;
  Engine attr_rng = makeEngine(seed, "gen.attributes");
  Engine feat_rng = makeEngine(seed, "gen.features");
  Engine split_rng = makeEngine(seed, "gen.splits");
  Matrix values(n, m);
  for (double& v : values.data()) v = static_cast<double>(uniformIndex(attr_rng, 2));
  Matrix x(n, s.d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < s.d; ++c) {
      const double base = c < m ? 2.0 * values(i, c) - 1.0 : 0.0;
      x(i, c) = base + s.noise_sd * standardNormal(feat_rng);
    }
  }
  DatasetBundle b;
  b.features = roundToFloat32(x);
  b.attributes = AttributeTable::fullyLabeled(values);
  b.splits = splitList(permutation(n, split_rng), s, "train", "val", "test");
  b.graph = buildGraph(b, [&](std::size_t i, std::size_t j) { return values(i, 0) == values(j, 0); });
  b.validate();
  return b;
}

GeneratedDataset generate(const SyntheticSpec& spec, std::uint64_t seed) {
  switch (spec.task_kind) {
    case TaskKind::kCompatibilityManifestation:
      return genCompatibilityManifestation(spec, seed);
    case TaskKind::kFewShotClusters:
      return {genFewShotClusters(spec, seed), OracleReport{}};
    case TaskKind::kLinearSeparable:
      return {genLinearSeparable(spec, seed), OracleReport{}};
  }
  throw ContractError("unknown task kind");
}

namespace {

// Items of `pool` with category `cat`, excluding `exclude`.
std::vector<std::size_t> sameCategory(const std::vector<std::size_t>& pool,
                                      const std::vector<int>& categories, int cat,
                                      const std::vector<std::size_t>& exclude) {
  std::vector<std::size_t> out;
  for (std::size_t i : pool) {
    if (i >= categories.size()) throw IndexError("pool item " + std::to_string(i) + " has no category");
    if (categories[i] != cat) continue;
    if (std::find(exclude.begin(), exclude.end(), i) != exclude.end()) continue;
    out.push_back(i);
  }
  return out;
}

// k distinct draws from `from`, in draw order.
std::vector<std::size_t> drawDistinct(std::vector<std::size_t> from, std::size_t k, Engine& engine) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t pick = uniformIndex(engine, from.size());
    out.push_back(from[pick]);
    from.erase(from.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

}  // namespace

std::vector<FitbQuestion> buildFitbQuestions(const ItemSets& sets, std::size_t num_choices,
                                             const std::vector<int>& categories,
                                             const std::vector<std::size_t>& pool,
                                             std::uint64_t seed) {
  if (num_choices < 1) throw ContractError("FITB needs at least one candidate");
  Engine engine = makeEngine(seed, "data.fitb");
  std::vector<FitbQuestion> questions;
  for (const auto& set : sets) {
    if (set.size() < 2) throw ContractError("FITB sets need at least two items");
    const std::size_t answer_pos = uniformIndex(engine, set.size());
    const std::size_t answer = set[answer_pos];
    const int cat = categories.at(answer);
    const auto options = sameCategory(pool, categories, cat, set);
    if (options.size() < num_choices - 1) {
      throw GenerationError("category " + std::to_string(cat) + " has " +
                            std::to_string(options.size()) + " distractors, need " +
                            std::to_string(num_choices - 1));
    }
    FitbQuestion q;
    for (std::size_t t = 0; t < set.size(); ++t)
      if (t != answer_pos) q.question_items.push_back(set[t]);
    q.candidates = drawDistinct(options, num_choices - 1, engine);
    q.answer_index = uniformIndex(engine, num_choices);
    q.candidates.insert(q.candidates.begin() + static_cast<std::ptrdiff_t>(q.answer_index), answer);
    questions.push_back(std::move(q));
  }
  return questions;
}

ItemSets resampleNegativeSets(const ItemSets& sets, const std::vector<int>& categories,
                              const std::vector<std::size_t>& pool, std::uint64_t seed) {
  Engine engine = makeEngine(seed, "data.negatives");
  ItemSets out;
  for (const auto& set : sets) {
    if (set.empty()) throw ContractError("cannot resample an empty set");
    const std::size_t count = 1 + uniformIndex(engine, set.size());
    std::vector<std::size_t> positions(set.size());
    for (std::size_t t = 0; t < set.size(); ++t) positions[t] = t;
    const auto chosen = drawDistinct(positions, count, engine);
    std::vector<std::size_t> neg = set;
    for (std::size_t pos : chosen) {
      std::vector<std::size_t> exclude = set;
      exclude.insert(exclude.end(), neg.begin(), neg.end());
      const int cat = categories.at(set[pos]);
      const auto options = sameCategory(pool, categories, cat, exclude);
      if (options.empty()) {
        throw GenerationError("category " + std::to_string(cat) + " has no replacement items");
      }
      neg[pos] = options[uniformIndex(engine, options.size())];
    }
    out.push_back(std::move(neg));
  }
  return out;
}

std::vector<Episode> buildEpisodes(const DatasetBundle& bundle, const std::string& split,
                                   std::size_t n_way, std::size_t k_shot, std::size_t n_query,
                                   std::size_t count, std::uint64_t seed) {
  if (bundle.classes.empty()) throw ContractError("bundle has no class labels");
  if (n_way < 1 || k_shot < 1 || n_query < 1) throw ContractError("episodes need way, shot, query >= 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i : bundle.split(split)) by_class[bundle.classes[i]].push_back(i);
  std::vector<int> eligible;
  for (const auto& [c, items] : by_class)
    if (items.size() >= k_shot + n_query) eligible.push_back(c);
  if (eligible.size() < n_way) {
    throw GenerationError("split '" + split + "' has " + std::to_string(eligible.size()) +
                          " classes with " + std::to_string(k_shot + n_query) +
                          " items, need " + std::to_string(n_way));
  }
  Engine engine = makeEngine(seed, "data.episodes");
  std::vector<std::size_t> class_ids(eligible.size());
  for (std::size_t t = 0; t < eligible.size(); ++t) class_ids[t] = t;
  std::vector<Episode> episodes;
  for (std::size_t e = 0; e < count; ++e) {
    Episode ep;
    ep.n_way = n_way;
    ep.k_shot = k_shot;
    const auto picked = drawDistinct(class_ids, n_way, engine);
    for (std::size_t w = 0; w < n_way; ++w) {
      const auto draw = drawDistinct(by_class[eligible[picked[w]]], k_shot + n_query, engine);
      ep.support.emplace_back(draw.begin(), draw.begin() + static_cast<std::ptrdiff_t>(k_shot));
      for (std::size_t t = k_shot; t < draw.size(); ++t) ep.query.emplace_back(draw[t], w);
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

namespace {

const char* kFeatures = "features.panf";
const char* kGraph = "graph.csv";
const char* kSplits = "splits.json";
const char* kItems = "items.csv";
const char* kSets = "sets.json";
const char* kAttributes = "attributes.csv";
const char* kConfidence = "confidence.csv";
const char* kManifest = "manifest.json";

void writeGraphCsv(const SimilarityGraph& g, const std::string& path) {
  std::ostringstream out;
  out << "i,j\n";
  for (const auto& [i, j] : g.edges()) out << i << ',' << j << '\n';
  writeTextFile(path, out.str());
}

SimilarityGraph readGraphCsv(const std::string& path, std::size_t n) {
  const CsvTable csv = readCsv(path);
  if (csv.header != std::vector<std::string>{"i", "j"}) {
    throw ParseError(path + ": line 1: expected header i,j");
  }
  std::vector<ItemPair> edges;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const std::size_t line = r + 2;
    if (csv.rows[r].size() != 2) throw ParseError(path + ": line " + std::to_string(line) + ": expected 2 cells");
    const std::size_t i = parseIndex(csv.rows[r][0], path, line);
    const std::size_t j = parseIndex(csv.rows[r][1], path, line);
    if (i >= n || j >= n) {
      throw IndexError(path + ": line " + std::to_string(line) + ": node " +
                       std::to_string(std::max(i, j)) + " out of range for " + std::to_string(n) +
                       " items");
    }
    edges.emplace_back(i, j);
  }
  return SimilarityGraph(n, std::move(edges));
}

std::string dumpJson(const json& j) { return j.dump(2) + "\n"; }

json parseJsonFile(const std::string& path) {
  try {
    return json::parse(readTextFile(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

}  // namespace

void saveBundle(const DatasetBundle& bundle, const std::string& dir) {
  bundle.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };

  writeFeatures(bundle.features, path(kFeatures));
  writeGraphCsv(bundle.graph, path(kGraph));
  writeTextFile(path(kSplits), dumpJson(json(bundle.splits)));
  writeTextFile(path(kSets), dumpJson(json(bundle.sets)));
  std::ostringstream items;
  items << "item_id,category,class\n";
  for (std::size_t i = 0; i < bundle.n(); ++i) {
    items << i << ',' << (bundle.categories.empty() ? -1 : bundle.categories[i]) << ','
          << (bundle.classes.empty() ? -1 : bundle.classes[i]) << '\n';
  }
  writeTextFile(path(kItems), items.str());

  std::vector<const char*> files{kFeatures, kGraph, kSplits, kSets, kItems};
  if (bundle.attributes) {
    writeAttributeCsv(*bundle.attributes, path(kAttributes));
    files.push_back(kAttributes);
    if (bundle.attributes->confidence) {
      writeConfidenceCsv(*bundle.attributes, path(kConfidence));
      files.push_back(kConfidence);
    }
  }
  json manifest;
  manifest["format"] = "pan-bundle-1";
  manifest["n_items"] = bundle.n();
  manifest["dim"] = bundle.features.cols();
  for (const char* f : files) manifest["files"][f] = sha256Hex(readTextFile(path(f)));
  writeTextFile(path(kManifest), dumpJson(manifest));
}

DatasetBundle loadBundle(const std::string& input) {
  fs::path dir = input;
  if (fs::is_regular_file(dir)) dir = dir.parent_path();
  const std::string manifest_path = (dir / kManifest).string();
  if (!fs::exists(manifest_path)) throw IoError("no bundle manifest at " + manifest_path);
  const json manifest = parseJsonFile(manifest_path);
  if (manifest.value("format", "") != "pan-bundle-1") {
    throw ParseError(manifest_path + ": unsupported bundle format");
  }
  const json& files = manifest.at("files");
  const auto path = [&](const char* name) { return (dir / name).string(); };
  for (const auto& [name, digest] : files.items()) {
    const std::string p = (dir / name).string();
    if (!fs::exists(p)) throw IoError("bundle file missing: " + p);
    if (sha256Hex(readTextFile(p)) != digest.get<std::string>()) {
      throw ParseError(p + ": content hash does not match the manifest");
    }
  }

  DatasetBundle b;
  b.features = readFeatures(path(kFeatures));
  const std::size_t n = b.features.rows();
  if (manifest.at("n_items").get<std::size_t>() != n) {
    throw ParseError(manifest_path + ": n_items disagrees with " + kFeatures);
  }
  b.graph = readGraphCsv(path(kGraph), n);
  try {
    b.splits = parseJsonFile(path(kSplits)).get<std::map<std::string, std::vector<std::size_t>>>();
    if (files.contains(kSets)) b.sets = parseJsonFile(path(kSets)).get<std::map<std::string, ItemSets>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed split or set file: ") + e.what());
  }
  if (files.contains(kItems)) {
    const CsvTable items = readCsv(path(kItems));
    if (items.rows.size() != n) {
      throw ParseError(path(kItems) + ": has " + std::to_string(items.rows.size()) + " rows, expected " +
                       std::to_string(n));
    }
    std::vector<int> cats(n);
    std::vector<int> cls(n);
    bool any_cat = false;
    bool any_cls = false;
    for (std::size_t r = 0; r < n; ++r) {
      const auto& row = items.rows[r];
      if (row.size() != 3) throw ParseError(path(kItems) + ": line " + std::to_string(r + 2) + ": expected 3 cells");
      try {
        cats[r] = std::stoi(row[1]);
        cls[r] = std::stoi(row[2]);
      } catch (const std::exception&) {
        throw ParseError(path(kItems) + ": line " + std::to_string(r + 2) + ": expected integers");
      }
      any_cat |= cats[r] >= 0;
      any_cls |= cls[r] >= 0;
    }
    if (any_cat) b.categories = std::move(cats);
    if (any_cls) b.classes = std::move(cls);
  }
  if (files.contains(kAttributes)) {
    b.attributes = readAttributeCsv(path(kAttributes));
    if (files.contains(kConfidence)) readConfidenceCsv(path(kConfidence), *b.attributes);
  }
  b.validate();
  return b;
}

std::string oracleReportJson(const OracleReport& report, const SyntheticSpec& spec,
                             std::uint64_t seed) {
  json j;
  j["task"] = toString(spec.task_kind);
  j["seed"] = seed;
  j["m_attributes"] = spec.m_attributes;
  j["attributes_per_item"] = spec.attributes_per_item;
  j["manifestation_count"] = spec.manifestation_count;
  j["presence_bayes_rate"] = report.presence_bayes_rate;
  j["link_rate"] = report.link_rate;
  j["presence_patterns"] = report.presence_patterns;
  return dumpJson(j);
}

}  // namespace pan
