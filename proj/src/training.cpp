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

#include "pan/training.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "pan/errors.hpp"
#include "pan/evaluation.hpp"
#include "pan/io.hpp"

namespace pan {

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ContractError("Adam eps must be positive");
}

void adamStep(ad::ParameterList& params, const ad::GradientStore& grads, AdamState& state,
              std::size_t t, double learning_rate, const AdamConfig& config) {
  if (t < 1) throw ContractError("Adam step index starts at 1");
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (auto& p : params) {
    const auto it = grads.find(p.name);
    if (it == grads.end()) throw ContractError("no gradient for parameter " + p.name);
    const Matrix& g = it->second;
    requireSameShape(p.value, g, p.name.c_str());
    Matrix& m = state.m[p.name];
    Matrix& v = state.v[p.name];
    if (m.empty()) m = Matrix(g.rows(), g.cols());
    if (v.empty()) v = Matrix(g.rows(), g.cols());
    requireSameShape(m, g, p.name.c_str());
    for (std::size_t e = 0; e < g.size(); ++e) {
      m[e] = config.beta1 * m[e] + (1.0 - config.beta1) * g[e];
      v[e] = config.beta2 * v[e] + (1.0 - config.beta2) * g[e] * g[e];
      const double m_hat = m[e] / c1;
      const double v_hat = v[e] / c2;
      p.value[e] -= learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

TrainMode parseTrainMode(const std::string& text) {
  if (text == "single-batch") return TrainMode::kSingleBatch;
  if (text == "minibatch") return TrainMode::kMinibatch;
  throw ParseError("unknown training mode '" + text + "'");
}

std::string toString(TrainMode mode) {
  return mode == TrainMode::kSingleBatch ? "single-batch" : "minibatch";
}

ValidationMetric parseValidationMetric(const std::string& text) {
  if (text == "pair-auc") return ValidationMetric::kPairAuc;
  if (text == "pair-accuracy") return ValidationMetric::kPairAccuracy;
  if (text == "fewshot") return ValidationMetric::kFewShot;
  if (text == "none") return ValidationMetric::kNone;
  throw ParseError("unknown validation metric '" + text + "'");
}

std::string toString(ValidationMetric metric) {
  switch (metric) {
    case ValidationMetric::kPairAuc:
      return "pair-auc";
    case ValidationMetric::kPairAccuracy:
      return "pair-accuracy";
    case ValidationMetric::kFewShot:
      return "fewshot";
    case ValidationMetric::kNone:
      return "none";
  }
  return "none";
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ContractError("lambda must be non-negative");
  if (!(learning_rate > 0.0)) throw ContractError("learning rate must be positive");
  if (mode == TrainMode::kMinibatch && batch_size < 1) throw ContractError("batch size must be >= 1");
  if (validation_every < 1) throw ContractError("validation_every must be >= 1");
  if (pairs_per_class < 1) throw ContractError("pairs_per_class must be >= 1");
  adam.validate();
}

double totalLoss(double e, double p, std::span<const double> labels, std::span<const double> mask,
                 std::span<const double> rho, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("lambda must be non-negative");
  if (rho.size() < labels.size()) {
    throw DimensionError("rho has " + std::to_string(rho.size()) + " entries, labels need " +
                         std::to_string(labels.size()));
  }
  const double link = binaryCrossEntropy(p, e);
  if (lambda == 0.0) return link;
  return link + lambda * maskedBceMean(rho.first(labels.size()), labels, mask);
}

std::vector<PairSample> samplePairs(const SimilarityGraph& g, std::size_t count_per_class,
                                    Engine& engine) {
  const std::size_t n = g.n();
  const std::size_t all_pairs = n * (n - (n > 0 ? 1 : 0)) / 2;
  if (g.edgeCount() == 0) throw SamplingError("graph has no edges to sample positives from");
  if (g.edgeCount() >= all_pairs) throw SamplingError("graph is complete; no negative pairs exist");
  std::vector<PairSample> out;
  out.reserve(2 * count_per_class);
  for (std::size_t t = 0; t < count_per_class; ++t) {
    const auto& [i, j] = g.edges()[uniformIndex(engine, g.edgeCount())];
    out.push_back({i, j, 1});
  }
  for (std::size_t t = 0; t < count_per_class; ++t) {
    for (;;) {
      std::size_t i = uniformIndex(engine, n);
      std::size_t j = uniformIndex(engine, n);
      if (i == j || g.hasEdge(i, j)) continue;
      if (i > j) std::swap(i, j);
      out.push_back({i, j, 0});
      break;
    }
  }
  return out;
}

std::vector<PairSample> samplePairs(const SimilarityGraph& g, std::size_t count_per_class,
                                    std::uint64_t seed) {
  Engine engine = makeEngine(seed, "train.pairs");
  return samplePairs(g, count_per_class, engine);
}

std::vector<PairSample> samplePairsWithin(const SimilarityGraph& g,
                                          std::span<const std::size_t> nodes,
                                          std::size_t count_per_class, Engine& engine) {
  auto local = samplePairs(g.induced(nodes), count_per_class, engine);
  for (auto& s : local) {
    s.i = nodes[s.i];
    s.j = nodes[s.j];
  }
  return local;
}

PairBatch makeBatch(std::span<const PairSample> pairs, const AttributeTable* attributes,
                    CombineFn fa, std::size_t width) {
  PairBatch b;
  b.targets = Matrix(pairs.size(), 1);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    b.left.push_back(pairs[r].i);
    b.right.push_back(pairs[r].j);
    b.targets[r] = static_cast<double>(pairs[r].e);
  }
  if (width == 0) return b;
  if (attributes == nullptr) throw ContractError("attribute supervision requires an attribute table");
  if (labelWidth(fa, attributes->m()) != width) {
    throw ContractError("f_a " + toString(fa) + " yields " +
                        std::to_string(labelWidth(fa, attributes->m())) +
                        " labels but the model supervises " + std::to_string(width) + " conditions");
  }
  Matrix labels(pairs.size(), width);
  Matrix mask(pairs.size(), width);
  bool any = false;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto l = combineItems(*attributes, pairs[r].i, pairs[r].j, fa);
    for (std::size_t k = 0; k < width; ++k) {
      labels(r, k) = l.labels[k];
      mask(r, k) = l.mask[k];
      any |= l.mask[k] == 1.0;
    }
  }
  if (any) {
    b.labels = std::move(labels);
    b.mask = std::move(mask);
  }
  return b;
}

ad::Var panObjective(const EncoderSpec& encoder, std::span<const ad::Var> encoder_vars,
                     const CsmVars& csm, ad::Var x, const Matrix* adjacency, Engine* dropout,
                     const PairBatch& batch, bool relevance_enabled, double lambda) {
  ad::Tape& tape = x.tape();
  const ad::Var h = encodeOnTape(encoder, encoder_vars, x, adjacency, dropout);
  const CsmNodes out =
      csmForward(ad::gatherRows(h, batch.left), ad::gatherRows(h, batch.right), csm, relevance_enabled);
  const Matrix ones = Matrix::filled(batch.targets.rows(), 1, 1.0);
  const ad::Var link = ad::meanAll(ad::maskedBceRows(out.p, batch.targets, ones));
  if (batch.labels.empty() || lambda == 0.0) return link;
  const ad::Var rho = ad::sliceCols(out.rho, 0, batch.labels.cols());
  const ad::Var attr = ad::meanAll(ad::maskedBceRows(rho, batch.labels, batch.mask));
  (void)tape;
  return ad::add(link, ad::scale(attr, lambda));
}

std::string historyCsv(std::span<const HistoryRow> rows) {
  std::ostringstream out;
  out << "epoch,train_loss,val_metric\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << formatReal(r.train_loss) << ','
        << (r.val_metric ? formatReal(*r.val_metric) : "") << '\n';
  }
  return out.str();
}

namespace {

using Builder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

struct Optimizer {
  ad::ParameterList params;
  AdamState state;
  std::size_t t = 0;
  const TrainConfig& config;

  double step(const Builder& build, std::size_t epoch) {
    ad::Tape tape;
    const auto vars = tape.parameters(params);
    const ad::Var loss = build(tape, vars);
    const double value = loss.value()[0];
    if (!std::isfinite(value)) {
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
    }
    const auto grads = tape.backward(loss);
    for (const auto& [name, g] : grads) {
      if (!g.allFinite()) {
        throw NumericError("non-finite gradient for " + name + " at epoch " + std::to_string(epoch));
      }
    }
    adamStep(params, grads, state, ++t, config.learning_rate, config.adam);
    return value;
  }
};

// Index ranges of one epoch's batches over `count` items.
std::vector<std::vector<std::size_t>> batches(std::size_t count, const TrainConfig& config,
                                              Engine& shuffle) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  if (config.mode == TrainMode::kSingleBatch) return {order};
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[uniformIndex(shuffle, i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t a = 0; a < count; a += config.batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(a),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(count, a + config.batch_size)));
  }
  return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& all, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

SimilarityGraph restrictedGraph(const SimilarityGraph& g, std::span<const std::size_t> nodes) {
  std::vector<char> in(g.n(), 0);
  for (std::size_t i : nodes) in.at(i) = 1;
  std::vector<ItemPair> edges;
  for (const auto& [i, j] : g.edges())
    if (in[i] && in[j]) edges.emplace_back(i, j);
  return SimilarityGraph(g.n(), std::move(edges));
}

Matrix uniformInit(std::size_t rows, std::size_t cols, Engine& engine) {
  Matrix w(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  for (double& v : w.data()) v = (2.0 * uniformUnit(engine) - 1.0) * bound;
  return w;
}

class Validator {
 public:
  Validator(const DatasetBundle& data, const TrainConfig& config) : data_(data), config_(config) {
    if (config.val_metric == ValidationMetric::kNone) return;
    const auto it = data.splits.find(config.val_split);
    if (it == data.splits.end() || it->second.empty()) return;
    if (config.val_metric == ValidationMetric::kFewShot) {
      episodes_ = buildEpisodes(data, config.val_split, config.val_way, config.val_shot,
                                config.val_query, config.val_episodes,
                                deriveSeed(config.seed, "train.val-episodes"));
    } else {
      Engine engine = makeEngine(config.seed, "train.val-pairs");
      const auto samples = samplePairsWithin(data.graph, it->second, config.val_pairs_per_class, engine);
      for (const auto& s : samples) {
        pairs_.emplace_back(s.i, s.j);
        labels_.push_back(s.e);
      }
    }
    active_ = true;
  }

  bool active() const { return active_; }

  double evaluate(const PairScorer& scorer) const {
    if (config_.val_metric == ValidationMetric::kFewShot) {
      return fewShotAccuracy(scorer, episodes_, data_.features).value;
    }
    const auto scores = scorer.score(data_.features, pairs_, SimilarityGraph(data_.n()));
    if (config_.val_metric == ValidationMetric::kPairAccuracy) return pairAccuracy(scores, labels_);
    std::vector<double> pos;
    std::vector<double> neg;
    for (std::size_t r = 0; r < scores.size(); ++r) (labels_[r] == 1 ? pos : neg).push_back(scores[r]);
    return mannWhitneyAuc(pos, neg);
  }

 private:
  const DatasetBundle& data_;
  const TrainConfig& config_;
  bool active_ = false;
  std::vector<ItemPair> pairs_;
  std::vector<int> labels_;
  std::vector<Episode> episodes_;
};

bool validationDue(std::size_t epoch, const TrainConfig& config) {
  return (epoch + 1) % config.validation_every == 0 || epoch + 1 == config.epochs;
}

}  // namespace

TrainResult trainPan(const DatasetBundle& data, const EncoderSpec& encoder, const CsmConfig& csm,
                     const TrainConfig& config) {
  config.validate();
  csm.validate();
  encoder.validate();
  data.validate();
  const std::size_t width = csm.supervisedCount();
  const AttributeTable* attributes = data.attributes ? &*data.attributes : nullptr;
  if (width > 0) {
    if (attributes == nullptr) throw ContractError("supervised training requires an attribute table");
    if (labelWidth(config.fa, attributes->m()) != width) {
      throw ContractError("f_a " + toString(config.fa) + " yields " +
                          std::to_string(labelWidth(config.fa, attributes->m())) +
                          " labels but " + std::to_string(width) + " conditions are supervised");
    }
  }

  const std::size_t d_in = data.features.cols();
  TrainResult result;
  ModelBundle& model = result.model;
  model.encoder = encoder;
  model.encoder_params = initEncoder(encoder, d_in, deriveSeed(config.seed, "pan.encoder"));
  model.csm = initParams(encoder.outputDim(d_in), csm.m, deriveSeed(config.seed, "pan.csm"));
  model.relevance_enabled = csm.relevance_enabled;
  if (config.epochs == 0) return result;

  const auto& train_items = data.split(config.train_split);
  const SimilarityGraph train_graph = restrictedGraph(data.graph, train_items);
  const std::size_t n_enc = model.encoder_params.size();
  const bool gcn = encoder.kind == EncoderKind::kGcn;

  Engine pair_engine = makeEngine(config.seed, "train.pairs");
  Engine shuffle_engine = makeEngine(config.seed, "train.shuffle");
  Engine dropout_engine = makeEngine(config.seed, "train.dropout");
  Engine edge_engine = makeEngine(config.seed, "train.edges");
  const Validator validator(data, config);
  Optimizer opt{model.parameters(), {}, 0, config};
  std::optional<ad::ParameterList> best_params;
  const std::size_t supervised = config.lambda > 0.0 ? width : 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto samples = samplePairsWithin(data.graph, train_items, config.pairs_per_class, pair_engine);
    Matrix adjacency;
    if (gcn) adjacency = normalizeAdjacency(dropEdges(train_graph, encoder.edge_dropout_p, edge_engine));
    double loss_sum = 0.0;
    for (const auto& idx : batches(samples.size(), config, shuffle_engine)) {
      const auto chunk = pick(samples, idx);
      const PairBatch batch = makeBatch(chunk, attributes, config.fa, supervised);
      const double loss = opt.step(
          [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
            const std::span<const ad::Var> all(vars);
            const CsmVars cv{vars[n_enc], vars[n_enc + 1], vars[n_enc + 2], vars[n_enc + 3]};
            return panObjective(encoder, all.first(n_enc), cv, tape.constant(data.features),
                                gcn ? &adjacency : nullptr, &dropout_engine, batch,
                                csm.relevance_enabled, config.lambda);
          },
          epoch);
      loss_sum += loss * static_cast<double>(chunk.size());
    }
    HistoryRow row{epoch, loss_sum / static_cast<double>(samples.size()), std::nullopt};
    if (validator.active() && validationDue(epoch, config)) {
      model.setParameters(opt.params);
      const double metric = validator.evaluate(PanScorer(model));
      row.val_metric = metric;
      if (!result.best_val || metric > *result.best_val) {
        result.best_val = metric;
        result.best_epoch = epoch;
        best_params = opt.params;
      }
    }
    result.history.push_back(row);
  }
  if (best_params) {
    model.setParameters(*best_params);
  } else {
    model.setParameters(opt.params);
    result.best_epoch = config.epochs - 1;
  }
  return result;
}

double tripletLoss(std::span<const double> fx, std::span<const double> fy,
                   std::span<const double> fz, double margin) {
  if (fx.size() != fy.size() || fx.size() != fz.size()) throw DimensionError("triplet embeddings differ in length");
  double pos = 0.0;
  double neg = 0.0;
  for (std::size_t c = 0; c < fx.size(); ++c) {
    pos += (fx[c] - fy[c]) * (fx[c] - fy[c]);
    neg += (fx[c] - fz[c]) * (fx[c] - fz[c]);
  }
  return std::max(std::sqrt(pos) - std::sqrt(neg) + margin, 0.0);
}

namespace {

// Trains logit = rows(pairs) w + b with BCE on balanced pairs from the train
// split. `rows` builds the pair feature matrix for a batch.
LinkHead trainPairHead(const std::function<Matrix(std::span<const PairSample>)>& rows,
                       std::size_t width, const SimilarityGraph& graph,
                       std::span<const std::size_t> train_items, const TrainConfig& config,
                       const char* label) {
  Engine init = makeEngine(config.seed, std::string(label) + ".init");
  Optimizer opt{{{"head.w", uniformInit(width, 1, init)}, {"head.b", Matrix(1, 1)}}, {}, 0, config};
  Engine pair_engine = makeEngine(config.seed, std::string(label) + ".pairs");
  Engine shuffle_engine = makeEngine(config.seed, std::string(label) + ".shuffle");
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto samples = samplePairsWithin(graph, train_items, config.pairs_per_class, pair_engine);
    for (const auto& idx : batches(samples.size(), config, shuffle_engine)) {
      const auto chunk = pick(samples, idx);
      const Matrix x = rows(chunk);
      Matrix targets(chunk.size(), 1);
      for (std::size_t r = 0; r < chunk.size(); ++r) targets[r] = chunk[r].e;
      opt.step(
          [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
            const ad::Var p = ad::sigmoid(ad::addRowBroadcast(ad::matmul(tape.constant(x), vars[0]), vars[1]));
            return ad::meanAll(ad::maskedBceRows(p, targets, Matrix::filled(chunk.size(), 1, 1.0)));
          },
          epoch);
    }
  }
  return {opt.params[0].value, opt.params[1].value};
}

Matrix absDiff(const Matrix& h, std::span<const PairSample> pairs) {
  Matrix out(pairs.size(), h.cols());
  for (std::size_t r = 0; r < pairs.size(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) out(r, c) = std::fabs(h(pairs[r].i, c) - h(pairs[r].j, c));
  return out;
}

}  // namespace

SiameseModel trainSiameseBaseline(const DatasetBundle& data, const EncoderSpec& encoder,
                                  double margin, const TrainConfig& config) {
  if (!(margin >= 0.0)) throw ContractError("triplet margin must be non-negative");
  config.validate();
  encoder.validate();
  const auto& train_items = data.split(config.train_split);
  const SimilarityGraph train_graph = restrictedGraph(data.graph, train_items);
  if (train_graph.edgeCount() == 0) throw SamplingError("no linked pairs to form triplets");
  const auto degree = train_graph.degrees();
  for (const auto& [i, j] : train_graph.edges()) {
    if (degree[i] + 1 >= train_items.size()) {
      throw SamplingError("item " + std::to_string(i) + " links to every other item; no negative exists");
    }
  }

  SiameseModel model;
  model.encoder = encoder;
  model.encoder_params = initEncoder(encoder, data.features.cols(), deriveSeed(config.seed, "siamese.encoder"));
  const bool gcn = encoder.kind == EncoderKind::kGcn;
  if (!model.encoder_params.empty()) {
    Optimizer opt{model.encoder_params, {}, 0, config};
    Engine neg_engine = makeEngine(config.seed, "siamese.negatives");
    Engine shuffle_engine = makeEngine(config.seed, "siamese.shuffle");
    Engine dropout_engine = makeEngine(config.seed, "siamese.dropout");
    Engine edge_engine = makeEngine(config.seed, "siamese.edges");
    const auto& edges = train_graph.edges();
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      std::vector<std::size_t> anchors;
      std::vector<std::size_t> positives;
      std::vector<std::size_t> negatives;
      for (const auto& [i, j] : edges) {
        std::size_t z;
        do {
          z = train_items[uniformIndex(neg_engine, train_items.size())];
        } while (z == i || train_graph.hasEdge(i, z));
        anchors.push_back(i);
        positives.push_back(j);
        negatives.push_back(z);
      }
      Matrix adjacency;
      if (gcn) adjacency = normalizeAdjacency(dropEdges(train_graph, encoder.edge_dropout_p, edge_engine));
      for (const auto& idx : batches(anchors.size(), config, shuffle_engine)) {
        const auto a = pick(anchors, idx);
        const auto p = pick(positives, idx);
        const auto z = pick(negatives, idx);
        opt.step(
            [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
              const ad::Var h = encodeOnTape(encoder, vars, tape.constant(data.features),
                                             gcn ? &adjacency : nullptr, &dropout_engine);
              const ad::Var fx = ad::gatherRows(h, a);
              const ad::Var d_pos = ad::rowL2Norm(ad::subtract(fx, ad::gatherRows(h, p)));
              const ad::Var d_neg = ad::rowL2Norm(ad::subtract(fx, ad::gatherRows(h, z)));
              return ad::meanAll(ad::relu(ad::addScalar(ad::subtract(d_pos, d_neg), margin)));
            },
            epoch);
      }
    }
    model.encoder_params = opt.params;
  }

  const Matrix h = encode(encoder, model.encoder_params, data.features, &train_graph, false, 0);
  model.link = trainPairHead([&](std::span<const PairSample> s) { return absDiff(h, s); }, h.cols(),
                             data.graph, train_items, config, "siamese.link");
  return model;
}

MultitaskModel trainMultitaskBaseline(const DatasetBundle& data, const EncoderSpec& encoder,
                                      const TrainConfig& config) {
  config.validate();
  encoder.validate();
  if (!data.attributes) throw ContractError("multitask baseline requires an attribute table");
  const AttributeTable& attrs = *data.attributes;
  const auto& train_items = data.split(config.train_split);
  const SimilarityGraph train_graph = restrictedGraph(data.graph, train_items);
  const std::size_t d_in = data.features.cols();
  const std::size_t d = encoder.outputDim(d_in);
  const bool gcn = encoder.kind == EncoderKind::kGcn;

  MultitaskModel model;
  model.encoder = encoder;
  ad::ParameterList params = initEncoder(encoder, d_in, deriveSeed(config.seed, "multitask.encoder"));
  const std::size_t n_enc = params.size();
  Engine init = makeEngine(config.seed, "multitask.heads");
  params.push_back({"link.w", uniformInit(d, 1, init)});
  params.push_back({"link.b", Matrix(1, 1)});
  params.push_back({"attr.w", uniformInit(d, attrs.m(), init)});
  params.push_back({"attr.b", Matrix(1, attrs.m())});
  Optimizer opt{params, {}, 0, config};

  Engine pair_engine = makeEngine(config.seed, "multitask.pairs");
  Engine shuffle_engine = makeEngine(config.seed, "multitask.shuffle");
  Engine dropout_engine = makeEngine(config.seed, "multitask.dropout");
  Engine edge_engine = makeEngine(config.seed, "multitask.edges");
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto samples = samplePairsWithin(data.graph, train_items, config.pairs_per_class, pair_engine);
    Matrix adjacency;
    if (gcn) adjacency = normalizeAdjacency(dropEdges(train_graph, encoder.edge_dropout_p, edge_engine));
    for (const auto& idx : batches(samples.size(), config, shuffle_engine)) {
      const auto chunk = pick(samples, idx);
      const PairBatch batch = makeBatch(chunk, nullptr, config.fa, 0);
      std::vector<std::size_t> items = batch.left;
      items.insert(items.end(), batch.right.begin(), batch.right.end());
      Matrix values(items.size(), attrs.m());
      Matrix mask(items.size(), attrs.m());
      for (std::size_t r = 0; r < items.size(); ++r) {
        for (std::size_t k = 0; k < attrs.m(); ++k) {
          values(r, k) = attrs.values(items[r], k);
          mask(r, k) = attrs.mask(items[r], k);
        }
      }
      opt.step(
          [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
            const std::span<const ad::Var> all(vars);
            const ad::Var h = encodeOnTape(encoder, all.first(n_enc), tape.constant(data.features),
                                           gcn ? &adjacency : nullptr, &dropout_engine);
            const ad::Var diff = ad::abs(ad::subtract(ad::gatherRows(h, batch.left), ad::gatherRows(h, batch.right)));
            const ad::Var p = ad::sigmoid(ad::addRowBroadcast(ad::matmul(diff, vars[n_enc]), vars[n_enc + 1]));
            const ad::Var link = ad::meanAll(
                ad::maskedBceRows(p, batch.targets, Matrix::filled(chunk.size(), 1, 1.0)));
            if (config.lambda == 0.0) return link;
            const ad::Var a = ad::sigmoid(ad::addRowBroadcast(
                ad::matmul(ad::gatherRows(h, items), vars[n_enc + 2]), vars[n_enc + 3]));
            const ad::Var attr = ad::meanAll(ad::maskedBceRows(a, values, mask));
            return ad::add(link, ad::scale(attr, config.lambda));
          },
          epoch);
    }
  }
  model.encoder_params.assign(opt.params.begin(), opt.params.begin() + static_cast<std::ptrdiff_t>(n_enc));
  model.link = {opt.params[n_enc].value, opt.params[n_enc + 1].value};
  model.attr_w = opt.params[n_enc + 2].value;
  model.attr_b = opt.params[n_enc + 3].value;
  return model;
}

LinkHead trainConcatPairClassifier(const Matrix& attributes, const SimilarityGraph& graph,
                                   std::span<const std::size_t> train_items,
                                   const TrainConfig& config) {
  config.validate();
  const std::size_t m = attributes.cols();
  return trainPairHead(
      [&](std::span<const PairSample> s) {
        Matrix out(s.size(), 2 * m);
        for (std::size_t r = 0; r < s.size(); ++r) {
          for (std::size_t k = 0; k < m; ++k) {
            out(r, k) = attributes(s[r].i, k);
            out(r, m + k) = attributes(s[r].j, k);
          }
        }
        return out;
      },
      2 * m, graph, train_items, config, "attrsim.pair");
}

AttrSimilarityModel trainAttrSimilarityBaseline(const DatasetBundle& data,
                                                const EncoderSpec& encoder,
                                                const TrainConfig& config) {
  config.validate();
  encoder.validate();
  if (!data.attributes) throw ContractError("attribute-similarity baseline requires an attribute table");
  const AttributeTable& attrs = *data.attributes;
  const auto& train_items = data.split(config.train_split);
  const SimilarityGraph train_graph = restrictedGraph(data.graph, train_items);
  const std::size_t d_in = data.features.cols();
  const std::size_t d = encoder.outputDim(d_in);
  const bool gcn = encoder.kind == EncoderKind::kGcn;

  ad::ParameterList params = initEncoder(encoder, d_in, deriveSeed(config.seed, "attrsim.encoder"));
  const std::size_t n_enc = params.size();
  Engine init = makeEngine(config.seed, "attrsim.head");
  params.push_back({"attr.w", uniformInit(d, attrs.m(), init)});
  params.push_back({"attr.b", Matrix(1, attrs.m())});
  Optimizer opt{params, {}, 0, config};
  Engine shuffle_engine = makeEngine(config.seed, "attrsim.shuffle");
  Engine dropout_engine = makeEngine(config.seed, "attrsim.dropout");
  Engine edge_engine = makeEngine(config.seed, "attrsim.edges");
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Matrix adjacency;
    if (gcn) adjacency = normalizeAdjacency(dropEdges(train_graph, encoder.edge_dropout_p, edge_engine));
    for (const auto& idx : batches(train_items.size(), config, shuffle_engine)) {
      const auto items = pick(std::vector<std::size_t>(train_items.begin(), train_items.end()), idx);
      Matrix values(items.size(), attrs.m());
      Matrix mask(items.size(), attrs.m());
      for (std::size_t r = 0; r < items.size(); ++r) {
        for (std::size_t k = 0; k < attrs.m(); ++k) {
          values(r, k) = attrs.values(items[r], k);
          mask(r, k) = attrs.mask(items[r], k);
        }
      }
      opt.step(
          [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
            const std::span<const ad::Var> all(vars);
            const ad::Var h = encodeOnTape(encoder, all.first(n_enc), tape.constant(data.features),
                                           gcn ? &adjacency : nullptr, &dropout_engine);
            const ad::Var a = ad::sigmoid(ad::addRowBroadcast(
                ad::matmul(ad::gatherRows(h, items), vars[n_enc]), vars[n_enc + 1]));
            return ad::meanAll(ad::maskedBceRows(a, values, mask));
          },
          epoch);
    }
  }
  AttrSimilarityModel model;
  model.encoder = encoder;
  model.encoder_params.assign(opt.params.begin(), opt.params.begin() + static_cast<std::ptrdiff_t>(n_enc));
  model.attr_w = opt.params[n_enc].value;
  model.attr_b = opt.params[n_enc + 1].value;
  const Matrix predicted = model.predictAttributes(data.features, train_graph);
  const LinkHead head = trainConcatPairClassifier(predicted, data.graph, train_items, config);
  model.pair_w = head.w;
  model.pair_b = head.b;
  return model;
}

}  // namespace pan
