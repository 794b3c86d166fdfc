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

#include "pan/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "pan/data.hpp"
#include "pan/errors.hpp"
#include "pan/evaluation.hpp"
#include "pan/gradcheck.hpp"
#include "pan/io.hpp"
#include "pan/model.hpp"
#include "pan/rng.hpp"
#include "pan/training.hpp"

namespace pan {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

bool parseSwitch(const std::string& text, const std::string& flag) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw UsageError(flag + " expects on or off, got '" + text + "'");
}

// Keys of the config file are snake_case spellings of the long flags. Values
// are spliced in front of the command-line flags, and only for flags the
// command line does not set itself.
std::vector<std::string> spliceConfig(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  json cfg;
  try {
    cfg = json::parse(readTextFile(path));
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
  auto present = [&](const std::string& flag) {
    return std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> spliced;
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "--config" || present(flag)) continue;
    auto text = [&](const json& v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return std::string(v.get<bool>() ? "on" : "off");
      return v.dump();
    };
    if (value.is_boolean() && flag == "--inject-sign-error") {
      if (value.get<bool>()) spliced.push_back(flag);
      continue;
    }
    spliced.push_back(flag);
    if (value.is_array()) {
      for (const auto& v : value) spliced.push_back(text(v));
    } else {
      spliced.push_back(text(value));
    }
  }
  std::vector<std::string> out{args.front()};
  out.insert(out.end(), spliced.begin(), spliced.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

std::uint64_t defaultSeed() {
  const char* env = std::getenv("PAN_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("PAN_SEED must be an unsigned integer, got '") + env + "'");
  }
}

json fileHashes(const fs::path& dir, const std::vector<std::string>& names) {
  json out = json::object();
  for (const auto& n : names) out[n] = sha256Hex(readTextFile((dir / n).string()));
  return out;
}

void writeManifest(const fs::path& dir, const std::string& command, const json& config,
                   const json& inputs, const json& outputs, const json& extra = json::object()) {
  json m;
  m["format"] = "pan-run-1";
  m["command"] = command;
  m["config"] = config;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  writeTextFile((dir / "run.json").string(), dump(m));
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string task = "compat-manifest";
  SyntheticSpec spec;
  std::uint64_t seed = 0;
  std::string out;
};

json genConfigJson(const GenArgs& a) {
  const auto& s = a.spec;
  return {{"task", toString(s.task_kind)},
          {"items", s.n_items},
          {"dim", s.d},
          {"attrs", s.m_attributes},
          {"noise", s.noise_sd},
          {"manifestations", s.manifestation_count},
          {"attrs_per_item", s.attributes_per_item},
          {"shade_sd", s.shade_sd},
          {"categories", s.category_count},
          {"classes", s.n_classes},
          {"separation", s.separation},
          {"train_fraction", s.train_fraction},
          {"val_fraction", s.val_fraction},
          {"seed", a.seed},
          {"out", a.out}};
}

void addGenOptions(CLI::App* cmd, GenArgs& a) {
  cmd->add_option("--task", a.task, "compat-manifest | fewshot-clusters | linear-separable");
  cmd->add_option("--items", a.spec.n_items, "number of items");
  cmd->add_option("--dim", a.spec.d, "feature dimension");
  cmd->add_option("--attrs", a.spec.m_attributes, "number of binary attributes");
  cmd->add_option("--noise", a.spec.noise_sd, "feature noise sd");
  cmd->add_option("--manifestations", a.spec.manifestation_count, "manifestations per attribute");
  cmd->add_option("--attrs-per-item", a.spec.attributes_per_item, "attributes carried by each item");
  cmd->add_option("--shade-sd", a.spec.shade_sd, "spread of the presence shade");
  cmd->add_option("--categories", a.spec.category_count, "item categories");
  cmd->add_option("--classes", a.spec.n_classes, "classes for fewshot-clusters");
  cmd->add_option("--separation", a.spec.separation, "class centre distance from the origin");
  cmd->add_option("--train-fraction", a.spec.train_fraction, "train (or base) fraction");
  cmd->add_option("--val-fraction", a.spec.val_fraction, "validation fraction");
}

int runGen(GenArgs a, std::ostream& out) {
  try {
    a.spec.task_kind = parseTaskKind(a.task);
    a.spec.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const fs::path dir(a.out);
  fs::create_directories(dir);
  const json config = genConfigJson(a);
  writeManifest(dir, "gen", config, json::object(), json::object());
  const GeneratedDataset g = generate(a.spec, a.seed);
  saveBundle(g.bundle, dir.string());
  writeTextFile((dir / "oracle_report.json").string(), oracleReportJson(g.oracle, a.spec, a.seed));
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name != "run.json") files.push_back(name);
  }
  std::sort(files.begin(), files.end());
  writeManifest(dir, "gen", config, json::object(), fileHashes(dir, files));
  out << "wrote " << g.bundle.n() << " items to " << dir.string() << "\n";
  if (a.spec.task_kind == TaskKind::kCompatibilityManifestation) {
    out << "presence-only Bayes rate " << formatReal(g.oracle.presence_bayes_rate) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  std::string fa = "or";
  std::string supervision = "supervised";
  std::size_t conditions = 0;
  std::size_t supervised_conditions = 0;
  std::string encoder = "identity";
  std::size_t layers = 2;
  std::size_t hidden = 16;
  std::string activation = "relu";
  double dropout = 0.5;
  double edge_dropout = 0.15;
  std::string mode = "single-batch";
  std::string relevance = "on";
  std::string random_labels = "off";
  int min_confidence = -1;
  TrainConfig train;
  std::string val_metric = "pair-auc";
};

struct ResolvedTrain {
  TrainConfig train;
  EncoderSpec encoder;
  CsmConfig csm;
  bool random_labels = false;
};

void addTrainOptions(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--fa", a.fa, "and | or | xor | xnor | and-xor");
  cmd->add_option("--lambda", a.train.lambda, "attribute loss weight");
  cmd->add_option("--supervision", a.supervision, "unsupervised | supervised | hybrid");
  cmd->add_option("--conditions", a.conditions, "similarity conditions M (0 = label width)");
  cmd->add_option("--supervised-conditions", a.supervised_conditions,
                  "hybrid only: supervised prefix (0 = label width)");
  cmd->add_option("--encoder", a.encoder, "identity | mlp | gcn");
  cmd->add_option("--layers", a.layers, "encoder layers");
  cmd->add_option("--hidden", a.hidden, "encoder hidden width");
  cmd->add_option("--activation", a.activation, "relu | linear");
  cmd->add_option("--dropout", a.dropout, "gcn layer dropout");
  cmd->add_option("--edge-dropout", a.edge_dropout, "gcn edge dropout");
  cmd->add_option("--mode", a.mode, "single-batch | minibatch");
  cmd->add_option("--batch-size", a.train.batch_size, "pairs per minibatch");
  cmd->add_option("--relevance", a.relevance, "on | off");
  cmd->add_option("--random-labels", a.random_labels, "on | off: replace attribute labels by coin flips");
  cmd->add_option("--min-confidence", a.min_confidence, "mask attribute labels at or below this confidence");
  cmd->add_option("--lr", a.train.learning_rate, "Adam learning rate");
  cmd->add_option("--epochs", a.train.epochs, "training epochs");
  cmd->add_option("--pairs-per-class", a.train.pairs_per_class, "positive (and negative) pairs per epoch");
  cmd->add_option("--val-pairs-per-class", a.train.val_pairs_per_class, "validation pairs per class");
  cmd->add_option("--val-metric", a.val_metric, "pair-auc | pair-accuracy | fewshot | none");
  cmd->add_option("--validation-every", a.train.validation_every, "epochs between validations");
  cmd->add_option("--train-split", a.train.train_split, "training split name");
  cmd->add_option("--val-split", a.train.val_split, "validation split name");
  cmd->add_option("--val-way", a.train.val_way, "validation episodes: way");
  cmd->add_option("--val-shot", a.train.val_shot, "validation episodes: shot");
  cmd->add_option("--val-query", a.train.val_query, "validation episodes: queries per class");
  cmd->add_option("--val-episodes", a.train.val_episodes, "validation episodes");
}

ResolvedTrain resolveTrain(const TrainArgs& a, const DatasetBundle& bundle) {
  ResolvedTrain r;
  try {
    r.train = a.train;
    r.train.seed = a.seed;
    r.train.fa = parseCombineFn(a.fa);
    r.train.mode = parseTrainMode(a.mode);
    r.train.val_metric = parseValidationMetric(a.val_metric);
    // Episodic bundles name their training split "base".
    if (r.train.train_split == "train" && !bundle.splits.contains("train") &&
        bundle.splits.contains("base")) {
      r.train.train_split = "base";
    }
    r.train.validate();
    r.encoder.kind = parseEncoderKind(a.encoder);
    r.encoder.num_layers = a.layers;
    r.encoder.hidden_dim = a.hidden;
    r.encoder.activation = parseActivation(a.activation);
    r.encoder.layer_dropout_p = a.dropout;
    r.encoder.edge_dropout_p = a.edge_dropout;
    if (r.encoder.kind != EncoderKind::kIdentity) {
      r.encoder.layer_dims.assign(a.layers, a.hidden);
    }
    r.encoder.validate();
    r.csm.supervision = parseSupervision(a.supervision);
    r.csm.relevance_enabled = parseSwitch(a.relevance, "--relevance");
    r.random_labels = parseSwitch(a.random_labels, "--random-labels");
    const std::size_t width =
        bundle.attributes ? labelWidth(r.train.fa, bundle.attributes->m()) : 0;
    if (r.csm.supervision != Supervision::kUnsupervised && width == 0) {
      throw UsageError("--supervision " + a.supervision + " needs a bundle with attributes");
    }
    switch (r.csm.supervision) {
      case Supervision::kUnsupervised:
        r.csm.m = a.conditions > 0 ? a.conditions : width;
        if (r.csm.m == 0) throw UsageError("--conditions is required without attributes");
        break;
      case Supervision::kSupervised:
        r.csm.m = a.conditions > 0 ? a.conditions : width;
        break;
      case Supervision::kHybrid:
        r.csm.m_sup = a.supervised_conditions > 0 ? a.supervised_conditions : width;
        r.csm.m = a.conditions;
        break;
    }
    r.csm.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return r;
}

json trainConfigJson(const TrainArgs& a, const ResolvedTrain& r) {
  const TrainConfig& t = r.train;
  return {{"data", a.data},
          {"out", a.out},
          {"seed", t.seed},
          {"fa", toString(t.fa)},
          {"lambda", t.lambda},
          {"supervision", toString(r.csm.supervision)},
          {"conditions", r.csm.m},
          {"supervised_conditions", r.csm.supervisedCount()},
          {"encoder", toString(r.encoder.kind)},
          {"layers", r.encoder.num_layers},
          {"hidden", r.encoder.hidden_dim},
          {"activation", toString(r.encoder.activation)},
          {"dropout", r.encoder.layer_dropout_p},
          {"edge_dropout", r.encoder.edge_dropout_p},
          {"mode", toString(t.mode)},
          {"batch_size", t.batch_size},
          {"relevance", r.csm.relevance_enabled ? "on" : "off"},
          {"random_labels", r.random_labels ? "on" : "off"},
          {"min_confidence", a.min_confidence},
          {"lr", t.learning_rate},
          {"adam_beta1", t.adam.beta1},
          {"adam_beta2", t.adam.beta2},
          {"adam_eps", t.adam.eps},
          {"epochs", t.epochs},
          {"pairs_per_class", t.pairs_per_class},
          {"val_pairs_per_class", t.val_pairs_per_class},
          {"val_metric", toString(t.val_metric)},
          {"validation_every", t.validation_every},
          {"train_split", t.train_split},
          {"val_split", t.val_split},
          {"val_way", t.val_way},
          {"val_shot", t.val_shot},
          {"val_query", t.val_query},
          {"val_episodes", t.val_episodes}};
}

json bundleInput(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "manifest.json";
  return {{"path", path}, {"manifest_sha256", sha256Hex(readTextFile(p.string()))}};
}

DatasetBundle prepareTrainingData(DatasetBundle bundle, const TrainArgs& a, const ResolvedTrain& r) {
  if (bundle.attributes && a.min_confidence >= 0) {
    bundle.attributes = thresholdByConfidence(*bundle.attributes, a.min_confidence);
  }
  if (bundle.attributes && r.random_labels) {
    bundle.attributes = randomizeLabels(*bundle.attributes, deriveSeed(a.seed, "train.random-labels"));
  }
  return bundle;
}

// Trains into `dir`; returns the trained model.
ModelBundle trainInto(const TrainArgs& a, const DatasetBundle& loaded, const fs::path& dir,
                      std::ostream& out) {
  const ResolvedTrain r = resolveTrain(a, loaded);
  fs::create_directories(dir);
  const json config = trainConfigJson(a, r);
  const json inputs = {{"bundle", bundleInput(a.data)}};
  writeManifest(dir, "train", config, inputs, json::object());
  const DatasetBundle bundle = prepareTrainingData(loaded, a, r);
  const TrainResult result = trainPan(bundle, r.encoder, r.csm, r.train);
  saveCheckpoint(result.model, (dir / "checkpoint.json").string());
  writeTextFile((dir / "history.csv").string(), historyCsv(result.history));
  json extra = json::object();
  extra["best_epoch"] = result.best_epoch ? json(*result.best_epoch) : json(nullptr);
  extra["best_val"] = result.best_val ? json(*result.best_val) : json(nullptr);
  writeManifest(dir, "train", config, inputs, fileHashes(dir, {"checkpoint.json", "history.csv"}), extra);
  out << "trained " << result.history.size() << " epochs; checkpoint in " << dir.string() << "\n";
  return result.model;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string data;
  std::string out;
  std::vector<std::string> checkpoints;
  std::string task = "pair-accuracy";
  std::string split;
  std::uint64_t seed = 0;
  std::size_t choices = 4;
  std::size_t way = 5;
  std::size_t shot = 5;
  std::size_t query = 16;
  std::size_t episodes = 600;
  std::size_t k = 1;
  std::string fa = "or";
  std::size_t pairs_per_class = 1000;
};

const std::vector<std::string> kEvalTasks = {"pair-accuracy", "fitb",     "auc",        "fewshot",
                                             "recall",        "attr-map", "rank-report"};

void addEvalOptions(CLI::App* cmd, EvalArgs& a, bool with_task) {
  if (with_task) {
    cmd->add_option("--task", a.task, "pair-accuracy | fitb | auc | fewshot | recall | attr-map | rank-report");
  }
  cmd->add_option("--split", a.split, "split to evaluate (default test, novel for fewshot)");
  cmd->add_option("--choices", a.choices, "fitb: candidates per question");
  cmd->add_option("--way", a.way, "fewshot: classes per episode");
  cmd->add_option("--shot", a.shot, "fewshot: support items per class");
  cmd->add_option("--query", a.query, "fewshot: queries per class");
  cmd->add_option("--episodes", a.episodes, "fewshot: episodes");
  cmd->add_option("--k", a.k, "recall: cutoff");
  cmd->add_option("--eval-fa", a.fa, "attr-map: pair label function");
  cmd->add_option("--eval-pairs-per-class", a.pairs_per_class,
                  "pair-accuracy, attr-map, rank-report: pairs per class");
}

void validateEval(EvalArgs& a) {
  if (std::find(kEvalTasks.begin(), kEvalTasks.end(), a.task) == kEvalTasks.end()) {
    throw UsageError("unknown eval task '" + a.task + "'");
  }
  if (a.split.empty()) a.split = a.task == "fewshot" ? "novel" : "test";
  if (a.task == "fewshot" && (a.way < 1 || a.shot < 1 || a.query < 1 || a.episodes < 1)) {
    throw UsageError("fewshot needs --way, --shot, --query and --episodes of at least 1");
  }
  if (a.task == "fitb" && a.choices < 2) throw UsageError("--choices must be at least 2");
  if (a.task == "recall" && a.k < 1) throw UsageError("--k must be at least 1");
  if (a.pairs_per_class < 1) throw UsageError("--eval-pairs-per-class must be at least 1");
  try {
    parseCombineFn(a.fa);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

json evalConfigJson(const EvalArgs& a) {
  return {{"data", a.data},         {"out", a.out},
          {"checkpoints", a.checkpoints},
          {"task", a.task},         {"split", a.split},
          {"seed", a.seed},         {"choices", a.choices},
          {"way", a.way},           {"shot", a.shot},
          {"query", a.query},       {"episodes", a.episodes},
          {"k", a.k},               {"eval_fa", a.fa},
          {"eval_pairs_per_class", a.pairs_per_class}};
}

std::vector<ItemPair> sampledPairs(const DatasetBundle& bundle, const EvalArgs& a) {
  Engine engine = makeEngine(a.seed, "eval.pairs");
  std::vector<ItemPair> pairs;
  for (const auto& s : samplePairsWithin(bundle.graph, bundle.split(a.split), a.pairs_per_class, engine)) {
    pairs.emplace_back(s.i, s.j);
  }
  return pairs;
}

std::vector<MetricReport> evaluateModel(const ModelBundle& model, const DatasetBundle& bundle,
                                        const EvalArgs& a) {
  const PanScorer scorer(model);
  if (a.task == "pair-accuracy") {
    return {heldoutPairAccuracy(scorer, bundle, a.split, a.pairs_per_class, a.seed)};
  }
  if (a.task == "fitb" || a.task == "auc") {
    const auto it = bundle.sets.find(a.split);
    if (it == bundle.sets.end() || it->second.empty()) {
      throw GenerationError("bundle has no item sets for split '" + a.split + "'");
    }
    const auto& pool = bundle.split(a.split);
    if (a.task == "fitb") {
      const auto questions = buildFitbQuestions(it->second, a.choices, bundle.categories, pool,
                                                deriveSeed(a.seed, "eval.fitb"));
      return {fitbAccuracy(scorer, questions, bundle.features)};
    }
    const ItemSets negatives =
        resampleNegativeSets(it->second, bundle.categories, pool, deriveSeed(a.seed, "eval.negatives"));
    return {compatibilityAuc(scorer, it->second, negatives, bundle.features)};
  }
  if (a.task == "fewshot") {
    const auto episodes = buildEpisodes(bundle, a.split, a.way, a.shot, a.query, a.episodes,
                                        deriveSeed(a.seed, "eval.episodes"));
    return {fewShotAccuracy(scorer, episodes, bundle.features)};
  }
  if (a.task == "recall") {
    const std::vector<int>& labels = !bundle.classes.empty() ? bundle.classes : bundle.categories;
    if (labels.empty()) throw GenerationError("recall needs class or category labels");
    std::vector<std::size_t> queries;
    std::vector<std::size_t> gallery;
    const auto& items = bundle.split(a.split);
    for (std::size_t t = 0; t < items.size(); ++t) (t % 2 == 0 ? queries : gallery).push_back(items[t]);
    std::vector<int> ql;
    std::vector<int> gl;
    for (std::size_t i : queries) ql.push_back(labels[i]);
    for (std::size_t i : gallery) gl.push_back(labels[i]);
    return {recallAtK(gatherRows(bundle.features, queries), gatherRows(bundle.features, gallery), ql,
                      gl, a.k, &scorer)};
  }
  if (a.task == "attr-map") {
    if (!bundle.attributes) throw GenerationError("attr-map needs a bundle with attributes");
    const auto pairs = sampledPairs(bundle, a);
    const auto result = attributeMap(model, pairs, bundle.features, *bundle.attributes, parseCombineFn(a.fa));
    std::vector<MetricReport> reports{result.report};
    for (std::size_t k = 0; k < result.ap.size(); ++k) {
      if (!result.ap[k]) continue;
      MetricReport r;
      r.metric = "ap_" + std::to_string(k);
      r.value = *result.ap[k];
      r.count = pairs.size();
      reports.push_back(r);
    }
    return reports;
  }
  throw UsageError("task " + a.task + " is not a single-model metric");
}

std::string fingerprint(const std::vector<std::string>& parts) {
  std::string all;
  for (const auto& p : parts) all += sha256Hex(p);
  return sha256Hex(all).substr(0, 16);
}

std::vector<MetricReport> evalInto(const EvalArgs& a, const std::vector<ModelBundle>& models,
                                   const std::vector<std::string>& checkpoint_texts,
                                   const DatasetBundle& bundle, const fs::path& dir, std::ostream& out) {
  fs::create_directories(dir);
  const json config = evalConfigJson(a);
  json inputs = {{"bundle", bundleInput(a.data)}};
  json cps = json::array();
  for (std::size_t c = 0; c < a.checkpoints.size(); ++c) {
    cps.push_back({{"path", a.checkpoints[c]}, {"sha256", sha256Hex(checkpoint_texts[c])}});
  }
  inputs["checkpoints"] = cps;
  writeManifest(dir, "eval", config, inputs, json::object());
  for (const auto& m : models) m.validate(bundle.features.cols());

  std::vector<std::string> parts = checkpoint_texts;
  parts.push_back(inputs["bundle"]["manifest_sha256"].get<std::string>());
  // Paths are left out; the contents they name are already hashed.
  json settings = config;
  for (const char* key : {"data", "out", "checkpoints"}) settings.erase(key);
  parts.push_back(settings.dump());
  const std::string fp = fingerprint(parts);

  std::vector<std::string> written;
  std::vector<MetricReport> reports;
  if (a.task == "rank-report") {
    const auto pairs = sampledPairs(bundle, a);
    const auto rows = attributeRankReport(models, pairs, bundle.features);
    writeTextFile((dir / "rank_report.csv").string(), rankReportCsv(rows));
    written.push_back("rank_report.csv");
    out << "rank report over " << models.size() << " runs and " << pairs.size() << " pairs\n";
  } else {
    reports = evaluateModel(models.front(), bundle, a);
    for (auto& r : reports) r.fingerprint = fp;
    writeTextFile((dir / "metrics.csv").string(), reportsCsv(reports));
    writeTextFile((dir / "metrics.json").string(), reportsJson(reports));
    written = {"metrics.csv", "metrics.json"};
    for (const auto& r : reports) {
      out << r.metric << " = " << formatReal(r.value);
      if (r.interval) out << " +- " << formatReal(*r.interval);
      out << " (n=" << r.count << ")\n";
    }
  }
  writeManifest(dir, "eval", config, inputs, fileHashes(dir, written));
  return reports;
}

int runEval(EvalArgs a, std::ostream& out) {
  validateEval(a);
  if (a.checkpoints.empty()) throw UsageError("--checkpoint is required");
  if (a.task != "rank-report" && a.checkpoints.size() != 1) {
    throw UsageError("--task " + a.task + " takes exactly one --checkpoint");
  }
  std::vector<ModelBundle> models;
  std::vector<std::string> texts;
  for (const auto& path : a.checkpoints) {
    texts.push_back(readTextFile(path));
    models.push_back(parseCheckpoint(texts.back(), path));
  }
  const DatasetBundle bundle = loadBundle(a.data);
  evalInto(a, models, texts, bundle, fs::path(a.out), out);
  return 0;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::string dims = "d=6,M=4";
  std::size_t seeds = 100;
  std::uint64_t seed = 0;
  bool inject = false;
  std::string out;
};

GradcheckOptions parseDims(const GradcheckArgs& a) {
  GradcheckOptions o;
  o.seeds = a.seeds;
  o.seed = a.seed;
  o.inject_sign_error = a.inject;
  std::stringstream ss(a.dims);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--dims entries look like key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    std::size_t value = 0;
    try {
      std::size_t used = 0;
      value = std::stoul(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--dims value for " + key + " must be a positive integer");
    }
    if (key == "d") {
      o.d = value;
    } else if (key == "M" || key == "m") {
      o.m = value;
    } else if (key == "n") {
      o.n_items = value;
    } else if (key == "pairs") {
      o.pairs = value;
    } else {
      throw UsageError("unknown --dims key '" + key + "' (use d, M, n, pairs)");
    }
  }
  if (o.d < 1 || o.m < 1 || o.n_items < 2 || o.pairs < 1 || o.seeds < 1) {
    throw UsageError("gradcheck needs d, M, pairs, seeds >= 1 and n >= 2");
  }
  return o;
}

int runGradcheckCommand(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  const GradcheckOptions o = parseDims(a);
  const GradcheckSummary s = runGradcheck(o);
  if (!a.out.empty()) {
    const fs::path dir(a.out);
    fs::create_directories(dir);
    std::ostringstream csv;
    csv << "case,composition,max_relative_error,parameter,entry,analytic,numeric,entries\n";
    for (const auto& c : s.cases) {
      csv << c.index << ',' << c.composition << ',' << formatReal(c.report.max_relative_error) << ','
          << c.report.worst_parameter << ',' << c.report.worst_index << ','
          << formatReal(c.report.analytic) << ',' << formatReal(c.report.numeric) << ','
          << c.report.entries_checked << '\n';
    }
    writeTextFile((dir / "gradcheck.csv").string(), csv.str());
    const json config = {{"dims", a.dims}, {"seeds", a.seeds}, {"seed", a.seed},
                         {"inject_sign_error", a.inject}, {"out", a.out}};
    writeManifest(dir, "gradcheck", config, json::object(), fileHashes(dir, {"gradcheck.csv"}),
                  {{"worst_relative_error", s.worst_relative_error}, {"worst_path", s.worst_path}});
  }
  out << s.cases.size() << " checks, worst relative error " << formatReal(s.worst_relative_error)
      << " at " << s.worst_path << "\n";
  if (!s.passed()) {
    err << "gradcheck FAILED: " << s.worst_path << " relative error "
        << formatReal(s.worst_relative_error) << " >= " << formatReal(o.tolerance) << "\n";
    return 1;
  }
  out << "gradcheck passed\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  TrainArgs train;
  EvalArgs eval;
  std::string axis;
  std::vector<std::string> values;
  std::size_t runs = 1;
  std::size_t jobs = 1;
  std::string metric = "pair-accuracy";
};

int runSweep(SweepArgs a, std::ostream& out, std::ostream& err) {
  if (a.axis != "lambda" && a.axis != "conditions" && a.axis != "fa") {
    throw UsageError("--axis must be lambda, conditions or fa");
  }
  if (a.values.empty()) throw UsageError("--values needs at least one value");
  if (a.runs < 1 || a.jobs < 1) throw UsageError("--runs and --jobs must be at least 1");
  a.eval.task = a.metric;
  a.eval.data = a.train.data;
  validateEval(a.eval);
  if (a.eval.task == "rank-report") throw UsageError("rank-report is not a sweep metric");

  std::vector<TrainArgs> variants;
  for (const auto& v : a.values) {
    TrainArgs t = a.train;
    try {
      if (a.axis == "lambda") {
        std::size_t used = 0;
        t.train.lambda = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } else if (a.axis == "conditions") {
        std::size_t used = 0;
        t.conditions = std::stoul(v, &used);
        if (used != v.size() || t.conditions == 0) throw std::invalid_argument(v);
      } else {
        parseCombineFn(v);
        t.fa = v;
      }
    } catch (const std::exception&) {
      throw UsageError("bad --values entry '" + v + "' for axis " + a.axis);
    }
    variants.push_back(t);
  }

  const DatasetBundle bundle = loadBundle(a.train.data);
  for (const auto& t : variants) resolveTrain(t, bundle);
  const fs::path root(a.train.out);
  fs::create_directories(root);

  struct Job {
    std::size_t value;
    std::size_t run;
    std::optional<double> metric;
    std::string error;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < a.values.size(); ++v)
    for (std::size_t r = 0; r < a.runs; ++r) jobs.push_back({v, r, std::nullopt, ""});

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t idx = next++; idx < jobs.size(); idx = next++) {
      Job& job = jobs[idx];
      const fs::path dir = root / (a.axis + "=" + a.values[job.value]) / ("run" + std::to_string(job.run));
      try {
        TrainArgs t = variants[job.value];
        t.seed = a.train.seed + job.run;
        t.out = dir.string();
        std::ostringstream sink;
        const ModelBundle model = trainInto(t, bundle, dir / "train", sink);
        EvalArgs e = a.eval;
        e.seed = t.seed;
        e.out = (dir / "eval").string();
        e.checkpoints = {(dir / "train" / "checkpoint.json").string()};
        const std::string text = readTextFile(e.checkpoints.front());
        const auto reports = evalInto(e, {model}, {text}, bundle, dir / "eval", sink);
        job.metric = reports.front().value;
      } catch (const std::exception& ex) {
        job.error = ex.what();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t j = 0; j < std::min(a.jobs, jobs.size()); ++j) threads.emplace_back(worker);
  for (auto& th : threads) th.join();

  std::ostringstream csv;
  std::ostringstream summary;
  std::ostringstream failures;
  csv << "value,run,metric\n";
  summary << "value,mean,interval,runs\n";
  failures << "value,run,error\n";
  bool failed = false;
  for (std::size_t v = 0; v < a.values.size(); ++v) {
    std::vector<double> ok;
    for (const auto& job : jobs) {
      if (job.value != v) continue;
      csv << a.values[v] << ',' << job.run << ',' << (job.metric ? formatReal(*job.metric) : "") << '\n';
      if (job.metric) {
        ok.push_back(*job.metric);
      } else {
        failed = true;
        std::string msg = job.error;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        failures << a.values[v] << ',' << job.run << ',' << msg << '\n';
        err << "run " << a.axis << "=" << a.values[v] << " #" << job.run << " failed: " << job.error << "\n";
      }
    }
    if (ok.empty()) {
      summary << a.values[v] << ",,," << 0 << '\n';
      continue;
    }
    const auto [mean, half] = meanWithInterval(ok);
    summary << a.values[v] << ',' << formatReal(mean) << ',' << formatReal(half) << ',' << ok.size() << '\n';
    out << a.axis << "=" << a.values[v] << ": " << formatReal(mean) << " +- " << formatReal(half) << "\n";
  }
  writeTextFile((root / "sweep.csv").string(), csv.str());
  writeTextFile((root / "summary.csv").string(), summary.str());
  writeTextFile((root / "failures.csv").string(), failures.str());
  json values = a.values;
  const json config = {{"axis", a.axis}, {"values", values}, {"runs", a.runs}, {"jobs", a.jobs},
                       {"metric", a.metric}, {"train", trainConfigJson(a.train, resolveTrain(a.train, bundle))},
                       {"eval", evalConfigJson(a.eval)}};
  writeManifest(root, "sweep", config, {{"bundle", bundleInput(a.train.data)}},
                fileHashes(root, {"sweep.csv", "summary.csv", "failures.csv"}));
  return failed ? 1 : 0;
}

}  // namespace

int runCli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pairwise attribute-informed similarity networks", "pan"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every command");

  std::string config_path;
  GenArgs gen;
  TrainArgs train;
  EvalArgs eval;
  GradcheckArgs grad;
  SweepArgs sweep;

  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset bundle");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "root seed (default $PAN_SEED or 0)");
  gen_cmd->add_option("--config", config_path, "JSON config file with snake_case keys");
  addGenOptions(gen_cmd, gen);

  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a bundle");
  train_cmd->add_option("--data", train.data, "bundle directory")->required();
  train_cmd->add_option("--out", train.out, "run directory")->required();
  train_cmd->add_option("--seed", train.seed, "root seed (default $PAN_SEED or 0)");
  train_cmd->add_option("--config", config_path, "JSON config file with snake_case keys");
  addTrainOptions(train_cmd, train);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--data", eval.data, "bundle directory")->required();
  eval_cmd->add_option("--out", eval.out, "run directory")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoints, "checkpoint file (repeat for rank-report)");
  eval_cmd->add_option("--seed", eval.seed, "root seed (default $PAN_SEED or 0)");
  eval_cmd->add_option("--config", config_path, "JSON config file with snake_case keys");
  addEvalOptions(eval_cmd, eval, true);

  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "check gradients against finite differences");
  grad_cmd->add_option("--dims", grad.dims, "d=<features>,M=<conditions>[,n=<items>,pairs=<pairs>]");
  grad_cmd->add_option("--seeds", grad.seeds, "number of random instances");
  grad_cmd->add_option("--seed", grad.seed, "root seed (default $PAN_SEED or 0)");
  grad_cmd->add_flag("--inject-sign-error", grad.inject, "flip one analytic gradient entry");
  grad_cmd->add_option("--out", grad.out, "optional report directory");
  grad_cmd->add_option("--config", config_path, "JSON config file with snake_case keys");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "train and evaluate over one axis");
  sweep_cmd->add_option("--data", sweep.train.data, "bundle directory")->required();
  sweep_cmd->add_option("--out", sweep.train.out, "run directory")->required();
  sweep_cmd->add_option("--axis", sweep.axis, "lambda | conditions | fa")->required();
  sweep_cmd->add_option("--values", sweep.values, "axis values")->required();
  sweep_cmd->add_option("--runs", sweep.runs, "seeds per value");
  sweep_cmd->add_option("--jobs", sweep.jobs, "parallel runs");
  sweep_cmd->add_option("--metric", sweep.metric, "eval task reported per run");
  sweep_cmd->add_option("--seed", sweep.train.seed, "root seed (default $PAN_SEED or 0)");
  sweep_cmd->add_option("--config", config_path, "JSON config file with snake_case keys");
  addTrainOptions(sweep_cmd, sweep.train);
  addEvalOptions(sweep_cmd, sweep.eval, false);

  try {
    const std::uint64_t seed = defaultSeed();
    gen.seed = train.seed = eval.seed = grad.seed = sweep.train.seed = seed;
    std::vector<std::string> args = raw_args.empty() ? raw_args : spliceConfig(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (CLI::App* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return runGen(gen, out);
    if (train_cmd->parsed()) {
      const DatasetBundle bundle = loadBundle(train.data);
      resolveTrain(train, bundle);
      trainInto(train, bundle, fs::path(train.out), out);
      return 0;
    }
    if (eval_cmd->parsed()) return runEval(eval, out);
    if (grad_cmd->parsed()) return runGradcheckCommand(grad, out, err);
    if (sweep_cmd->parsed()) {
      sweep.eval.seed = sweep.train.seed;
      return runSweep(sweep, out, err);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace pan
