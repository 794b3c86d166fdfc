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

#include "pan/gradcheck.hpp"

#include <cmath>
#include <sstream>

#include "pan/csm.hpp"
#include "pan/encoders.hpp"
#include "pan/errors.hpp"
#include "pan/rng.hpp"
#include "pan/training.hpp"

namespace pan {

bool GradcheckSummary::passed() const { return !cases.empty() && worst_relative_error < tolerance; }

namespace {

// Gradients at |x| and relu kinks are one-sided; instances that land this
// close to a kink are redrawn.
constexpr double kKinkMargin = 1e-3;

struct Instance {
  EncoderSpec encoder;
  CsmConfig csm;
  double lambda = 0.0;
  ad::ParameterList params;
  std::size_t n_enc = 0;
  bool input_is_param = false;
  Matrix x;
  Matrix adjacency;
  PairBatch batch;
  std::string composition;
};

Matrix gaussian(std::size_t rows, std::size_t cols, double sd, Engine& engine) {
  Matrix out(rows, cols);
  for (double& v : out.data()) v = sd * standardNormal(engine);
  return out;
}

Instance drawInstance(const GradcheckOptions& o, std::size_t index, Engine& engine) {
  Instance in;
  switch (index % 3) {
    case 0:
      in.encoder.kind = EncoderKind::kIdentity;
      break;
    case 1:
      in.encoder.kind = EncoderKind::kMlp;
      break;
    default:
      in.encoder.kind = EncoderKind::kGcn;
      break;
  }
  in.encoder.num_layers = 2;
  in.encoder.hidden_dim = o.d;
  in.encoder.layer_dims = {o.d, o.d};
  in.csm.m = o.m;
  const std::size_t layout = uniformIndex(engine, o.m >= 2 ? 3 : 2);
  in.csm.supervision = layout == 0   ? Supervision::kUnsupervised
                       : layout == 1 ? Supervision::kSupervised
                                     : Supervision::kHybrid;
  if (in.csm.supervision == Supervision::kHybrid) in.csm.m_sup = 1 + uniformIndex(engine, o.m - 1);
  in.csm.relevance_enabled = uniformIndex(engine, 2) == 1;
  in.lambda = in.csm.supervision == Supervision::kUnsupervised ? 0.0 : 0.1 + 2.0 * uniformUnit(engine);

  in.x = gaussian(o.n_items, o.d, 1.0, engine);
  in.params = initEncoder(in.encoder, o.d, engine());
  in.n_enc = in.params.size();
  for (auto& p : in.params) p.value = gaussian(p.value.rows(), p.value.cols(), 0.5, engine);
  if (in.params.empty()) {
    in.input_is_param = true;
    in.params.push_back({"input.x", in.x});
    in.n_enc = 0;
  }
  const std::size_t d_out = in.encoder.outputDim(o.d);
  const CsmParameters csm = initParams(d_out, o.m, engine());
  for (auto p : csm.toList()) {
    p.value = gaussian(p.value.rows(), p.value.cols(), 0.5, engine);
    in.params.push_back(std::move(p));
  }

  if (in.encoder.kind == EncoderKind::kGcn) {
    std::vector<ItemPair> edges;
    for (std::size_t i = 0; i < o.n_items; ++i)
      for (std::size_t j = i + 1; j < o.n_items; ++j)
        if (uniformUnit(engine) < 0.3) edges.emplace_back(i, j);
    in.adjacency = normalizeAdjacency(SimilarityGraph(o.n_items, std::move(edges)));
  }

  const std::size_t width = in.csm.supervisedCount();
  in.batch.targets = Matrix(o.pairs, 1);
  if (width > 0) {
    in.batch.labels = Matrix(o.pairs, width);
    in.batch.mask = Matrix(o.pairs, width);
  }
  for (std::size_t r = 0; r < o.pairs; ++r) {
    const std::size_t i = uniformIndex(engine, o.n_items);
    std::size_t j = uniformIndex(engine, o.n_items - 1);
    if (j >= i) ++j;
    in.batch.left.push_back(i);
    in.batch.right.push_back(j);
    in.batch.targets[r] = static_cast<double>(uniformIndex(engine, 2));
    for (std::size_t k = 0; k < width; ++k) {
      in.batch.labels(r, k) = static_cast<double>(uniformIndex(engine, 2));
      in.batch.mask(r, k) = uniformUnit(engine) < 0.8 ? 1.0 : 0.0;
    }
  }
  std::ostringstream name;
  name << toString(in.encoder.kind) << '+' << toString(in.csm.supervision)
       << (in.csm.relevance_enabled ? "+relevance" : "+mean") << "+lambda=" << in.lambda;
  in.composition = name.str();
  return in;
}

ad::Var buildLoss(const Instance& in, ad::Tape& tape, const std::vector<ad::Var>& vars) {
  const std::span<const ad::Var> all(vars);
  const std::size_t offset = in.input_is_param ? 1 : in.n_enc;
  const ad::Var x = in.input_is_param ? vars[0] : tape.constant(in.x);
  const CsmVars cv{vars[offset], vars[offset + 1], vars[offset + 2], vars[offset + 3]};
  return panObjective(in.encoder, all.first(in.n_enc), cv, x,
                      in.encoder.kind == EncoderKind::kGcn ? &in.adjacency : nullptr, nullptr,
                      in.batch, in.csm.relevance_enabled, in.lambda);
}

}  // namespace

GradcheckSummary runGradcheck(const GradcheckOptions& options) {
  if (options.d < 1 || options.m < 1 || options.n_items < 2 || options.pairs < 1) {
    throw ContractError("gradcheck dims must be positive with at least two items");
  }
  GradcheckSummary summary;
  summary.tolerance = options.tolerance;
  for (std::size_t s = 0; s < options.seeds; ++s) {
    Engine engine = makeEngine(options.seed, "gradcheck." + std::to_string(s));
    Instance in;
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == 1000) throw GenerationError("gradcheck could not avoid activation kinks");
      in = drawInstance(options, s, engine);
      ad::Tape tape;
      buildLoss(in, tape, tape.parameters(in.params));
      if (tape.minKinkDistance() >= kKinkMargin) break;
    }
    const auto builder = [&in](ad::Tape& tape, const std::vector<ad::Var>& vars) {
      return buildLoss(in, tape, vars);
    };
    std::function<void(ad::GradientStore&)> tamper;
    if (options.inject_sign_error) {
      tamper = [&in](ad::GradientStore& grads) {
        for (const auto& p : in.params) {
          Matrix& g = grads.at(p.name);
          for (std::size_t e = 0; e < g.size(); ++e) {
            if (std::fabs(g[e]) > 1e-6) {
              g[e] = -g[e];
              return;
            }
          }
        }
      };
    }
    GradcheckCase c{s, in.composition, ad::finiteDiffCheck(builder, in.params, options.step, tamper, options.floor)};
    if (summary.cases.empty() || c.report.max_relative_error > summary.worst_relative_error) {
      summary.worst_relative_error = c.report.max_relative_error;
      summary.worst_path = "case" + std::to_string(s) + "/" + c.report.worst_parameter + "[" +
                           std::to_string(c.report.worst_index) + "]";
    }
    summary.cases.push_back(std::move(c));
  }
  return summary;
}

}  // namespace pan
