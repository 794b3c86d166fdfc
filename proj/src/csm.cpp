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

#include "pan/csm.hpp"

#include <cmath>

#include "pan/errors.hpp"
#include "pan/rng.hpp"

namespace pan {

std::string toString(Supervision s) {
  switch (s) {
    case Supervision::kUnsupervised:
      return "unsupervised";
    case Supervision::kSupervised:
      return "supervised";
    case Supervision::kHybrid:
      return "hybrid";
  }
  return "unsupervised";
}

Supervision parseSupervision(const std::string& text) {
  if (text == "unsupervised") return Supervision::kUnsupervised;
  if (text == "supervised") return Supervision::kSupervised;
  if (text == "hybrid") return Supervision::kHybrid;
  throw ParseError("unknown supervision mode '" + text + "'");
}

std::size_t CsmConfig::supervisedCount() const {
  switch (supervision) {
    case Supervision::kUnsupervised:
      return 0;
    case Supervision::kSupervised:
      return m;
    case Supervision::kHybrid:
      return m_sup;
  }
  return 0;
}

void CsmConfig::validate() const {
  if (m < 1) throw ContractError("CSM needs at least one condition");
  if (supervision == Supervision::kHybrid && (m_sup < 1 || m_sup >= m)) {
    throw ContractError("hybrid mode needs 1 <= m_sup < m, got m_sup=" + std::to_string(m_sup) +
                        " m=" + std::to_string(m));
  }
}

void CsmParameters::validate() const {
  if (w1.rows() < 1 || w1.cols() < 1) throw ContractError("CSM weights must be non-empty");
  requireSameShape(w1, w2, "CSM w1/w2");
  requireSameShape(b1, b2, "CSM b1/b2");
  if (b1.rows() != 1 || b1.cols() != w1.cols()) {
    throw DimensionError("CSM bias shape " + b1.shapeString() + " does not match M=" +
                         std::to_string(w1.cols()));
  }
}

ad::ParameterList CsmParameters::toList() const {
  return {{kW1, w1}, {kB1, b1}, {kW2, w2}, {kB2, b2}};
}

CsmParameters CsmParameters::fromList(const ad::ParameterList& list) {
  CsmParameters p{ad::findParameter(list, kW1), ad::findParameter(list, kB1),
                  ad::findParameter(list, kW2), ad::findParameter(list, kB2)};
  p.validate();
  return p;
}

CsmParameters initParams(std::size_t d, std::size_t m, std::uint64_t seed) {
  if (d < 1 || m < 1) {
    throw ContractError("initParams needs d >= 1 and m >= 1, got d=" + std::to_string(d) +
                        " m=" + std::to_string(m));
  }
  Engine engine = makeEngine(seed, "csm.init");
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  auto draw = [&] {
    Matrix w(d, m);
    for (double& v : w.data()) v = (2.0 * uniformUnit(engine) - 1.0) * bound;
    return w;
  };
  CsmParameters p;
  p.w1 = draw();
  p.w2 = draw();
  p.b1 = Matrix(1, m);
  p.b2 = Matrix(1, m);
  return p;
}

namespace {

// Row-batched forward on precomputed |h_i - h_j| rows. Every row is computed
// independently with identical operation order, so a batch of one and a row
// of a larger batch agree bitwise.
std::vector<CsmOutput> forwardRows(const Matrix& diff, const CsmParameters& params,
                                   const CsmConfig& config) {
  const Matrix rho = sigmoid(addRowBroadcast(matmul(diff, params.w1), params.b1));
  const Matrix omega = rowSoftmax(addRowBroadcast(matmul(diff, params.w2), params.b2));
  const std::size_t m = rho.cols();
  std::vector<CsmOutput> out(diff.rows());
  for (std::size_t r = 0; r < diff.rows(); ++r) {
    CsmOutput& o = out[r];
    o.rho.assign(rho.row(r).begin(), rho.row(r).end());
    o.omega.assign(omega.row(r).begin(), omega.row(r).end());
    double s = 0.0;
    if (config.relevance_enabled) {
      for (std::size_t k = 0; k < m; ++k) s += o.rho[k] * o.omega[k];
      o.p = s;
    } else {
      for (std::size_t k = 0; k < m; ++k) s += o.rho[k];
      o.p = s * (1.0 / static_cast<double>(m));
    }
  }
  return out;
}

void checkWidth(std::size_t got, const CsmParameters& params, const char* what) {
  if (got != params.d()) {
    throw DimensionError(std::string(what) + " has dimension " + std::to_string(got) +
                         " but the CSM expects d=" + std::to_string(params.d()));
  }
}

}  // namespace

CsmOutput csmForward(std::span<const double> h_i, std::span<const double> h_j,
                     const CsmParameters& params, const CsmConfig& config) {
  checkWidth(h_i.size(), params, "h_i");
  checkWidth(h_j.size(), params, "h_j");
  Matrix diff(1, h_i.size());
  for (std::size_t c = 0; c < h_i.size(); ++c) diff[c] = std::fabs(h_i[c] - h_j[c]);
  return forwardRows(diff, params, config)[0];
}

std::vector<CsmOutput> csmBatchForward(std::span<const ItemPair> pairs, const Matrix& features,
                                       const CsmParameters& params, const CsmConfig& config) {
  checkWidth(features.cols(), params, "feature matrix");
  Matrix diff(pairs.size(), features.cols());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto [i, j] = pairs[r];
    if (i >= features.rows() || j >= features.rows()) {
      throw IndexError("pair (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") out of range for " + std::to_string(features.rows()) + " items");
    }
    const auto a = features.row(i);
    const auto b = features.row(j);
    for (std::size_t c = 0; c < a.size(); ++c) diff(r, c) = std::fabs(a[c] - b[c]);
  }
  return forwardRows(diff, params, config);
}

CsmNodes csmForward(ad::Var h_i, ad::Var h_j, const CsmVars& vars, bool relevance_enabled) {
  const ad::Var diff = ad::abs(ad::subtract(h_i, h_j));
  CsmNodes out;
  out.rho = ad::sigmoid(ad::addRowBroadcast(ad::matmul(diff, vars.w1), vars.b1));
  out.omega = ad::rowSoftmax(ad::addRowBroadcast(ad::matmul(diff, vars.w2), vars.b2));
  out.p = relevance_enabled ? ad::rowSums(ad::multiply(out.rho, out.omega))
                            : ad::rowMeans(out.rho);
  return out;
}

}  // namespace pan
