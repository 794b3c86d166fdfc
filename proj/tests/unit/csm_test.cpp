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

#include "pan/csm.hpp"
#include "pan/errors.hpp"
#include "pan/rng.hpp"

namespace pan {
namespace {

CsmConfig config(std::size_t m, bool relevance = true) {
  CsmConfig c;
  c.m = m;
  c.relevance_enabled = relevance;
  return c;
}

std::vector<double> randomVector(std::size_t n, Engine& e) {
  std::vector<double> v(n);
  for (double& x : v) x = standardNormal(e);
  return v;
}

CsmParameters randomParams(std::size_t d, std::size_t m, Engine& e) {
  CsmParameters p = initParams(d, m, e());
  for (Matrix* w : {&p.b1, &p.b2})
    for (double& v : w->data()) v = standardNormal(e);
  return p;
}

TEST(Csm, InitIsDeterministicWithZeroBiases) {
  const CsmParameters a = initParams(6, 4, 11);
  const CsmParameters b = initParams(6, 4, 11);
  EXPECT_EQ(a.w1, b.w1);
  EXPECT_EQ(a.w2, b.w2);
  EXPECT_EQ(a.b1, Matrix(1, 4));
  EXPECT_EQ(a.b2, Matrix(1, 4));
  EXPECT_NE(initParams(6, 4, 12).w1, a.w1);
  const double bound = 1.0 / std::sqrt(6.0);
  for (double v : a.w1.data()) EXPECT_LE(std::fabs(v), bound);
}

TEST(Csm, InitMeanWithinThreeSigma) {
  const std::size_t d = 25;
  const CsmParameters p = initParams(d, 400, 3);  // 10^4 entries per matrix
  for (const Matrix* w : {&p.w1, &p.w2}) {
    double sum = 0.0;
    for (double v : w->data()) sum += v;
    const double mean = sum / static_cast<double>(w->size());
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    const double sigma = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w->size()));
    EXPECT_LT(std::fabs(mean), 3.0 * sigma);
  }
}

TEST(Csm, InitRejectsZeroDims) {
  EXPECT_THROW(initParams(0, 3, 1), ContractError);
  EXPECT_THROW(initParams(3, 0, 1), ContractError);
}

TEST(Csm, IdenticalInputsWithZeroBias) {
  const CsmParameters p = initParams(5, 3, 1);
  const std::vector<double> h{0.3, -1.0, 2.0, 0.0, 5.0};
  const CsmOutput out = csmForward(h, h, p, config(3));
  for (double r : out.rho) EXPECT_EQ(r, 0.5);
  for (double w : out.omega) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(out.p, 0.5);
}

TEST(Csm, IdenticalInputsDependOnlyOnBiases) {
  Engine e = makeEngine(2, "t");
  const CsmParameters p = randomParams(4, 3, e);
  const CsmOutput a = csmForward(randomVector(4, e), std::vector<double>(4, 0.0), p, config(3));
  const auto h1 = randomVector(4, e);
  const auto h2 = randomVector(4, e);
  const CsmOutput x = csmForward(h1, h1, p, config(3));
  const CsmOutput y = csmForward(h2, h2, p, config(3));
  EXPECT_EQ(x.rho, y.rho);
  EXPECT_EQ(x.omega, y.omega);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(x.rho[k], 1.0 / (1.0 + std::exp(-p.b1[k])));
  (void)a;
}

TEST(Csm, HandWorkedExample) {
  CsmParameters p;
  p.w1 = Matrix::fromRows({{1, 0}, {0, 1}});
  p.b1 = Matrix(1, 2);
  p.w2 = Matrix(2, 2);
  p.b2 = Matrix(1, 2);
  const CsmOutput out = csmForward(std::vector<double>{1, 0}, std::vector<double>{0, 0}, p, config(2));
  EXPECT_NEAR(out.rho[0], 0.7310585786300049, 1e-15);
  EXPECT_EQ(out.rho[1], 0.5);
  EXPECT_EQ(out.omega[0], 0.5);
  EXPECT_EQ(out.omega[1], 0.5);
  EXPECT_NEAR(out.p, 0.6155292893150024, 1e-15);
}

TEST(Csm, DimensionMismatchNamesD) {
  const CsmParameters p = initParams(3, 2, 1);
  try {
    csmForward(std::vector<double>{1, 2}, std::vector<double>{1, 2}, p, config(2));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("d=3"), std::string::npos) << e.what();
  }
}

TEST(Csm, SymmetryIsBitExact) {
  Engine e = makeEngine(4, "t");
  const CsmParameters p = randomParams(8, 5, e);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto hi = randomVector(8, e);
    const auto hj = randomVector(8, e);
    for (bool rel : {true, false}) {
      const CsmOutput a = csmForward(hi, hj, p, config(5, rel));
      const CsmOutput b = csmForward(hj, hi, p, config(5, rel));
      EXPECT_EQ(a.rho, b.rho);
      EXPECT_EQ(a.omega, b.omega);
      EXPECT_EQ(a.p, b.p);
    }
  }
}

TEST(Csm, OutputInvariants) {
  Engine e = makeEngine(5, "t");
  const CsmParameters p = randomParams(6, 4, e);
  for (int rep = 0; rep < 500; ++rep) {
    const auto hi = randomVector(6, e);
    const auto hj = randomVector(6, e);
    const CsmOutput on = csmForward(hi, hj, p, config(4, true));
    const CsmOutput off = csmForward(hi, hj, p, config(4, false));
    double sum = 0.0;
    double dot = 0.0;
    double mean = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_GE(on.omega[k], 0.0);
      EXPECT_LE(on.omega[k], 1.0);
      EXPECT_GT(on.rho[k], 0.0);
      EXPECT_LT(on.rho[k], 1.0);
      sum += on.omega[k];
      dot += on.rho[k] * on.omega[k];
      mean += off.rho[k] / 4.0;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_NEAR(on.p, dot, 1e-12);
    EXPECT_NEAR(off.p, mean, 1e-12);
    EXPECT_GE(on.p, 0.0);
    EXPECT_LE(on.p, 1.0);
  }
}

TEST(Csm, SoftmaxShiftInvariance) {
  Engine e = makeEngine(6, "t");
  CsmParameters p = randomParams(5, 4, e);
  const auto hi = randomVector(5, e);
  const auto hj = randomVector(5, e);
  const CsmOutput base = csmForward(hi, hj, p, config(4));
  for (double& b : p.b2.data()) b += 17.25;
  const CsmOutput shifted = csmForward(hi, hj, p, config(4));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(base.omega[k], shifted.omega[k], 1e-12);
  EXPECT_EQ(base.rho, shifted.rho);
}

TEST(Csm, BatchMatchesPerPairBitExactly) {
  Engine e = makeEngine(7, "t");
  const CsmParameters p = randomParams(6, 3, e);
  Matrix features(10, 6);
  for (double& v : features.data()) v = standardNormal(e);
  std::vector<ItemPair> pairs;
  for (int r = 0; r < 32; ++r) pairs.emplace_back(uniformIndex(e, 10), uniformIndex(e, 10));
  pairs.emplace_back(2, 7);
  pairs.emplace_back(7, 2);
  const auto batch = csmBatchForward(pairs, features, p, config(3));
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const CsmOutput single =
        csmForward(features.row(pairs[r].first), features.row(pairs[r].second), p, config(3));
    EXPECT_EQ(batch[r].rho, single.rho);
    EXPECT_EQ(batch[r].omega, single.omega);
    EXPECT_EQ(batch[r].p, single.p);
  }
  EXPECT_EQ(batch[32].p, batch[33].p);
  const std::vector<ItemPair> bad{{0, 10}};
  EXPECT_THROW(csmBatchForward(bad, features, p, config(3)), IndexError);
}

TEST(Csm, TapeForwardMatchesValueForward) {
  Engine e = makeEngine(8, "t");
  const CsmParameters p = randomParams(4, 3, e);
  Matrix hi(5, 4);
  Matrix hj(5, 4);
  for (double& v : hi.data()) v = standardNormal(e);
  for (double& v : hj.data()) v = standardNormal(e);
  for (bool rel : {true, false}) {
    ad::Tape tape;
    const auto vars = tape.parameters(p.toList());
    const CsmNodes n = csmForward(tape.constant(hi), tape.constant(hj),
                                  CsmVars{vars[0], vars[1], vars[2], vars[3]}, rel);
    for (std::size_t r = 0; r < 5; ++r) {
      const CsmOutput o = csmForward(hi.row(r), hj.row(r), p, config(3, rel));
      EXPECT_EQ(n.p.value()[r], o.p);
      for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(n.rho.value()(r, k), o.rho[k]);
    }
  }
}

TEST(Csm, ConfigValidation) {
  CsmConfig c;
  c.m = 4;
  c.supervision = Supervision::kHybrid;
  c.m_sup = 4;
  EXPECT_THROW(c.validate(), ContractError);
  c.m_sup = 2;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.supervisedCount(), 2u);
  c.supervision = Supervision::kSupervised;
  EXPECT_EQ(c.supervisedCount(), 4u);
  c.supervision = Supervision::kUnsupervised;
  EXPECT_EQ(c.supervisedCount(), 0u);
  c.m = 0;
  EXPECT_THROW(c.validate(), ContractError);
  EXPECT_EQ(parseSupervision("hybrid"), Supervision::kHybrid);
  EXPECT_THROW(parseSupervision("semi"), ParseError);
}

TEST(Csm, ParameterListRoundTrip) {
  const CsmParameters p = initParams(3, 2, 5);
  const CsmParameters q = CsmParameters::fromList(p.toList());
  EXPECT_EQ(p.w1, q.w1);
  EXPECT_EQ(p.w2, q.w2);
  CsmParameters bad = p;
  bad.b1 = Matrix(1, 3);
  EXPECT_THROW(bad.validate(), DimensionError);
}

}  // namespace
}  // namespace pan
