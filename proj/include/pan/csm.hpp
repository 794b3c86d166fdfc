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

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pan/autodiff.hpp"
#include "pan/matrix.hpp"

namespace pan {

using ItemPair = std::pair<std::size_t, std::size_t>;

enum class Supervision { kUnsupervised, kSupervised, kHybrid };

std::string toString(Supervision s);
Supervision parseSupervision(const std::string& text);

struct CsmConfig {
  std::size_t m = 1;
  Supervision supervision = Supervision::kUnsupervised;
  // Supervised prefix length; only read in hybrid mode.
  std::size_t m_sup = 0;
  bool relevance_enabled = true;

  // Number of leading conditions that receive attribute loss.
  std::size_t supervisedCount() const;
  void validate() const;
};

/// W1, W2 are d x M; b1, b2 are 1 x M.
struct CsmParameters {
  Matrix w1;
  Matrix b1;
  Matrix w2;
  Matrix b2;

  std::size_t d() const { return w1.rows(); }
  std::size_t m() const { return w1.cols(); }
  void validate() const;

  ad::ParameterList toList() const;
  static CsmParameters fromList(const ad::ParameterList& list);
};

inline constexpr const char* kW1 = "csm.w1";
inline constexpr const char* kB1 = "csm.b1";
inline constexpr const char* kW2 = "csm.w2";
inline constexpr const char* kB2 = "csm.b2";

struct CsmOutput {
  std::vector<double> rho;
  std::vector<double> omega;
  double p = 0.0;
};

CsmParameters initParams(std::size_t d, std::size_t m, std::uint64_t seed);

CsmOutput csmForward(std::span<const double> h_i, std::span<const double> h_j,
                     const CsmParameters& params, const CsmConfig& config);

std::vector<CsmOutput> csmBatchForward(std::span<const ItemPair> pairs, const Matrix& features,
                                       const CsmParameters& params, const CsmConfig& config);

/// Differentiable CSM over row-aligned pair features. rho and omega are R x M,
/// p is R x 1.
struct CsmNodes {
  ad::Var rho;
  ad::Var omega;
  ad::Var p;
};

struct CsmVars {
  ad::Var w1;
  ad::Var b1;
  ad::Var w2;
  ad::Var b2;
};

CsmNodes csmForward(ad::Var h_i, ad::Var h_j, const CsmVars& vars, bool relevance_enabled);

}  // namespace pan
