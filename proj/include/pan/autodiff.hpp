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

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pan/matrix.hpp"

namespace pan::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

/// Gradients keyed by parameter name; each has its parameter's shape.
using GradientStore = std::map<std::string, Matrix>;

/// Ordered, named parameter values. Order fixes iteration in optimizers and
/// gradient checks, so it is part of a model's reproducibility contract.
struct NamedParameter {
  std::string name;
  Matrix value;
};
using ParameterList = std::vector<NamedParameter>;

const Matrix& findParameter(const ParameterList& params, const std::string& name);
Matrix& findParameter(ParameterList& params, const std::string& name);

enum class Op {
  kConstant,
  kParameter,
  kMatmul,
  kAdd,
  kSubtract,
  kMultiply,
  kScale,
  kAddScalar,
  kAbs,
  kSigmoid,
  kRelu,
  kRowSoftmax,
  kAddRowBroadcast,
  kRowSums,
  kSumAll,
  kGatherRows,
  kSliceCols,
  kMaskedBceRows,
  kRowL2Norm,
};

/// Records primitive matrix operations for one forward pass, then yields
/// exact first-order gradients with respect to every registered parameter.
///
/// A tape is single-owner: build it once, call backward once (or more; it
/// does not mutate recorded values), then discard.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(const std::string& name, Matrix value);

  // Registers every entry of `params` in order and returns their handles.
  std::vector<Var> parameters(const ParameterList& params);

  GradientStore backward(Var output) const;

  const Matrix& value(Var v) const { return nodes_[v.index()].value; }
  std::size_t size() const { return nodes_.size(); }

  // Smallest |input| seen by any abs or relu node; +inf when there are none.
  // Finite-difference probes closer than this to a kink are unreliable.
  double minKinkDistance() const;

 private:
  struct Node {
    Op op = Op::kConstant;
    std::size_t a = kNone;
    std::size_t b = kNone;
    Matrix value;
    bool requires_grad = false;
    double scalar = 0.0;
    std::vector<std::size_t> indices;
    Matrix aux_labels;
    Matrix aux_mask;
    std::string name;
  };
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  Var push(Node node);
  Node& last() { return nodes_.back(); }

  friend Var matmul(Var a, Var b);
  friend Var add(Var a, Var b);
  friend Var subtract(Var a, Var b);
  friend Var multiply(Var a, Var b);
  friend Var scale(Var a, double factor);
  friend Var addScalar(Var a, double offset);
  friend Var abs(Var a);
  friend Var sigmoid(Var a);
  friend Var relu(Var a);
  friend Var rowSoftmax(Var a);
  friend Var addRowBroadcast(Var a, Var row);
  friend Var rowSums(Var a);
  friend Var sumAll(Var a);
  friend Var gatherRows(Var a, std::span<const std::size_t> indices);
  friend Var sliceCols(Var a, std::size_t start, std::size_t count);
  friend Var maskedBceRows(Var p, const Matrix& labels, const Matrix& mask);
  friend Var rowL2Norm(Var a);

  std::vector<Node> nodes_;
  std::vector<std::string> parameter_names_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var multiply(Var a, Var b);
Var scale(Var a, double factor);
Var addScalar(Var a, double offset);
Var abs(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var rowSoftmax(Var a);
Var addRowBroadcast(Var a, Var row);
Var rowSums(Var a);
Var sumAll(Var a);
Var gatherRows(Var a, std::span<const std::size_t> indices);
Var sliceCols(Var a, std::size_t start, std::size_t count);

/// Per-row mean binary cross-entropy over entries whose mask is 1, with the
/// probability clamp of pan::binaryCrossEntropy. Rows with an all-zero mask
/// produce exactly 0 and pass no gradient. Result is Rx1.
Var maskedBceRows(Var p, const Matrix& labels, const Matrix& mask);

/// Euclidean norm of each row (Rx1). The gradient at a zero row is taken as 0.
Var rowL2Norm(Var a);

Var meanAll(Var a);
Var rowMeans(Var a);

using LossBuilder = std::function<Var(Tape&, const std::vector<Var>& params)>;

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares reverse-mode gradients against central differences
/// (f(x+h) - f(x-h)) / 2h for every parameter entry. Relative error uses the
/// denominator max(|analytic|, |numeric|, floor).
///
/// `tamper`, when set, edits the analytic gradients before comparison; it
/// exists so negative controls can confirm that a broken gradient is caught.
GradientCheckReport finiteDiffCheck(const LossBuilder& build, const ParameterList& params,
                                    double step,
                                    const std::function<void(GradientStore&)>& tamper = {},
                                    double floor = 1e-8);

}  // namespace pan::ad
