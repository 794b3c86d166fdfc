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

#include "pan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pan/errors.hpp"

namespace pan::ad {

const Matrix& Var::value() const { return tape_->value(*this); }

const Matrix& findParameter(const ParameterList& params, const std::string& name) {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw ContractError("unknown parameter '" + name + "'");
}

Matrix& findParameter(ParameterList& params, const std::string& name) {
  for (auto& p : params)
    if (p.name == name) return p.value;
  throw ContractError("unknown parameter '" + name + "'");
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(const std::string& name, Matrix value) {
  if (std::find(parameter_names_.begin(), parameter_names_.end(), name) !=
      parameter_names_.end()) {
    throw ContractError("parameter '" + name + "' registered twice");
  }
  parameter_names_.push_back(name);
  Node n;
  n.op = Op::kParameter;
  n.value = std::move(value);
  n.requires_grad = true;
  n.name = name;
  return push(std::move(n));
}

std::vector<Var> Tape::parameters(const ParameterList& params) {
  std::vector<Var> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(parameter(p.name, p.value));
  return out;
}

double Tape::minKinkDistance() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& n : nodes_) {
    if (n.op != Op::kAbs && n.op != Op::kRelu) continue;
    // Only kinks on a gradient path can corrupt a finite-difference probe.
    if (!n.requires_grad) continue;
    for (double v : nodes_[n.a].value.values()) best = std::min(best, std::fabs(v));
  }
  return best;
}

namespace {

Tape& sameTape(Var a, Var b, const char* what) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ContractError(std::string(what) + ": operands belong to different tapes");
  }
  return a.tape();
}

}  // namespace

// The op constructors below share one pattern: compute the forward value with
// the pan:: matrix kernels, then record operands and any data backward needs.

#define PAN_UNARY_NODE(OPKIND, VALUE)                              \
  Tape& t = a.tape();                                              \
  Tape::Node n;                                                    \
  n.op = OPKIND;                                                   \
  n.a = a.index();                                                 \
  n.value = VALUE;                                                 \
  n.requires_grad = t.nodes_[a.index()].requires_grad;

#define PAN_BINARY_NODE(OPKIND, VALUE, NAME)                       \
  Tape& t = sameTape(a, b, NAME);                                  \
  Tape::Node n;                                                    \
  n.op = OPKIND;                                                   \
  n.a = a.index();                                                 \
  n.b = b.index();                                                 \
  n.value = VALUE;                                                 \
  n.requires_grad =                                                \
      t.nodes_[a.index()].requires_grad || t.nodes_[b.index()].requires_grad;

Var matmul(Var a, Var b) {
  PAN_BINARY_NODE(Op::kMatmul, pan::matmul(a.value(), b.value()), "matmul")
  return t.push(std::move(n));
}

Var add(Var a, Var b) {
  PAN_BINARY_NODE(Op::kAdd, pan::add(a.value(), b.value()), "add")
  return t.push(std::move(n));
}

Var subtract(Var a, Var b) {
  PAN_BINARY_NODE(Op::kSubtract, pan::subtract(a.value(), b.value()), "subtract")
  return t.push(std::move(n));
}

Var multiply(Var a, Var b) {
  PAN_BINARY_NODE(Op::kMultiply, pan::hadamard(a.value(), b.value()), "multiply")
  return t.push(std::move(n));
}

Var addRowBroadcast(Var a, Var row) {
  Var b = row;
  PAN_BINARY_NODE(Op::kAddRowBroadcast, pan::addRowBroadcast(a.value(), b.value()),
                  "addRowBroadcast")
  return t.push(std::move(n));
}

Var scale(Var a, double factor) {
  PAN_UNARY_NODE(Op::kScale, pan::scale(a.value(), factor))
  n.scalar = factor;
  return t.push(std::move(n));
}

Var addScalar(Var a, double offset) {
  Matrix v = a.value();
  for (double& x : v.data()) x += offset;
  PAN_UNARY_NODE(Op::kAddScalar, std::move(v))
  n.scalar = offset;
  return t.push(std::move(n));
}

Var abs(Var a) {
  PAN_UNARY_NODE(Op::kAbs, pan::absolute(a.value()))
  return t.push(std::move(n));
}

Var sigmoid(Var a) {
  PAN_UNARY_NODE(Op::kSigmoid, pan::sigmoid(a.value()))
  return t.push(std::move(n));
}

Var relu(Var a) {
  PAN_UNARY_NODE(Op::kRelu, pan::relu(a.value()))
  return t.push(std::move(n));
}

Var rowSoftmax(Var a) {
  PAN_UNARY_NODE(Op::kRowSoftmax, pan::rowSoftmax(a.value()))
  return t.push(std::move(n));
}

Var rowSums(Var a) {
  PAN_UNARY_NODE(Op::kRowSums, pan::rowSums(a.value()))
  return t.push(std::move(n));
}

Var sumAll(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  PAN_UNARY_NODE(Op::kSumAll, Matrix(1, 1, {s}))
  return t.push(std::move(n));
}

Var gatherRows(Var a, std::span<const std::size_t> indices) {
  PAN_UNARY_NODE(Op::kGatherRows, pan::gatherRows(a.value(), indices))
  n.indices.assign(indices.begin(), indices.end());
  return t.push(std::move(n));
}

Var sliceCols(Var a, std::size_t start, std::size_t count) {
  PAN_UNARY_NODE(Op::kSliceCols, pan::sliceCols(a.value(), start, count))
  n.indices = {start};
  return t.push(std::move(n));
}

Var maskedBceRows(Var p, const Matrix& labels, const Matrix& mask) {
  const Matrix& pv = p.value();
  requireSameShape(pv, labels, "maskedBceRows labels");
  requireSameShape(pv, mask, "maskedBceRows mask");
  Matrix out(pv.rows(), 1);
  for (std::size_t r = 0; r < pv.rows(); ++r) {
    out[r] = maskedBceMean(pv.row(r), labels.row(r), mask.row(r));
  }
  Var a = p;
  PAN_UNARY_NODE(Op::kMaskedBceRows, std::move(out))
  n.aux_labels = labels;
  n.aux_mask = mask;
  return t.push(std::move(n));
}

Var rowL2Norm(Var a) {
  const Matrix& v = a.value();
  Matrix out(v.rows(), 1);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double s = 0.0;
    for (double x : v.row(r)) s += x * x;
    out[r] = std::sqrt(s);
  }
  PAN_UNARY_NODE(Op::kRowL2Norm, std::move(out))
  return t.push(std::move(n));
}

#undef PAN_UNARY_NODE
#undef PAN_BINARY_NODE

Var meanAll(Var a) {
  const double count = static_cast<double>(a.value().size());
  if (count == 0) throw DimensionError("meanAll: empty matrix");
  return scale(sumAll(a), 1.0 / count);
}

Var rowMeans(Var a) {
  if (a.value().cols() == 0) throw DimensionError("rowMeans: matrix has no columns");
  return scale(rowSums(a), 1.0 / static_cast<double>(a.value().cols()));
}

namespace {

void accumulate(Matrix& slot, const Matrix& delta) {
  if (slot.empty() && !delta.empty()) {
    slot = delta;
    return;
  }
  for (std::size_t i = 0; i < delta.size(); ++i) slot[i] += delta[i];
}

}  // namespace

GradientStore Tape::backward(Var output) const {
  if (!output.valid() || &output.tape() != this) {
    throw ContractError("backward: output is not on this tape");
  }
  const Node& out = nodes_[output.index()];
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    throw ContractError("backward: output must be scalar, got " + out.value.shapeString());
  }

  std::vector<Matrix> adj(nodes_.size());
  adj[output.index()] = Matrix(1, 1, {1.0});

  auto want = [&](std::size_t i) { return i != kNone && nodes_[i].requires_grad; };

  for (std::size_t idx = output.index() + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (!n.requires_grad || adj[idx].empty()) continue;
    const Matrix& g = adj[idx];
    switch (n.op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kMatmul: {
        if (want(n.a)) accumulate(adj[n.a], pan::matmul(g, transpose(nodes_[n.b].value)));
        if (want(n.b)) accumulate(adj[n.b], pan::matmul(transpose(nodes_[n.a].value), g));
        break;
      }
      case Op::kAdd:
        if (want(n.a)) accumulate(adj[n.a], g);
        if (want(n.b)) accumulate(adj[n.b], g);
        break;
      case Op::kSubtract:
        if (want(n.a)) accumulate(adj[n.a], g);
        if (want(n.b)) accumulate(adj[n.b], pan::scale(g, -1.0));
        break;
      case Op::kMultiply:
        if (want(n.a)) accumulate(adj[n.a], hadamard(g, nodes_[n.b].value));
        if (want(n.b)) accumulate(adj[n.b], hadamard(g, nodes_[n.a].value));
        break;
      case Op::kScale:
        accumulate(adj[n.a], pan::scale(g, n.scalar));
        break;
      case Op::kAddScalar:
        accumulate(adj[n.a], g);
        break;
      case Op::kAbs: {
        const Matrix& x = nodes_[n.a].value;
        Matrix d(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i)
          d[i] = x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
        accumulate(adj[n.a], d);
        break;
      }
      case Op::kSigmoid: {
        Matrix d(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = n.value[i];
          d[i] = g[i] * s * (1.0 - s);
        }
        accumulate(adj[n.a], d);
        break;
      }
      case Op::kRelu: {
        const Matrix& x = nodes_[n.a].value;
        Matrix d(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) d[i] = x[i] > 0.0 ? g[i] : 0.0;
        accumulate(adj[n.a], d);
        break;
      }
      case Op::kRowSoftmax: {
        Matrix d(g.rows(), g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r) {
          const auto s = n.value.row(r);
          const auto gr = g.row(r);
          double dot = 0.0;
          for (std::size_t c = 0; c < s.size(); ++c) dot += gr[c] * s[c];
          for (std::size_t c = 0; c < s.size(); ++c) d(r, c) = s[c] * (gr[c] - dot);
        }
        accumulate(adj[n.a], d);
        break;
      }
      case Op::kAddRowBroadcast: {
        if (want(n.a)) accumulate(adj[n.a], g);
        if (want(n.b)) {
          Matrix d(1, g.cols());
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) d[c] += g(r, c);
          accumulate(adj[n.b], d);
        }
        break;
      }
      case Op::kRowSums: {
        const Matrix& x = nodes_[n.a].value;
        Matrix d(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t c = 0; c < x.cols(); ++c) d(r, c) = g[r];
        accumulate(adj[n.a], d);
        break;
      }
      case Op::kSumAll: {
        const Matrix& x = nodes_[n.a].value;
        accumulate(adj[n.a], Matrix::filled(x.rows(), x.cols(), g[0]));
        break;
      }
      case Op::kGatherRows: {
        const Matrix& x = nodes_[n.a].value;
        Matrix d(x.rows(), x.cols());
        for (std::size_t r = 0; r < n.indices.size(); ++r) {
          auto dst = d.row(n.indices[r]);
          const auto src = g.row(r);
          for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        }
        accumulate(adj[n.a], d);
        break;
      }
      case Op::kSliceCols: {
        const Matrix& x = nodes_[n.a].value;
        const std::size_t start = n.indices[0];
        Matrix d(x.rows(), x.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) d(r, start + c) = g(r, c);
        accumulate(adj[n.a], d);
        break;
      }
      case Op::kMaskedBceRows: {
        const Matrix& p = nodes_[n.a].value;
        Matrix d(p.rows(), p.cols());
        for (std::size_t r = 0; r < p.rows(); ++r) {
          std::size_t count = 0;
          for (double m : n.aux_mask.row(r)) count += (m == 1.0);
          if (count == 0) continue;
          const double w = g[r] / static_cast<double>(count);
          for (std::size_t c = 0; c < p.cols(); ++c) {
            if (n.aux_mask(r, c) != 1.0) continue;
            const double q = p(r, c);
            // Outside the clamp the loss is constant in p.
            if (q <= kProbabilityClamp || q >= 1.0 - kProbabilityClamp) continue;
            const double y = n.aux_labels(r, c);
            d(r, c) = w * (q - y) / (q * (1.0 - q));
          }
        }
        accumulate(adj[n.a], d);
        break;
      }
      case Op::kRowL2Norm: {
        const Matrix& x = nodes_[n.a].value;
        Matrix d(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const double norm = n.value[r];
          if (norm == 0.0) continue;
          for (std::size_t c = 0; c < x.cols(); ++c) d(r, c) = g[r] * x(r, c) / norm;
        }
        accumulate(adj[n.a], d);
        break;
      }
    }
  }

  GradientStore grads;
  for (std::size_t idx = 0; idx < nodes_.size(); ++idx) {
    const Node& n = nodes_[idx];
    if (n.op != Op::kParameter) continue;
    grads[n.name] = adj[idx].empty() ? Matrix(n.value.rows(), n.value.cols()) : adj[idx];
  }
  return grads;
}

GradientCheckReport finiteDiffCheck(const LossBuilder& build, const ParameterList& params,
                                    double step,
                                    const std::function<void(GradientStore&)>& tamper,
                                    double floor) {
  if (!(step > 0.0)) throw ContractError("finiteDiffCheck: step must be positive");

  GradientStore analytic;
  {
    Tape tape;
    const auto vars = tape.parameters(params);
    const Var loss = build(tape, vars);
    analytic = tape.backward(loss);
  }
  if (tamper) tamper(analytic);

  auto evaluate = [&](const ParameterList& probe, const std::string& name, std::size_t entry) {
    double v = 0.0;
    try {
      Tape tape;
      const auto vars = tape.parameters(probe);
      v = build(tape, vars).value()[0];
    } catch (const NumericError& e) {
      throw NumericError("non-finite value while probing " + name + "[" + std::to_string(entry) +
                         "]: " + e.what());
    }
    if (!std::isfinite(v)) {
      throw NumericError("non-finite loss while probing " + name + "[" + std::to_string(entry) +
                         "]");
    }
    return v;
  };

  GradientCheckReport report;
  ParameterList probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::string& name = params[p].name;
    const Matrix& grad = analytic.at(name);
    for (std::size_t e = 0; e < params[p].value.size(); ++e) {
      const double original = params[p].value[e];
      probe[p].value[e] = original + step;
      const double up = evaluate(probe, name, e);
      probe[p].value[e] = original - step;
      const double down = evaluate(probe, name, e);
      probe[p].value[e] = original;

      const double numeric = (up - down) / (2.0 * step);
      const double a = grad[e];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), floor});
      const double rel = std::fabs(a - numeric) / denom;
      ++report.entries_checked;
      if (rel > report.max_relative_error || report.worst_parameter.empty()) {
        if (rel >= report.max_relative_error) {
          report.max_relative_error = rel;
          report.worst_parameter = name;
          report.worst_index = e;
          report.analytic = a;
          report.numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace pan::ad
