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

#include "pan/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "pan/errors.hpp"

namespace pan {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw DimensionError("matrix " + shapeString() + " given " +
                         std::to_string(values_.size()) + " values");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw NumericError("non-finite matrix entry at flat index " + std::to_string(i));
    }
  }
}

Matrix Matrix::fromRows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged row list");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(values));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::filled(std::size_t rows, std::size_t cols, double value) {
  return Matrix(rows, cols, std::vector<double>(rows * cols, value));
}

Matrix Matrix::rowVector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::columnVector(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shapeString() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::allFinite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void requireSameShape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.sameShape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shapeString() + " vs " +
                         b.shapeString());
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shape mismatch " + a.shapeString() + " x " + b.shapeString());
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  // i-k-j order; each output row accumulates in k order, so a row computed
  // alone equals the same row computed inside a larger batch.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* orow = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

namespace {

template <typename F>
Matrix zipWith(const Matrix& a, const Matrix& b, const char* what, F f) {
  requireSameShape(a, b, what);
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <typename F>
Matrix mapEach(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  return zipWith(a, b, "add", [](double x, double y) { return x + y; });
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  return zipWith(a, b, "subtract", [](double x, double y) { return x - y; });
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  return zipWith(a, b, "multiply", [](double x, double y) { return x * y; });
}

Matrix scale(const Matrix& a, double factor) {
  return mapEach(a, [factor](double x) { return x * factor; });
}

Matrix absolute(const Matrix& a) {
  return mapEach(a, [](double x) { return std::fabs(x); });
}

Matrix relu(const Matrix& a) {
  return mapEach(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

Matrix sigmoid(const Matrix& a) {
  return mapEach(a, [](double x) { return sigmoid(x); });
}

Matrix rowSoftmax(const Matrix& a) {
  if (a.cols() == 0) throw DimensionError("rowSoftmax: matrix has no columns");
  Matrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto in = a.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

Matrix addRowBroadcast(const Matrix& a, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("addRowBroadcast: shape mismatch " + a.shapeString() + " + " +
                         row.shapeString());
  }
  Matrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) + row[c];
  return out;
}

Matrix rowSums(const Matrix& a) {
  Matrix out(a.rows(), 1);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (double v : a.row(r)) s += v;
    out[r] = s;
  }
  return out;
}

Matrix gatherRows(const Matrix& a, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), a.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= a.rows()) {
      throw IndexError("row index " + std::to_string(indices[r]) + " out of range for " +
                       a.shapeString());
    }
    std::copy_n(a.row(indices[r]).data(), a.cols(), out.row(r).data());
  }
  return out;
}

Matrix sliceCols(const Matrix& a, std::size_t start, std::size_t count) {
  if (start + count > a.cols()) {
    throw DimensionError("sliceCols: columns [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside " + a.shapeString());
  }
  Matrix out(a.rows(), count);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = a(r, start + c);
  return out;
}

double binaryCrossEntropy(double p, double y) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

double maskedBceMean(std::span<const double> p, std::span<const double> y,
                     std::span<const double> mask) {
  if (p.size() != y.size() || p.size() != mask.size()) {
    throw DimensionError("maskedBceMean: lengths " + std::to_string(p.size()) + ", " +
                         std::to_string(y.size()) + ", " + std::to_string(mask.size()));
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (mask[k] == 0.0) continue;
    if (mask[k] != 1.0) throw ContractError("maskedBceMean: mask entries must be 0 or 1");
    total += binaryCrossEntropy(p[k], y[k]);
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace pan
