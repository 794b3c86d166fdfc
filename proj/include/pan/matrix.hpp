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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pan {

/// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 matrices.
///
/// Constructing from explicit values rejects NaN/Inf; arithmetic helpers
/// below never produce non-finite values from finite inputs except through
/// overflow, which callers check where it matters.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix fromRows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  static Matrix filled(std::size_t rows, std::size_t cols, double value);
  static Matrix rowVector(std::span<const double> values);
  static Matrix columnVector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> data() const { return values_; }
  std::span<double> data() { return values_; }
  const std::vector<double>& values() const { return values_; }

  std::string shapeString() const;
  bool sameShape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool allFinite() const;

  // Exact (bitwise-value) equality; -0.0 == 0.0 as usual for doubles.
  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Throws DimensionError naming `what` and both shapes when shapes differ.
void requireSameShape(const Matrix& a, const Matrix& b, const char* what);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);
Matrix absolute(const Matrix& a);
Matrix relu(const Matrix& a);

// Overflow-free logistic: evaluates exp() only on non-positive arguments.
double sigmoid(double x);
Matrix sigmoid(const Matrix& a);

// Softmax of each row after subtracting the row maximum.
Matrix rowSoftmax(const Matrix& a);

// Adds a 1xC row vector to every row of an RxC matrix.
Matrix addRowBroadcast(const Matrix& a, const Matrix& row);
Matrix rowSums(const Matrix& a);
Matrix gatherRows(const Matrix& a, std::span<const std::size_t> indices);
Matrix sliceCols(const Matrix& a, std::size_t start, std::size_t count);

// Clamp applied to probabilities before taking logarithms in cross-entropy.
inline constexpr double kProbabilityClamp = 1e-12;

// -[y ln p + (1-y) ln(1-p)] with p clamped to [eps, 1-eps].
double binaryCrossEntropy(double p, double y);

// Mean of binaryCrossEntropy over entries with mask == 1; exactly 0 when the
// mask is all zero. Entries at masked-out positions are never read.
double maskedBceMean(std::span<const double> p, std::span<const double> y,
                     std::span<const double> mask);

}  // namespace pan
