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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pan/matrix.hpp"

namespace pan {

enum class CombineFn { kAnd, kOr, kXor, kXnor, kAndConcatXor };

/// Accepts and, or, xor, xnor, and-xor.
CombineFn parseCombineFn(const std::string& text);
std::string toString(CombineFn fn);

/// Length of the pair label vector for m attributes (2m for AND_CONCAT_XOR).
std::size_t labelWidth(CombineFn fn, std::size_t m);

/// N x M binary attributes with a presence mask. Unlabeled entries hold value 0.
struct AttributeTable {
  Matrix values;
  Matrix mask;
  // Row-major N*M integers on the 1..4 scale, when available.
  std::optional<std::vector<int>> confidence;

  std::size_t n() const { return values.rows(); }
  std::size_t m() const { return values.cols(); }
  bool labeled(std::size_t i, std::size_t k) const { return mask(i, k) == 1.0; }
  void validate() const;

  static AttributeTable fullyLabeled(Matrix values);
};

struct PairAttributeLabel {
  std::vector<double> labels;
  std::vector<double> mask;
};

PairAttributeLabel combinePair(std::span<const double> a_i, std::span<const double> mask_i,
                               std::span<const double> a_j, std::span<const double> mask_j,
                               CombineFn fn);

PairAttributeLabel combineItems(const AttributeTable& table, std::size_t i, std::size_t j,
                                CombineFn fn);

/// Unlabels every entry whose confidence is <= min_conf.
AttributeTable thresholdByConfidence(const AttributeTable& table, int min_conf);

/// Replaces labeled values with fair coin flips; the mask is untouched.
AttributeTable randomizeLabels(const AttributeTable& table, std::uint64_t seed);

/// CSV with header item_id,attr_0..; cells 0, 1 or ? (unlabeled).
AttributeTable readAttributeCsv(const std::string& path);
void readConfidenceCsv(const std::string& path, AttributeTable& table);
void writeAttributeCsv(const AttributeTable& table, const std::string& path);
void writeConfidenceCsv(const AttributeTable& table, const std::string& path);

}  // namespace pan
