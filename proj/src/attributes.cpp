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

#include "pan/attributes.hpp"

#include <fstream>
#include <sstream>

#include "pan/io.hpp"
#include "pan/errors.hpp"
#include "pan/rng.hpp"

namespace pan {

CombineFn parseCombineFn(const std::string& text) {
  if (text == "and") return CombineFn::kAnd;
  if (text == "or") return CombineFn::kOr;
  if (text == "xor") return CombineFn::kXor;
  if (text == "xnor") return CombineFn::kXnor;
  if (text == "and-xor") return CombineFn::kAndConcatXor;
  throw ParseError("unknown attribute combination '" + text + "'");
}

std::string toString(CombineFn fn) {
  switch (fn) {
    case CombineFn::kAnd:
      return "and";
    case CombineFn::kOr:
      return "or";
    case CombineFn::kXor:
      return "xor";
    case CombineFn::kXnor:
      return "xnor";
    case CombineFn::kAndConcatXor:
      return "and-xor";
  }
  return "or";
}

std::size_t labelWidth(CombineFn fn, std::size_t m) {
  return fn == CombineFn::kAndConcatXor ? 2 * m : m;
}

void AttributeTable::validate() const {
  requireSameShape(values, mask, "attribute values/mask");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i] != 0.0 && mask[i] != 1.0) throw ContractError("attribute mask must be 0 or 1");
    if (values[i] != 0.0 && values[i] != 1.0) {
      throw ContractError("attribute values must be 0 or 1");
    }
  }
  if (confidence && confidence->size() != values.size()) {
    throw DimensionError("confidence table has " + std::to_string(confidence->size()) +
                         " entries, expected " + std::to_string(values.size()));
  }
}

AttributeTable AttributeTable::fullyLabeled(Matrix values) {
  AttributeTable t;
  t.mask = Matrix::filled(values.rows(), values.cols(), 1.0);
  t.values = std::move(values);
  t.validate();
  return t;
}

PairAttributeLabel combinePair(std::span<const double> a_i, std::span<const double> mask_i,
                               std::span<const double> a_j, std::span<const double> mask_j,
                               CombineFn fn) {
  const std::size_t m = a_i.size();
  if (mask_i.size() != m || a_j.size() != m || mask_j.size() != m) {
    throw DimensionError("combinePair: attribute vectors differ in length");
  }
  const std::size_t width = labelWidth(fn, m);
  PairAttributeLabel out{std::vector<double>(width, 0.0), std::vector<double>(width, 0.0)};
  for (std::size_t k = 0; k < m; ++k) {
    const bool known = mask_i[k] == 1.0 && mask_j[k] == 1.0;
    if (!known) continue;
    const bool x = a_i[k] == 1.0;
    const bool y = a_j[k] == 1.0;
    switch (fn) {
      case CombineFn::kAnd:
        out.labels[k] = x && y;
        break;
      case CombineFn::kOr:
        out.labels[k] = x || y;
        break;
      case CombineFn::kXor:
        out.labels[k] = x != y;
        break;
      case CombineFn::kXnor:
        out.labels[k] = x == y;
        break;
      case CombineFn::kAndConcatXor:
        out.labels[k] = x && y;
        out.labels[m + k] = x != y;
        out.mask[m + k] = 1.0;
        break;
    }
    out.mask[k] = 1.0;
  }
  return out;
}

PairAttributeLabel combineItems(const AttributeTable& table, std::size_t i, std::size_t j,
                                CombineFn fn) {
  if (i >= table.n() || j >= table.n()) {
    throw IndexError("attribute row out of range: (" + std::to_string(i) + ", " +
                     std::to_string(j) + ") with " + std::to_string(table.n()) + " items");
  }
  return combinePair(table.values.row(i), table.mask.row(i), table.values.row(j),
                     table.mask.row(j), fn);
}

AttributeTable thresholdByConfidence(const AttributeTable& table, int min_conf) {
  if (!table.confidence) throw ContractError("thresholdByConfidence: table has no confidence");
  AttributeTable out = table;
  const auto& conf = *table.confidence;
  for (std::size_t e = 0; e < conf.size(); ++e) {
    if (conf[e] <= min_conf) out.mask[e] = 0.0;
  }
  return out;
}

AttributeTable randomizeLabels(const AttributeTable& table, std::uint64_t seed) {
  AttributeTable out = table;
  Engine engine = makeEngine(seed, "attributes.randomize");
  for (std::size_t e = 0; e < out.values.size(); ++e) {
    if (out.mask[e] != 1.0) continue;
    out.values[e] = static_cast<double>(engine() >> 63);
  }
  return out;
}

AttributeTable readAttributeCsv(const std::string& path) {
  const CsvTable csv = readCsv(path);
  if (csv.header.empty() || csv.header[0] != "item_id") {
    throw ParseError(path + ": line 1: expected header starting with item_id");
  }
  const std::size_t m = csv.header.size() - 1;
  const std::size_t n = csv.rows.size();
  AttributeTable t;
  t.values = Matrix(n, m);
  t.mask = Matrix(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = csv.rows[r];
    const std::size_t line = r + 2;
    if (row.size() != m + 1) {
      throw ParseError(path + ": line " + std::to_string(line) + ": expected " +
                       std::to_string(m + 1) + " cells, got " + std::to_string(row.size()));
    }
    if (parseIndex(row[0], path, line) != r) {
      throw ParseError(path + ": line " + std::to_string(line) + ": item_id out of order");
    }
    for (std::size_t k = 0; k < m; ++k) {
      const std::string& cell = row[k + 1];
      if (cell == "?") continue;
      if (cell != "0" && cell != "1") {
        throw ParseError(path + ": line " + std::to_string(line) + ": bad attribute cell '" +
                         cell + "'");
      }
      t.values(r, k) = cell == "1" ? 1.0 : 0.0;
      t.mask(r, k) = 1.0;
    }
  }
  return t;
}

void readConfidenceCsv(const std::string& path, AttributeTable& table) {
  const CsvTable csv = readCsv(path);
  if (csv.rows.size() != table.n() || csv.header.size() != table.m() + 1) {
    throw ParseError(path + ": confidence table shape does not match attributes");
  }
  std::vector<int> conf(table.n() * table.m());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const std::size_t line = r + 2;
    if (csv.rows[r].size() != table.m() + 1) {
      throw ParseError(path + ": line " + std::to_string(line) + ": wrong cell count");
    }
    for (std::size_t k = 0; k < table.m(); ++k) {
      const std::size_t v = parseIndex(csv.rows[r][k + 1], path, line);
      if (v < 1 || v > 4) {
        throw ParseError(path + ": line " + std::to_string(line) + ": confidence must be 1-4");
      }
      conf[r * table.m() + k] = static_cast<int>(v);
    }
  }
  table.confidence = std::move(conf);
}

namespace {

std::string attributeHeader(std::size_t m) {
  std::string h = "item_id";
  for (std::size_t k = 0; k < m; ++k) h += ",attr_" + std::to_string(k);
  return h;
}

}  // namespace

void writeAttributeCsv(const AttributeTable& table, const std::string& path) {
  std::ostringstream out;
  out << attributeHeader(table.m()) << '\n';
  for (std::size_t i = 0; i < table.n(); ++i) {
    out << i;
    for (std::size_t k = 0; k < table.m(); ++k) {
      out << ',' << (table.labeled(i, k) ? (table.values(i, k) == 1.0 ? "1" : "0") : "?");
    }
    out << '\n';
  }
  writeTextFile(path, out.str());
}

void writeConfidenceCsv(const AttributeTable& table, const std::string& path) {
  if (!table.confidence) throw ContractError("writeConfidenceCsv: table has no confidence");
  std::ostringstream out;
  out << attributeHeader(table.m()) << '\n';
  for (std::size_t i = 0; i < table.n(); ++i) {
    out << i;
    for (std::size_t k = 0; k < table.m(); ++k) out << ',' << (*table.confidence)[i * table.m() + k];
    out << '\n';
  }
  writeTextFile(path, out.str());
}

}  // namespace pan
