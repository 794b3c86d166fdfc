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
#include <string>
#include <vector>

namespace pan {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Plain comma-separated text: no quoting, surrounding spaces trimmed, blank
/// lines skipped. The first line is the header.
CsvTable readCsv(const std::string& path);

std::size_t parseIndex(const std::string& cell, const std::string& path, std::size_t line);
double parseReal(const std::string& cell, const std::string& path, std::size_t line);

std::string readTextFile(const std::string& path);
void writeTextFile(const std::string& path, const std::string& content);

/// Shortest decimal text that parses back to the same double.
std::string formatReal(double value);

/// Exact hexadecimal float text (printf %a) and its inverse.
std::string toHexFloat(double value);
double fromHexFloat(const std::string& text);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256Hex(const std::string& bytes);

}  // namespace pan
