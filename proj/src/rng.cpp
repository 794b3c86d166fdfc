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

#include "pan/rng.hpp"

#include <cmath>

#include "pan/errors.hpp"

namespace pan {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t deriveSeed(std::uint64_t root, std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(splitmix64(root) ^ h);
}

Engine makeEngine(std::uint64_t root, std::string_view label) {
  return Engine(deriveSeed(root, label));
}

// The helpers below avoid the std:: distributions, whose algorithms are
// implementation-defined; outputs stay identical across standard libraries.

std::size_t uniformIndex(Engine& engine, std::size_t n) {
  if (n == 0) throw ContractError("uniformIndex: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x;
  do {
    x = engine();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double uniformUnit(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

double standardNormal(Engine& engine) {
  // Box-Muller, one value per call.
  double u1 = uniformUnit(engine);
  while (u1 == 0.0) u1 = uniformUnit(engine);
  const double u2 = uniformUnit(engine);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace pan
