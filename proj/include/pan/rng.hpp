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
#include <random>
#include <string_view>

namespace pan {

using Engine = std::mt19937_64;

/// Derives an independent 64-bit seed for a named subsystem from a root seed.
/// The label is hashed (FNV-1a) and mixed with the root through splitmix64, so
/// adding a new label never shifts the streams of existing ones.
std::uint64_t deriveSeed(std::uint64_t root, std::string_view label);

/// Engine seeded from deriveSeed(root, label).
Engine makeEngine(std::uint64_t root, std::string_view label);

/// Uniform integer in [0, n). n must be positive.
std::size_t uniformIndex(Engine& engine, std::size_t n);

/// Uniform real in [0, 1).
double uniformUnit(Engine& engine);

/// Standard normal draw.
double standardNormal(Engine& engine);

}  // namespace pan
