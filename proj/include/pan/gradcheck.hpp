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
#include <string>

#include "pan/autodiff.hpp"

namespace pan {

struct GradcheckOptions {
  std::size_t d = 6;
  std::size_t m = 4;
  std::size_t n_items = 8;
  std::size_t pairs = 6;
  std::size_t seeds = 100;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative-error floor. Bias gradients that cancel in |h_i - h_j| leave
  // ~1e-11 of rounding in the central difference.
  double floor = 1e-6;
  // Negative control: flips the sign of one analytic gradient entry.
  bool inject_sign_error = false;
};

struct GradcheckCase {
  std::size_t index = 0;
  std::string composition;
  ad::GradientCheckReport report;
};

struct GradcheckSummary {
  std::vector<GradcheckCase> cases;
  double worst_relative_error = 0.0;
  // "<case>/<parameter>[<entry>]" of the worst entry.
  std::string worst_path;
  double tolerance = 1e-4;
  bool passed() const;
};

/// Runs one finite-difference check per seed. Cases cycle through identity,
/// MLP and 2-layer GCN encoders under a CSM with random supervision layout,
/// relevance on/off and lambda, using the full training objective.
GradcheckSummary runGradcheck(const GradcheckOptions& options);

}  // namespace pan
