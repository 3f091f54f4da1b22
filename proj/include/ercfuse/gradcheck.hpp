/*
 * Copyright (c) 2026 The ercfuse Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
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
#include <vector>

#include "ercfuse/mdgat.hpp"

namespace ercfuse {

struct GradcheckOptions {
  std::uint64_t seed = 7;
  int utterances = 4;
  int speakers = 2;
  int classes = 3;
  int dim = 8;
  int heads = 2;
  int mdgat_layers = 2;
  int mpcat_layers = 2;
  int window_past = 1;
  int window_future = 1;
  UpdateRule rule = UpdateRule::kSumProduct;
  double step = 1e-6;
  double tolerance = 1e-3;
  /// Test hook: adds 1 to the analytic gradient of this parameter's first entry.
  std::string corrupt_parameter;
};

struct ParameterCheck {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradcheckReport {
  std::vector<ParameterCheck> parameters;
  double tolerance = 1e-3;
  double seconds = 0.0;

  bool passed() const;
  double worst() const;
  /// Worst error per top-level module: encoder, speaker, mdgat, mpcat, head.
  std::vector<std::pair<std::string, double>> per_module() const;
  std::vector<std::string> failures() const;
  std::string to_json() const;
};

/// |a - n| / max(|a|, |n|, 1e-6).
double relative_error(double analytic, double numeric);

/// Builds a small model and conversation, then compares every parameter
/// coordinate's backprop gradient of the mean cross-entropy with a central
/// difference, in eval mode.
GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

}  // namespace ercfuse
