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
#include <span>
#include <vector>

#include "ercfuse/tensor.hpp"

namespace ercfuse {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

/// Moment buffers for a fixed, ordered list of parameters.
struct AdamWState {
  AdamWOptions options;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step = 0;

  AdamWState() = default;
  AdamWState(std::span<const Tensor> params, AdamWOptions opts);
};

/// One decoupled-weight-decay Adam update, reading each parameter's gradient:
///   θ ← θ − lr·( m̂/(√v̂ + ε) + weight_decay·θ )
/// Parameters without a gradient buffer are treated as having zero gradient.
void adamw_step(std::span<Tensor> params, AdamWState& state);

void zero_grads(std::span<Tensor> params);
/// L2 norm over all parameter gradients.
double grad_norm(std::span<const Tensor> params);
/// Rescales gradients so their global L2 norm is at most `max_norm`.
void clip_grad_norm(std::span<Tensor> params, double max_norm);

}  // namespace ercfuse
