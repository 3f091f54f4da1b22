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

#include <vector>

#include "ercfuse/tensor.hpp"

namespace ercfuse {

/// Optional sink for attention weights produced during a forward pass; used
/// by tests and diagnostics to check normalisation.
struct AttentionTrace {
  std::vector<Tensor> edge_weights;    // one E×1 column per graph-attention head call
  std::vector<Tensor> attention_maps;  // one row-stochastic matrix per attention head call
};

}  // namespace ercfuse
