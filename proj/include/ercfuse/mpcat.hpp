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

#include <span>
#include <vector>

#include "ercfuse/ops.hpp"
#include "ercfuse/tensor.hpp"
#include "ercfuse/trace.hpp"

namespace ercfuse {

/// Per-head query/key/value projections (d_k × D each) and the head merge.
struct AttentionParams {
  std::vector<Tensor> w_query;
  std::vector<Tensor> w_key;
  std::vector<Tensor> w_value;
  Tensor w_merge;  // D × (heads · d_k)
};

struct FeedForwardParams {
  Tensor w0;  // F × D
  Tensor b0;  // 1 × F
  Tensor w1;  // D × F
  Tensor b1;  // 1 × D
};

/// Cross-modal block updating one modality. `branches[b]` attends from the
/// b-th other modality (queries) onto this one (keys and values).
struct MpcatBlockParams {
  std::vector<AttentionParams> branches;
  Tensor norm1_gain, norm1_bias;
  Tensor norm2_gain, norm2_bias;
  FeedForwardParams feed_forward;
};

/// One layer: a block per active modality, in modality order.
struct MpcatLayerParams {
  std::vector<MpcatBlockParams> blocks;
};

/// Per-modality m × D states, in active-modality order.
using ModalStates = std::vector<Tensor>;

struct ForwardContext {
  Mode mode = Mode::kEval;
  double dropout = 0.0;
  Rng* rng = nullptr;
  double norm_eps = 1e-5;
  AttentionTrace* trace = nullptr;
};

/// Att(Q,K,V) = softmax(Q·Kᵀ/√d_k)·V per head, merged by W_ma.
Tensor multihead_attention(const Tensor& query, const Tensor& key, const Tensor& value, const AttentionParams& params,
                           AttentionTrace* trace = nullptr);

/// Dropout(Σ_b MA(queries[b], self, self)).
Tensor pairwise_attention(std::span<const Tensor> queries, const Tensor& self, std::span<const AttentionParams> branches,
                          const ForwardContext& ctx);

/// Dropout(W1·Dropout(ReLU(W0·x + b0)) + b1).
Tensor feed_forward(const Tensor& x, const FeedForwardParams& params, const ForwardContext& ctx);

/// Updates `self` from the other modalities' states.
Tensor mpcat_block(const Tensor& self, std::span<const Tensor> others, const MpcatBlockParams& block,
                   const ForwardContext& ctx);

/// Every block reads the same input states; the result is the next layer's state.
ModalStates mpcat_layer(const ModalStates& state, const MpcatLayerParams& layer, const ForwardContext& ctx);

ModalStates mpcat_forward(const ModalStates& state, std::span<const MpcatLayerParams> layers, const ForwardContext& ctx);

/// The other states for block `index`, in modality order.
std::vector<Tensor> other_states(const ModalStates& state, std::size_t index);

}  // namespace ercfuse
