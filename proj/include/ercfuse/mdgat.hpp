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
#include <string>
#include <vector>

#include "ercfuse/graph.hpp"
#include "ercfuse/tensor.hpp"
#include "ercfuse/trace.hpp"

namespace ercfuse {

enum class UpdateRule { kSum, kConcat, kSumProduct };

std::string to_string(UpdateRule rule);
UpdateRule parse_update_rule(const std::string& text);

/// One graph-attention head.
struct GatHeadParams {
  Tensor w_edge;     // S × 2D, applied to [x_dst ∥ x_src]
  Tensor attention;  // 1 × S
  Tensor w_pass;     // M × D
  /// Sum: out × M; Concat: out × (M + D); SumProduct: out × 2D.
  Tensor w_update0;
  /// Sum only: out × D.
  Tensor w_update1;
};

struct MdgatLayerParams {
  std::vector<GatHeadParams> heads;
  Tensor w_merge;  // D × (heads · out)
  Tensor norm_gain;
  Tensor norm_bias;
};

struct MdgatOptions {
  UpdateRule rule = UpdateRule::kSumProduct;
  double slope = 0.2;
  double norm_eps = 1e-5;
};

/// Attention weight of every edge of `graph` (E×1, same order as
/// graph.edges()); weights entering each node sum to one.
Tensor edge_weights(const Tensor& x, const ConvGraph& graph, const GatHeadParams& head, double slope);

/// x_ps[i] = Σ_{j→i} μ_ji · W_ps·x_j; nodes without incoming edges get zeros.
Tensor message_pass(const Tensor& x, const ConvGraph& graph, const Tensor& weights, const Tensor& w_pass);

Tensor update_state(const Tensor& messages, const Tensor& previous, UpdateRule rule, const Tensor& w_update0,
                    const Tensor& w_update1);

Tensor gat_head(const Tensor& x, const ConvGraph& graph, const GatHeadParams& head, const MdgatOptions& options,
                AttentionTrace* trace = nullptr);

/// X' = LayerNorm(X + W_mg·[head_0 ∥ … ∥ head_h]).
Tensor mdgat_layer(const Tensor& x, const ConvGraph& graph, const MdgatLayerParams& layer, const MdgatOptions& options,
                   AttentionTrace* trace = nullptr);

/// Applies the layers in order; with no layers the input is returned as is.
Tensor mdgat_forward(const Tensor& x, const ConvGraph& graph, std::span<const MdgatLayerParams> layers,
                     const MdgatOptions& options, AttentionTrace* trace = nullptr);

}  // namespace ercfuse
