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

#include "ercfuse/mpcat.hpp"

#include <cmath>

#include "ercfuse/errors.hpp"

namespace ercfuse {

namespace {

Tensor maybe_dropout(const Tensor& x, const ForwardContext& ctx) {
  if (ctx.mode == Mode::kEval || ctx.dropout == 0.0) return x;
  if (ctx.rng == nullptr) fail(ErrorKind::kContract, "training-mode forward needs a random generator");
  return dropout(x, ctx.dropout, ctx.mode, *ctx.rng);
}

}  // namespace

Tensor multihead_attention(const Tensor& query, const Tensor& key, const Tensor& value, const AttentionParams& params,
                           AttentionTrace* trace) {
  if (key.rows() != value.rows()) fail(ErrorKind::kDimension, "attention keys and values differ in length");
  const std::size_t heads = params.w_query.size();
  if (heads == 0 || params.w_key.size() != heads || params.w_value.size() != heads) {
    fail(ErrorKind::kConfig, "attention needs matching, non-empty head lists");
  }
  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor q = linear(query, params.w_query[h]);
    const Tensor k = linear(key, params.w_key[h]);
    const Tensor v = linear(value, params.w_value[h]);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(k.cols()));
    const Tensor attention = softmax_rows(scale(matmul_nt(q, k), inv_sqrt_dk));
    if (trace != nullptr) trace->attention_maps.push_back(attention);
    outputs.push_back(matmul(attention, v));
  }
  return linear(concat_cols(outputs), params.w_merge);
}

Tensor pairwise_attention(std::span<const Tensor> queries, const Tensor& self, std::span<const AttentionParams> branches,
                          const ForwardContext& ctx) {
  if (queries.size() != branches.size() || queries.empty()) {
    fail(ErrorKind::kConfig, "pairwise attention needs one parameter set per querying modality");
  }
  Tensor total = multihead_attention(queries[0], self, self, branches[0], ctx.trace);
  for (std::size_t b = 1; b < branches.size(); ++b) {
    total = total + multihead_attention(queries[b], self, self, branches[b], ctx.trace);
  }
  return maybe_dropout(total, ctx);
}

Tensor feed_forward(const Tensor& x, const FeedForwardParams& params, const ForwardContext& ctx) {
  const Tensor hidden = maybe_dropout(relu(linear(x, params.w0, params.b0)), ctx);
  return maybe_dropout(linear(hidden, params.w1, params.b1), ctx);
}

Tensor mpcat_block(const Tensor& self, std::span<const Tensor> others, const MpcatBlockParams& block,
                   const ForwardContext& ctx) {
  const Tensor mixed = layer_norm(self + pairwise_attention(others, self, block.branches, ctx), block.norm1_gain,
                                  block.norm1_bias, ctx.norm_eps);
  return layer_norm(mixed + feed_forward(mixed, block.feed_forward, ctx), block.norm2_gain, block.norm2_bias,
                    ctx.norm_eps);
}

std::vector<Tensor> other_states(const ModalStates& state, std::size_t index) {
  std::vector<Tensor> others;
  for (std::size_t j = 0; j < state.size(); ++j)
    if (j != index) others.push_back(state[j]);
  return others;
}

ModalStates mpcat_layer(const ModalStates& state, const MpcatLayerParams& layer, const ForwardContext& ctx) {
  if (layer.blocks.size() != state.size()) fail(ErrorKind::kConfig, "one cross-modal block is needed per modality");
  ModalStates next;
  next.reserve(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto others = other_states(state, i);
    next.push_back(mpcat_block(state[i], others, layer.blocks[i], ctx));
  }
  return next;
}

ModalStates mpcat_forward(const ModalStates& state, std::span<const MpcatLayerParams> layers, const ForwardContext& ctx) {
  ModalStates current = state;
  for (const auto& layer : layers) current = mpcat_layer(current, layer, ctx);
  return current;
}

}  // namespace ercfuse
