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

#include "ercfuse/mdgat.hpp"

#include "ercfuse/errors.hpp"
#include "ercfuse/ops.hpp"

namespace ercfuse {

std::string to_string(UpdateRule rule) {
  switch (rule) {
    case UpdateRule::kSum: return "sum";
    case UpdateRule::kConcat: return "concat";
    case UpdateRule::kSumProduct: return "sum_product";
  }
  return "?";
}

UpdateRule parse_update_rule(const std::string& text) {
  if (text == "sum") return UpdateRule::kSum;
  if (text == "concat") return UpdateRule::kConcat;
  if (text == "sum_product" || text == "sumproduct" || text == "sum-product") return UpdateRule::kSumProduct;
  fail(ErrorKind::kConfig, "unknown update rule '" + text + "' (expected sum, concat or sum_product)");
}

Tensor edge_weights(const Tensor& x, const ConvGraph& graph, const GatHeadParams& head, double slope) {
  if (x.rows() != graph.num_nodes()) fail(ErrorKind::kDimension, "feature rows do not match graph size");
  if (graph.num_edges() == 0) return Tensor(0, 1);
  const Tensor pairs = concat_cols({gather_rows(x, graph.destinations()), gather_rows(x, graph.sources())});
  const Tensor scores = linear(leaky_relu(linear(pairs, head.w_edge), slope), head.attention);
  return segment_softmax(scores, graph.destinations(), graph.num_nodes());
}

Tensor message_pass(const Tensor& x, const ConvGraph& graph, const Tensor& weights, const Tensor& w_pass) {
  if (weights.rows() != graph.num_edges()) fail(ErrorKind::kContract, "edge weights do not cover every edge");
  if (graph.num_edges() == 0) return Tensor(x.rows(), w_pass.rows(), 0.0);
  const Tensor values = linear(x, w_pass);
  const Tensor messages = scale_rows(gather_rows(values, graph.sources()), weights);
  return scatter_add_rows(messages, graph.destinations(), graph.num_nodes());
}

Tensor update_state(const Tensor& messages, const Tensor& previous, UpdateRule rule, const Tensor& w_update0,
                    const Tensor& w_update1) {
  switch (rule) {
    case UpdateRule::kSum:
      return linear(messages, w_update0) + linear(previous, w_update1);
    case UpdateRule::kConcat:
      return linear(concat_cols({messages, previous}), w_update0);
    case UpdateRule::kSumProduct:
      if (messages.cols() != previous.cols()) {
        fail(ErrorKind::kConfig, "sum-product update needs message width " + std::to_string(messages.cols()) +
                                     " to equal the model width " + std::to_string(previous.cols()));
      }
      return linear(concat_cols({messages + previous, messages * previous}), w_update0);
  }
  fail(ErrorKind::kConfig, "unknown update rule");
}

Tensor gat_head(const Tensor& x, const ConvGraph& graph, const GatHeadParams& head, const MdgatOptions& options,
                AttentionTrace* trace) {
  const Tensor weights = edge_weights(x, graph, head, options.slope);
  if (trace != nullptr) trace->edge_weights.push_back(weights);
  const Tensor messages = message_pass(x, graph, weights, head.w_pass);
  return update_state(messages, x, options.rule, head.w_update0, head.w_update1);
}

Tensor mdgat_layer(const Tensor& x, const ConvGraph& graph, const MdgatLayerParams& layer, const MdgatOptions& options,
                   AttentionTrace* trace) {
  std::vector<Tensor> heads;
  heads.reserve(layer.heads.size());
  for (const auto& head : layer.heads) heads.push_back(gat_head(x, graph, head, options, trace));
  const Tensor merged = linear(concat_cols(heads), layer.w_merge);
  return layer_norm(x + merged, layer.norm_gain, layer.norm_bias, options.norm_eps);
}

Tensor mdgat_forward(const Tensor& x, const ConvGraph& graph, std::span<const MdgatLayerParams> layers,
                     const MdgatOptions& options, AttentionTrace* trace) {
  Tensor state = x;
  for (const auto& layer : layers) state = mdgat_layer(state, graph, layer, options, trace);
  return state;
}

}  // namespace ercfuse
