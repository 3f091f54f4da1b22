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

#include "ercfuse/encoder.hpp"

#include "ercfuse/errors.hpp"
#include "ercfuse/ops.hpp"

namespace ercfuse {

Tensor preencode_av(const Tensor& features, const AffineParams& params) {
  if (features.cols() != params.weight.cols()) {
    fail(ErrorKind::kDimension, "pre-encoder expects " + std::to_string(params.weight.cols()) +
                                    " input features, got " + features.shape_string());
  }
  return linear(features, params.weight, params.bias);
}

Tensor gru_sequence(const Tensor& inputs, const GruCellParams& cell, bool reverse) {
  const Index m = inputs.rows();
  const Index h = cell.hidden_size();
  if (m < 1) fail(ErrorKind::kContract, "recurrent encoder needs at least one step");
  if (inputs.cols() != cell.w_input.cols()) fail(ErrorKind::kDimension, "recurrent encoder input width mismatch");

  const Tensor projected = linear(inputs, cell.w_input, cell.b_input);  // m × 3H
  Tensor state(1, h, 0.0);
  std::vector<Tensor> outputs(static_cast<std::size_t>(m));
  for (Index step = 0; step < m; ++step) {
    const Index t = reverse ? m - 1 - step : step;
    const Tensor gi = slice_rows(projected, t, 1);
    const Tensor gh = linear(state, cell.w_hidden, cell.b_hidden);
    const Tensor reset = sigmoid(slice_cols(gi, 0, h) + slice_cols(gh, 0, h));
    const Tensor update = sigmoid(slice_cols(gi, h, h) + slice_cols(gh, h, h));
    const Tensor candidate = tanh(slice_cols(gi, 2 * h, h) + reset * slice_cols(gh, 2 * h, h));
    state = one_minus(update) * candidate + update * state;
    outputs[static_cast<std::size_t>(t)] = state;
  }
  return concat_rows(outputs);
}

Tensor preencode_text(const Tensor& features, const TextEncoderParams& params) {
  const Tensor fwd = gru_sequence(features, params.forward, false);
  const Tensor bwd = gru_sequence(features, params.backward, true);
  return linear(concat_cols({fwd, bwd}), params.projection.weight, params.projection.bias);
}

std::vector<Tensor> inject_speaker(std::span<const Tensor> encoded, std::span<const int> speakers,
                                   const SpeakerTable& table) {
  const Index n = table.embedding.rows();
  std::vector<Index> rows;
  rows.reserve(speakers.size());
  for (int s : speakers) {
    if (s < 0 || s >= n) fail(ErrorKind::kValidation, "unknown speaker id " + std::to_string(s));
    rows.push_back(s);
  }
  const Tensor spk = scale(gather_rows(table.embedding, rows), table.lambda);
  std::vector<Tensor> out;
  out.reserve(encoded.size());
  for (const auto& o : encoded) {
    if (o.rows() != static_cast<Index>(speakers.size()) || o.cols() != spk.cols()) {
      fail(ErrorKind::kDimension, "speaker injection shape mismatch: " + o.shape_string() + " vs " + spk.shape_string());
    }
    out.push_back(o + spk);
  }
  return out;
}

}  // namespace ercfuse
