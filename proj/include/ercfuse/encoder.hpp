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

#include "ercfuse/tensor.hpp"

namespace ercfuse {

/// y = x·Wᵀ + b with W stored (out × in) and b as a 1×out row.
struct AffineParams {
  Tensor weight;
  Tensor bias;
};

/// Gated recurrent cell; gate blocks are stacked [reset; update; candidate].
struct GruCellParams {
  Tensor w_input;   // 3H × in
  Tensor w_hidden;  // 3H × H
  Tensor b_input;   // 1 × 3H
  Tensor b_hidden;  // 1 × 3H

  Index hidden_size() const { return w_hidden.cols(); }
};

struct TextEncoderParams {
  GruCellParams forward;
  GruCellParams backward;
  AffineParams projection;  // D × 2H
};

struct SpeakerTable {
  Tensor embedding;  // n × D
  double lambda = 0.0;
};

/// Acoustic/visual pre-encoding: one affine map per utterance.
Tensor preencode_av(const Tensor& features, const AffineParams& params);

/// Runs the cell over the rows of `inputs` (in reverse when `reverse`) and
/// returns the hidden state after each row, in the original row order.
Tensor gru_sequence(const Tensor& inputs, const GruCellParams& cell, bool reverse);

/// Bidirectional recurrent text pre-encoding projected to the model width.
Tensor preencode_text(const Tensor& features, const TextEncoderParams& params);

/// X = O + λ·S_e[speaker(i)] for every encoded modality matrix; the same
/// embedding row is added to each modality.
std::vector<Tensor> inject_speaker(std::span<const Tensor> encoded, std::span<const int> speakers,
                                   const SpeakerTable& table);

}  // namespace ercfuse
