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
#include <optional>
#include <string>
#include <vector>

#include "ercfuse/config.hpp"
#include "ercfuse/data.hpp"
#include "ercfuse/encoder.hpp"
#include "ercfuse/head.hpp"
#include "ercfuse/mdgat.hpp"
#include "ercfuse/mpcat.hpp"

namespace ercfuse {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// Per-modality encoder: the text modality uses the recurrent encoder, the
/// others an affine map.
struct ModalityEncoder {
  Modality modality = Modality::kText;
  std::optional<TextEncoderParams> text;
  std::optional<AffineParams> affine;
};

/// Output of one conversation's forward pass.
struct ForwardResult {
  Tensor logits;
  Tensor probs;
  std::vector<int> predictions;
  ModalStates encoded;       // after speaker injection
  ModalStates contextual;    // after the graph-attention stacks
  ModalStates cross_modal;   // after the cross-modal stacks
};

/// Two-stage fusion model: pre-encoding and speaker injection, a graph
/// attention stack per modality, cross-modal attention layers, then fusion
/// and classification.
class Model {
 public:
  /// Builds and initialises every parameter from `seed`: weights uniform in
  /// ±1/√fan_in, biases zero, norm gains one, speaker table N(0, 0.02²).
  Model(const ModelConfig& config, const DatasetMeta& meta, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const DatasetMeta& meta() const { return meta_; }
  const std::vector<Modality>& modalities() const { return modalities_; }

  std::vector<NamedParameter>& parameters() { return parameters_; }
  const std::vector<NamedParameter>& parameters() const { return parameters_; }
  std::vector<Tensor> parameter_tensors() const;
  Tensor* find_parameter(const std::string& name);
  std::size_t num_scalars() const;

  ForwardResult forward(const Conversation& conversation, const ForwardContext& ctx) const;

  /// Raw parameter values, in parameter order.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

  /// Throws ErrorKind::kConfig when the dataset's shape differs from the model's.
  void check_compatible(const DatasetMeta& meta) const;

  // Structured views onto the registered parameters.
  std::vector<ModalityEncoder> encoders;
  SpeakerTable speakers;
  std::vector<std::vector<MdgatLayerParams>> mdgat;  // [modality][layer]
  std::vector<MpcatLayerParams> mpcat;               // [layer]
  Tensor w_fuse;
  ClassifierParams classifier;

 private:
  ModelConfig config_;
  DatasetMeta meta_;
  std::vector<Modality> modalities_;
  std::vector<NamedParameter> parameters_;
};

/// Feature matrix (m × d) of one modality of a conversation.
Tensor modality_features(const Conversation& conversation, Modality modality);

char modality_letter(Modality m);

}  // namespace ercfuse
