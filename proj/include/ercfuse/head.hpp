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
#include <string>
#include <vector>

#include "ercfuse/tensor.hpp"

namespace ercfuse {

struct ClassifierParams {
  Tensor w_hidden;  // H × D
  Tensor b_hidden;  // 1 × H
  Tensor w_out;     // C × H
  Tensor b_out;     // 1 × C
};

/// Z = W_u·[S_0 ∥ S_1 ∥ …].
Tensor fuse(std::span<const Tensor> states, const Tensor& w_fuse);

/// W'·ReLU(W·z + b) + b'.
Tensor class_logits(const Tensor& z, const ClassifierParams& params);

struct Classification {
  Tensor probs;
  std::vector<int> predictions;
};

Classification classify(const Tensor& z, const ClassifierParams& params);

/// Row-wise argmax; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& scores);

/// Cross-entropy summed over rows and divided by `total_utterances`.
Tensor classification_loss(const Tensor& probs, std::span<const int> labels, double total_utterances);

struct EvalReport {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::vector<std::int64_t> support;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]

  std::string to_json() const;
  std::string confusion_csv(const std::vector<std::string>& class_names = {}) const;
};

EvalReport evaluate(std::span<const int> predictions, std::span<const int> labels, int num_classes);

}  // namespace ercfuse
