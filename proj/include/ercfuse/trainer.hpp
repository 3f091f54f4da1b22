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

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ercfuse/checkpoint.hpp"
#include "ercfuse/data.hpp"
#include "ercfuse/head.hpp"
#include "ercfuse/model.hpp"

namespace ercfuse {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_acc = 0.0;
  double valid_wa_f1 = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// Header `epoch,train_loss,valid_acc,valid_wa_f1`, one row per epoch run.
  std::string to_csv() const;
};

struct TrainResult {
  Checkpoint checkpoint;  // parameters of the best-validation epoch
  TrainHistory history;
};

struct TrainOptions {
  std::ostream* log = nullptr;  // per-epoch progress lines, if set
};

/// Summed cross-entropy of every conversation listed in `batch`, divided by
/// the batch's total utterance count.
Tensor batch_loss(const Model& model, std::span<const Conversation> conversations, std::span<const std::size_t> batch,
                  const ForwardContext& ctx);

/// Seeded epoch loop: shuffle, batch, forward, loss, backward, AdamW step.
/// Keeps the parameters of the epoch with the best validation weighted F1 and
/// stops after `patience` epochs without improvement. An empty validation set
/// selects on the training set instead. A non-finite loss or gradient raises
/// ErrorKind::kNumerical with the epoch, batch and gradient norm.
TrainResult train(const ModelConfig& config, const Dataset& train_set, const Dataset& valid_set,
                  const TrainOptions& options = {});

/// Eval-mode predictions for every utterance, in dataset order.
std::vector<int> predict(const Model& model, const Dataset& dataset);
EvalReport evaluate_model(const Model& model, const Dataset& dataset);
EvalReport evaluate_checkpoint(const Checkpoint& checkpoint, const Dataset& dataset);

enum class SweepAxis { kWindows, kLayers, kLambda, kUpdateRule, kModalities };

SweepAxis parse_sweep_axis(const std::string& text);
std::string to_string(SweepAxis axis);

/// One config per value. Value syntax: windows "J:K", layers "L:K",
/// lambda a real, update_rule a rule name, modalities letters like "ta".
std::vector<ModelConfig> sweep_configs(const ModelConfig& base, SweepAxis axis, const std::vector<std::string>& values);

struct SweepRow {
  std::string value;
  int epochs_run = 0;
  int best_epoch = 0;
  double valid_wa_f1 = 0.0;
  EvalReport test;
};

/// Trains one model per value (same seed) and evaluates each on `test_set`
/// (or the first non-empty of validation and training sets).
/// Runs use up to `threads` workers; results are identical for any count.
std::vector<SweepRow> ablation_sweep(const ModelConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                                     const Dataset& train_set, const Dataset& valid_set, const Dataset& test_set,
                                     int threads = 1);

/// Header `axis,value,epochs,best_epoch,valid_wa_f1,test_acc,test_wa_f1`.
std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows);

}  // namespace ercfuse
