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
#include <filesystem>
#include <string>
#include <vector>

#include "ercfuse/data.hpp"
#include "ercfuse/mdgat.hpp"

namespace ercfuse {

/// Which modalities a model consumes, kept in text/audio/visual order.
class ModalitySet {
 public:
  ModalitySet() = default;
  /// Parses letters from {t, a, v}, e.g. "tav" or "av".
  static ModalitySet parse(const std::string& letters);

  bool contains(Modality m) const { return (bits_ >> static_cast<int>(m)) & 1U; }
  void insert(Modality m) { bits_ |= 1U << static_cast<int>(m); }
  std::size_t size() const;
  std::vector<Modality> members() const;
  std::string to_string() const;
  bool operator==(const ModalitySet&) const = default;

 private:
  unsigned bits_ = 0;
};

struct ModelConfig {
  int dim = 64;
  int heads = 4;
  int mdgat_layers = 3;
  int mpcat_layers = 4;
  int window_past = 4;
  int window_future = 4;
  double speaker_lambda = 1.6;
  UpdateRule update_rule = UpdateRule::kSumProduct;
  double dropout = 0.1;
  double lr = 1e-5;
  double weight_decay = 1e-5;
  int batch_size = 8;
  int max_epochs = 100;
  int patience = 15;
  std::uint64_t seed = 0;
  ModalitySet modalities = ModalitySet::parse("tav");
  int message_dim = 0;        // 0: same as dim
  int ff_dim = 0;             // 0: 4 · dim
  int classifier_hidden = 0;  // 0: same as dim
  int text_hidden = 0;        // 0: same as dim
  double grad_clip = 0.0;     // 0: off
  double leaky_slope = 0.2;
  double norm_eps = 1e-5;

  int resolved_message_dim() const { return message_dim > 0 ? message_dim : dim; }
  int resolved_ff_dim() const { return ff_dim > 0 ? ff_dim : 4 * dim; }
  int resolved_classifier_hidden() const { return classifier_hidden > 0 ? classifier_hidden : dim; }
  int resolved_text_hidden() const { return text_hidden > 0 ? text_hidden : dim; }
  int head_dim() const { return dim / heads; }

  /// Throws ErrorKind::kConfig on the first violated constraint.
  void validate() const;

  /// Sets one field from its textual form; unknown keys are rejected.
  void set(const std::string& key, const std::string& value);
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

/// Table II settings: L=3, K=4, λ=1.6, lr 1e-5, batch 8.
ModelConfig iemocap_profile();
/// Table II settings: L=2, K=2, λ=0.6, lr 1e-5, batch 32.
ModelConfig meld_profile();

/// Model configuration plus the data locations of one training run.
struct RunConfig {
  ModelConfig model;
  std::filesystem::path data;        // single file, split 80/10/10
  std::filesystem::path train_data;  // or explicit splits
  std::filesystem::path valid_data;
  std::filesystem::path test_data;
  std::filesystem::path out_dir;

  /// Applies one `key = value` setting (model keys or path keys).
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir = {});
};

/// Reads `key = value` lines ('#' starts a comment). Paths are resolved
/// against the file's directory. Unknown keys are a config error.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// The key-value text for a model config, loadable by load_run_config.
std::string to_key_value(const ModelConfig& config);

}  // namespace ercfuse
