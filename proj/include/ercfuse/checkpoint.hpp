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
#include <iosfwd>
#include <string>
#include <vector>

#include "ercfuse/model.hpp"

namespace ercfuse {

/// Binary layout (all integers little-endian):
///   "ERCFCKPT" | u32 version | u64 n | n bytes of JSON {config, meta, rng_state, best_valid_metric, best_epoch}
///   | u64 count | count × ( u32 len | name | u64 rows | u64 cols | rows·cols f64 )
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  ModelConfig config;
  DatasetMeta meta;
  std::vector<NamedParameter> parameters;
  std::string rng_state;
  double best_valid_metric = 0.0;
  int best_epoch = -1;

  /// Deep copy of the model's current parameter values.
  static Checkpoint from_model(const Model& model);
  /// Rebuilds a model whose parameters equal the stored values bit for bit.
  Model to_model() const;
};

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ercfuse
