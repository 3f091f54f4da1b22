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

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ercfuse {

enum class Modality : int { kText = 0, kAudio = 1, kVisual = 2 };
inline constexpr std::array<Modality, 3> kAllModalities = {Modality::kText, Modality::kAudio, Modality::kVisual};

struct UtteranceRecord {
  int speaker = 0;
  int label = 0;
  std::array<std::vector<double>, 3> features;  // indexed by Modality

  const std::vector<double>& feature(Modality m) const { return features[static_cast<std::size_t>(m)]; }
  bool operator==(const UtteranceRecord&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<UtteranceRecord> utterances;  // temporal order

  std::size_t size() const { return utterances.size(); }
  bool operator==(const Conversation&) const = default;
};

struct DatasetMeta {
  int num_classes = 0;
  int num_speakers = 0;
  std::array<int, 3> dims = {0, 0, 0};  // text, audio, visual
  std::vector<std::string> class_names;

  int dim(Modality m) const { return dims[static_cast<std::size_t>(m)]; }
  bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Conversation> conversations;

  std::size_t num_utterances() const;
  bool operator==(const Dataset&) const = default;
};

/// Throws ErrorKind::kValidation naming the offending conversation.
void validate(const Dataset& dataset);

/// Line 1: {"c","n","dims","classes"}; then one conversation per line:
/// {"id", "utts": [{"spk","y","t","a","v"}, ...]}.
Dataset parse_jsonl(std::istream& in);
Dataset load_jsonl(const std::filesystem::path& path);
void write_jsonl(const Dataset& dataset, std::ostream& out);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);

struct SynthOptions {
  std::uint64_t seed = 1;
  int num_conversations = 50;
  int min_length = 8;
  int max_length = 12;
  int num_classes = 4;
  int num_speakers = 2;
  std::array<int, 3> dims = {32, 16, 16};
  /// Distance between class prototypes within each modality.
  double separation = 6.0;
  /// Probability that an utterance repeats the previous utterance's label.
  double persistence = 0.6;
  /// Weight of a speaker's preferred class (speaker % C) in fresh label draws.
  double speaker_bias = 0.0;
  /// Weight of a per-conversation class, drawn uniformly once per
  /// conversation, in fresh label draws. speaker_bias + mood must be <= 1.
  double mood = 0.0;
  /// Fraction of utterances whose features carry no class signal at all.
  double ambiguity = 0.0;
  /// Per-coordinate standard deviation of the feature noise.
  double noise = 1.0;
};

Dataset synth_dataset(const SynthOptions& options);

/// Distribution a fresh label is drawn from, averaged over uniform speakers
/// and conversation moods.
std::vector<double> fresh_label_distribution(const SynthOptions& options);

struct Batch {
  std::vector<std::size_t> conversations;  // indices into the source span
  std::size_t num_utterances = 0;
};

/// Groups whole conversations, in order, into batches of `batch_size`.
std::vector<Batch> batch_conversations(std::span<const Conversation> conversations, int batch_size);

struct DatasetSplit {
  Dataset train;
  Dataset valid;
  Dataset test;
};

/// Splits by conversation in file order: first 80% train, next 10% valid,
/// remainder test (each non-empty part gets at least one conversation when
/// there are three or more).
DatasetSplit split_dataset(const Dataset& dataset, double train_fraction = 0.8, double valid_fraction = 0.1);

std::vector<std::size_t> class_histogram(const Dataset& dataset);

}  // namespace ercfuse
