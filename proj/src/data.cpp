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

#include "ercfuse/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "ercfuse/errors.hpp"
#include "ercfuse/tensor.hpp"

namespace ercfuse {

using json = nlohmann::json;

namespace {

constexpr std::array<const char*, 3> kFeatureKeys = {"t", "a", "v"};

void invalid(const Conversation& conv, const std::string& what) {
  fail(ErrorKind::kValidation, "conversation '" + conv.id + "': " + what);
}

}  // namespace

std::size_t Dataset::num_utterances() const {
  std::size_t total = 0;
  for (const auto& c : conversations) total += c.size();
  return total;
}

void validate(const Dataset& dataset) {
  const auto& meta = dataset.meta;
  if (meta.num_classes < 1) fail(ErrorKind::kValidation, "header declares fewer than one class");
  if (meta.num_speakers < 1) fail(ErrorKind::kValidation, "header declares fewer than one speaker");
  for (int d : meta.dims)
    if (d < 1) fail(ErrorKind::kValidation, "feature dimensions must be positive");
  if (!meta.class_names.empty() && static_cast<int>(meta.class_names.size()) != meta.num_classes) {
    fail(ErrorKind::kValidation, "class name count does not match class count");
  }
  for (const auto& conv : dataset.conversations) {
    if (conv.utterances.empty()) invalid(conv, "has no utterances");
    for (std::size_t i = 0; i < conv.size(); ++i) {
      const auto& u = conv.utterances[i];
      const std::string where = "utterance " + std::to_string(i) + " ";
      if (u.label < 0 || u.label >= meta.num_classes) {
        invalid(conv, where + "label " + std::to_string(u.label) + " outside [0, " + std::to_string(meta.num_classes) + ")");
      }
      if (u.speaker < 0 || u.speaker >= meta.num_speakers) {
        invalid(conv, where + "speaker " + std::to_string(u.speaker) + " outside [0, " + std::to_string(meta.num_speakers) + ")");
      }
      for (std::size_t m = 0; m < 3; ++m) {
        if (static_cast<int>(u.features[m].size()) != meta.dims[m]) {
          invalid(conv, where + kFeatureKeys[m] + " feature has dim " + std::to_string(u.features[m].size()) +
                            ", expected " + std::to_string(meta.dims[m]));
        }
        for (double v : u.features[m])
          if (!std::isfinite(v)) invalid(conv, where + kFeatureKeys[m] + " feature is not finite");
      }
    }
  }
}

Dataset parse_jsonl(std::istream& in) {
  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        auto& meta = dataset.meta;
        meta.num_classes = j.at("c").get<int>();
        meta.num_speakers = j.at("n").get<int>();
        const auto dims = j.at("dims").get<std::vector<int>>();
        if (dims.size() != 3) fail(ErrorKind::kParse, "line 1: dims must list exactly three sizes");
        std::copy(dims.begin(), dims.end(), meta.dims.begin());
        if (j.contains("classes")) meta.class_names = j.at("classes").get<std::vector<std::string>>();
        have_header = true;
        continue;
      }
      Conversation conv;
      conv.id = j.at("id").get<std::string>();
      for (const auto& ju : j.at("utts")) {
        UtteranceRecord u;
        u.speaker = ju.at("spk").get<int>();
        u.label = ju.at("y").get<int>();
        for (std::size_t m = 0; m < 3; ++m) u.features[m] = ju.at(kFeatureKeys[m]).get<std::vector<double>>();
        conv.utterances.push_back(std::move(u));
      }
      dataset.conversations.push_back(std::move(conv));
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) fail(ErrorKind::kParse, "missing metadata header line");
  validate(dataset);
  return dataset;
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return parse_jsonl(in);
}

void write_jsonl(const Dataset& dataset, std::ostream& out) {
  const auto& meta = dataset.meta;
  json header = {{"c", meta.num_classes}, {"n", meta.num_speakers}, {"dims", meta.dims}, {"classes", meta.class_names}};
  out << header.dump() << '\n';
  for (const auto& conv : dataset.conversations) {
    json utts = json::array();
    for (const auto& u : conv.utterances) {
      utts.push_back({{"spk", u.speaker}, {"y", u.label}, {"t", u.features[0]}, {"a", u.features[1]}, {"v", u.features[2]}});
    }
    out << json{{"id", conv.id}, {"utts", std::move(utts)}}.dump() << '\n';
  }
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  write_jsonl(dataset, out);
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<double> fresh_label_distribution(const SynthOptions& o) {
  std::vector<double> dist(static_cast<std::size_t>(o.num_classes), (1.0 - o.speaker_bias) / o.num_classes);
  // The mood class is uniform, so its share spreads evenly.
  for (int s = 0; s < o.num_speakers; ++s) dist[static_cast<std::size_t>(s % o.num_classes)] += o.speaker_bias / o.num_speakers;
  return dist;
}

namespace {

// C points per modality with pairwise distance `separation`: scaled
// orthonormal directions when the dimension allows, random unit directions
// otherwise.
std::vector<std::vector<double>> make_prototypes(int classes, int dim, double separation, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (double& x : v) x = normal(rng);
    if (dim >= classes) {
      for (const auto& b : basis) {
        double dot = 0.0;
        for (int i = 0; i < dim; ++i) dot += v[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
        for (int i = 0; i < dim; ++i) v[static_cast<std::size_t>(i)] -= dot * b[static_cast<std::size_t>(i)];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  const double radius = dim >= classes ? separation / std::sqrt(2.0) : separation / 2.0;
  for (auto& v : basis)
    for (double& x : v) x *= radius;
  return basis;
}

int draw(const std::vector<double>& dist, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng), acc = 0.0;
  for (std::size_t c = 0; c < dist.size(); ++c) {
    acc += dist[c];
    if (r < acc) return static_cast<int>(c);
  }
  return static_cast<int>(dist.size()) - 1;
}

}  // namespace

Dataset synth_dataset(const SynthOptions& o) {
  if (o.num_classes < 1 || o.num_speakers < 1 || o.num_conversations < 0) fail(ErrorKind::kConfig, "synth: counts must be positive");
  if (o.min_length < 1 || o.max_length < o.min_length) fail(ErrorKind::kConfig, "synth: need 1 <= min_length <= max_length");
  if (!(o.separation >= 0.0)) fail(ErrorKind::kConfig, "synth: separation must be >= 0");
  if (!(o.persistence >= 0.0 && o.persistence <= 1.0)) fail(ErrorKind::kConfig, "synth: persistence must lie in [0, 1]");
  if (!(o.speaker_bias >= 0.0 && o.speaker_bias <= 1.0)) fail(ErrorKind::kConfig, "synth: speaker_bias must lie in [0, 1]");
  if (!(o.mood >= 0.0 && o.speaker_bias + o.mood <= 1.0)) fail(ErrorKind::kConfig, "synth: need mood >= 0 and speaker_bias + mood <= 1");
  if (!(o.ambiguity >= 0.0 && o.ambiguity <= 1.0)) fail(ErrorKind::kConfig, "synth: ambiguity must lie in [0, 1]");
  for (int d : o.dims)
    if (d < 1) fail(ErrorKind::kConfig, "synth: feature dimensions must be positive");

  Rng rng(o.seed);
  Dataset dataset;
  dataset.meta.num_classes = o.num_classes;
  dataset.meta.num_speakers = o.num_speakers;
  dataset.meta.dims = o.dims;
  for (int c = 0; c < o.num_classes; ++c) dataset.meta.class_names.push_back("class" + std::to_string(c));

  std::array<std::vector<std::vector<double>>, 3> prototypes;
  for (std::size_t m = 0; m < 3; ++m) prototypes[m] = make_prototypes(o.num_classes, o.dims[m], o.separation, rng);

  std::vector<std::vector<double>> speaker_dist;
  for (int s = 0; s < o.num_speakers; ++s) {
    std::vector<double> d(static_cast<std::size_t>(o.num_classes), (1.0 - o.speaker_bias - o.mood) / o.num_classes);
    d[static_cast<std::size_t>(s % o.num_classes)] += o.speaker_bias;
    speaker_dist.push_back(std::move(d));
  }

  std::uniform_int_distribution<int> length(o.min_length, o.max_length);
  std::uniform_int_distribution<int> speaker(0, o.num_speakers - 1);
  std::bernoulli_distribution stay(o.persistence);
  std::bernoulli_distribution ambiguous(o.ambiguity);
  std::normal_distribution<double> noise(0.0, o.noise);

  for (int k = 0; k < o.num_conversations; ++k) {
    Conversation conv;
    conv.id = "synth_" + std::to_string(k);
    const int m = length(rng);
    int previous = -1;
    auto conv_dist = speaker_dist;
    if (o.mood > 0.0) {
      const auto mood_class = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, o.num_classes - 1)(rng));
      for (auto& d : conv_dist) d[mood_class] += o.mood;
    }
    for (int i = 0; i < m; ++i) {
      UtteranceRecord u;
      u.speaker = speaker(rng);
      const bool keep = previous >= 0 && stay(rng);
      u.label = keep ? previous : draw(conv_dist[static_cast<std::size_t>(u.speaker)], rng);
      const bool hidden = ambiguous(rng);
      for (std::size_t mod = 0; mod < 3; ++mod) {
        const auto& proto = prototypes[mod][static_cast<std::size_t>(u.label)];
        auto& f = u.features[mod];
        f.resize(proto.size());
        for (std::size_t j = 0; j < proto.size(); ++j) f[j] = (hidden ? 0.0 : proto[j]) + noise(rng);
      }
      previous = u.label;
      conv.utterances.push_back(std::move(u));
    }
    dataset.conversations.push_back(std::move(conv));
  }
  return dataset;
}

std::vector<Batch> batch_conversations(std::span<const Conversation> conversations, int batch_size) {
  if (batch_size < 1) fail(ErrorKind::kConfig, "batch_size must be >= 1");
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < conversations.size(); ++i) {
    if (i % static_cast<std::size_t>(batch_size) == 0) batches.emplace_back();
    batches.back().conversations.push_back(i);
    batches.back().num_utterances += conversations[i].size();
  }
  return batches;
}

DatasetSplit split_dataset(const Dataset& dataset, double train_fraction, double valid_fraction) {
  const std::size_t n = dataset.conversations.size();
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  auto n_valid = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(n)));
  if (n >= 3) {
    n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
    n_valid = std::clamp<std::size_t>(n_valid, 1, n - n_train - 1);
  } else {
    n_train = n;
    n_valid = 0;
  }
  DatasetSplit split{{dataset.meta, {}}, {dataset.meta, {}}, {dataset.meta, {}}};
  for (std::size_t i = 0; i < n; ++i) {
    auto& part = i < n_train ? split.train : (i < n_train + n_valid ? split.valid : split.test);
    part.conversations.push_back(dataset.conversations[i]);
  }
  return split;
}

std::vector<std::size_t> class_histogram(const Dataset& dataset) {
  std::vector<std::size_t> hist(static_cast<std::size_t>(std::max(dataset.meta.num_classes, 0)), 0);
  for (const auto& c : dataset.conversations)
    for (const auto& u : c.utterances)
      if (u.label >= 0 && u.label < dataset.meta.num_classes) ++hist[static_cast<std::size_t>(u.label)];
  return hist;
}

}  // namespace ercfuse
