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

#include "ercfuse/model.hpp"

#include <cmath>
#include <random>

#include "ercfuse/errors.hpp"
#include "ercfuse/ops.hpp"

namespace ercfuse {

char modality_letter(Modality m) { return "tav"[static_cast<int>(m)]; }

Tensor modality_features(const Conversation& conversation, Modality modality) {
  const auto m = static_cast<Index>(conversation.size());
  if (m == 0) fail(ErrorKind::kContract, "conversation '" + conversation.id + "' is empty");
  const auto d = static_cast<Index>(conversation.utterances[0].feature(modality).size());
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m * d));
  for (const auto& u : conversation.utterances) {
    const auto& f = u.feature(modality);
    if (static_cast<Index>(f.size()) != d) fail(ErrorKind::kValidation, "ragged features in '" + conversation.id + "'");
    values.insert(values.end(), f.begin(), f.end());
  }
  return Tensor(m, d, std::move(values));
}

namespace {

class ParameterFactory {
 public:
  ParameterFactory(std::vector<NamedParameter>& registry, std::uint64_t seed) : registry_(registry), rng_(seed) {}

  Tensor weight(const std::string& name, Index rows, Index cols) {
    Tensor t = Tensor::parameter(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : t.values()) v = u(rng_);
    return add(name, t);
  }

  Tensor zeros(const std::string& name, Index rows, Index cols) { return add(name, Tensor::parameter(rows, cols)); }

  Tensor ones(const std::string& name, Index rows, Index cols) {
    Tensor t = Tensor::parameter(rows, cols);
    for (double& v : t.values()) v = 1.0;
    return add(name, t);
  }

  Tensor normal(const std::string& name, Index rows, Index cols, double stddev) {
    Tensor t = Tensor::parameter(rows, cols);
    std::normal_distribution<double> n(0.0, stddev);
    for (double& v : t.values()) v = n(rng_);
    return add(name, t);
  }

 private:
  Tensor add(const std::string& name, Tensor t) {
    registry_.push_back({name, t});
    return t;
  }

  std::vector<NamedParameter>& registry_;
  Rng rng_;
};

GruCellParams make_gru(ParameterFactory& f, const std::string& prefix, Index in, Index hidden) {
  GruCellParams cell;
  cell.w_input = f.weight(prefix + ".w_input", 3 * hidden, in);
  cell.w_hidden = f.weight(prefix + ".w_hidden", 3 * hidden, hidden);
  cell.b_input = f.zeros(prefix + ".b_input", 1, 3 * hidden);
  cell.b_hidden = f.zeros(prefix + ".b_hidden", 1, 3 * hidden);
  return cell;
}

AttentionParams make_attention(ParameterFactory& f, const std::string& prefix, Index dim, Index heads) {
  AttentionParams a;
  const Index dk = dim / heads;
  for (Index h = 0; h < heads; ++h) {
    const std::string p = prefix + ".head" + std::to_string(h);
    a.w_query.push_back(f.weight(p + ".w_query", dk, dim));
    a.w_key.push_back(f.weight(p + ".w_key", dk, dim));
    a.w_value.push_back(f.weight(p + ".w_value", dk, dim));
  }
  a.w_merge = f.weight(prefix + ".w_merge", dim, dk * heads);
  return a;
}

}  // namespace

Model::Model(const ModelConfig& config, const DatasetMeta& meta, std::uint64_t seed)
    : config_(config), meta_(meta), modalities_(config.modalities.members()) {
  config_.validate();
  if (meta.num_classes < 1 || meta.num_speakers < 1) fail(ErrorKind::kConfig, "dataset metadata is incomplete");
  ParameterFactory f(parameters_, seed);
  const Index dim = config_.dim;
  const Index heads = config_.heads;
  const Index head_dim = config_.head_dim();
  const Index msg = config_.resolved_message_dim();

  for (auto m : modalities_) {
    ModalityEncoder enc;
    enc.modality = m;
    const std::string prefix = std::string("encoder.") + modality_letter(m);
    const Index in = meta.dim(m);
    if (m == Modality::kText) {
      const Index hidden = config_.resolved_text_hidden();
      TextEncoderParams text;
      text.forward = make_gru(f, prefix + ".forward", in, hidden);
      text.backward = make_gru(f, prefix + ".backward", in, hidden);
      text.projection.weight = f.weight(prefix + ".projection.weight", dim, 2 * hidden);
      text.projection.bias = f.zeros(prefix + ".projection.bias", 1, dim);
      enc.text = std::move(text);
    } else {
      AffineParams affine;
      affine.weight = f.weight(prefix + ".weight", dim, in);
      affine.bias = f.zeros(prefix + ".bias", 1, dim);
      enc.affine = std::move(affine);
    }
    encoders.push_back(std::move(enc));
  }

  speakers.embedding = f.normal("speaker.embedding", meta.num_speakers, dim, 0.02);
  speakers.lambda = config_.speaker_lambda;

  for (auto m : modalities_) {
    std::vector<MdgatLayerParams> stack;
    for (int l = 0; l < config_.mdgat_layers; ++l) {
      const std::string prefix = std::string("mdgat.") + modality_letter(m) + ".layer" + std::to_string(l);
      MdgatLayerParams layer;
      for (Index h = 0; h < heads; ++h) {
        const std::string p = prefix + ".head" + std::to_string(h);
        GatHeadParams head;
        head.w_edge = f.weight(p + ".w_edge", head_dim, 2 * dim);
        head.attention = f.weight(p + ".attention", 1, head_dim);
        head.w_pass = f.weight(p + ".w_pass", msg, dim);
        switch (config_.update_rule) {
          case UpdateRule::kSum:
            head.w_update0 = f.weight(p + ".w_sum0", head_dim, msg);
            head.w_update1 = f.weight(p + ".w_sum1", head_dim, dim);
            break;
          case UpdateRule::kConcat:
            head.w_update0 = f.weight(p + ".w_cat", head_dim, msg + dim);
            break;
          case UpdateRule::kSumProduct:
            head.w_update0 = f.weight(p + ".w_sump", head_dim, 2 * dim);
            break;
        }
        layer.heads.push_back(std::move(head));
      }
      layer.w_merge = f.weight(prefix + ".w_merge", dim, head_dim * heads);
      layer.norm_gain = f.ones(prefix + ".norm.gain", 1, dim);
      layer.norm_bias = f.zeros(prefix + ".norm.bias", 1, dim);
      stack.push_back(std::move(layer));
    }
    mdgat.push_back(std::move(stack));
  }

  const Index ff = config_.resolved_ff_dim();
  for (int k = 0; k < config_.mpcat_layers; ++k) {
    MpcatLayerParams layer;
    for (std::size_t i = 0; i < modalities_.size(); ++i) {
      const std::string prefix = "mpcat.layer" + std::to_string(k) + "." + modality_letter(modalities_[i]);
      MpcatBlockParams block;
      for (std::size_t j = 0; j < modalities_.size(); ++j) {
        if (j == i) continue;
        block.branches.push_back(
            make_attention(f, prefix + ".from_" + modality_letter(modalities_[j]), dim, heads));
      }
      block.norm1_gain = f.ones(prefix + ".norm1.gain", 1, dim);
      block.norm1_bias = f.zeros(prefix + ".norm1.bias", 1, dim);
      block.norm2_gain = f.ones(prefix + ".norm2.gain", 1, dim);
      block.norm2_bias = f.zeros(prefix + ".norm2.bias", 1, dim);
      block.feed_forward.w0 = f.weight(prefix + ".ff.w0", ff, dim);
      block.feed_forward.b0 = f.zeros(prefix + ".ff.b0", 1, ff);
      block.feed_forward.w1 = f.weight(prefix + ".ff.w1", dim, ff);
      block.feed_forward.b1 = f.zeros(prefix + ".ff.b1", 1, dim);
      layer.blocks.push_back(std::move(block));
    }
    mpcat.push_back(std::move(layer));
  }

  const Index hidden = config_.resolved_classifier_hidden();
  w_fuse = f.weight("head.w_fuse", dim, dim * static_cast<Index>(modalities_.size()));
  classifier.w_hidden = f.weight("head.classifier.w_hidden", hidden, dim);
  classifier.b_hidden = f.zeros("head.classifier.b_hidden", 1, hidden);
  classifier.w_out = f.weight("head.classifier.w_out", meta.num_classes, hidden);
  classifier.b_out = f.zeros("head.classifier.b_out", 1, meta.num_classes);
}

std::vector<Tensor> Model::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(parameters_.size());
  for (const auto& p : parameters_) out.push_back(p.tensor);
  return out;
}

Tensor* Model::find_parameter(const std::string& name) {
  for (auto& p : parameters_)
    if (p.name == name) return &p.tensor;
  return nullptr;
}

std::size_t Model::num_scalars() const {
  std::size_t total = 0;
  for (const auto& p : parameters_) total += static_cast<std::size_t>(p.tensor.size());
  return total;
}

void Model::check_compatible(const DatasetMeta& meta) const {
  if (meta.num_classes != meta_.num_classes) {
    fail(ErrorKind::kConfig, "model has " + std::to_string(meta_.num_classes) + " classes, dataset " +
                                 std::to_string(meta.num_classes));
  }
  if (meta.num_speakers > meta_.num_speakers) {
    fail(ErrorKind::kConfig, "dataset has more speakers (" + std::to_string(meta.num_speakers) +
                                 ") than the model's speaker table (" + std::to_string(meta_.num_speakers) + ")");
  }
  for (auto m : modalities_) {
    if (meta.dim(m) != meta_.dim(m)) {
      fail(ErrorKind::kConfig, std::string("feature dim mismatch for modality ") + modality_letter(m) + ": model " +
                                   std::to_string(meta_.dim(m)) + ", dataset " + std::to_string(meta.dim(m)));
    }
  }
}

ForwardResult Model::forward(const Conversation& conversation, const ForwardContext& ctx) const {
  ForwardResult out;
  const auto m = static_cast<Index>(conversation.size());
  if (m == 0) fail(ErrorKind::kContract, "conversation '" + conversation.id + "' is empty");

  std::vector<Tensor> encoded;
  for (const auto& enc : encoders) {
    const Tensor features = modality_features(conversation, enc.modality);
    encoded.push_back(enc.text ? preencode_text(features, *enc.text) : preencode_av(features, *enc.affine));
  }
  std::vector<int> speaker_ids;
  for (const auto& u : conversation.utterances) speaker_ids.push_back(u.speaker);
  out.encoded = inject_speaker(encoded, speaker_ids, speakers);

  const ConvGraph graph(m, config_.window_past, config_.window_future);
  const MdgatOptions options{config_.update_rule, config_.leaky_slope, config_.norm_eps};
  for (std::size_t i = 0; i < modalities_.size(); ++i) {
    out.contextual.push_back(mdgat_forward(out.encoded[i], graph, mdgat[i], options, ctx.trace));
  }
  out.cross_modal = mpcat_forward(out.contextual, mpcat, ctx);

  const Tensor z = fuse(out.cross_modal, w_fuse);
  out.logits = class_logits(z, classifier);
  out.probs = softmax_rows(out.logits);
  out.predictions = argmax_rows(out.probs);
  return out;
}

std::vector<std::vector<double>> Model::snapshot() const {
  std::vector<std::vector<double>> values;
  values.reserve(parameters_.size());
  for (const auto& p : parameters_) values.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return values;
}

void Model::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != parameters_.size()) fail(ErrorKind::kState, "snapshot has the wrong parameter count");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = parameters_[i].tensor.values();
    if (values[i].size() != dst.size()) fail(ErrorKind::kState, "snapshot shape mismatch for " + parameters_[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace ercfuse
