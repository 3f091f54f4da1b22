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

#include "ercfuse/head.hpp"

#include <json.hpp>
#include <sstream>

#include "ercfuse/errors.hpp"
#include "ercfuse/ops.hpp"

namespace ercfuse {

Tensor fuse(std::span<const Tensor> states, const Tensor& w_fuse) {
  if (states.empty()) fail(ErrorKind::kContract, "fusion needs at least one state");
  for (const auto& s : states) {
    if (s.rows() != states[0].rows() || s.cols() != states[0].cols()) {
      fail(ErrorKind::kDimension, "fusion states differ in shape: " + states[0].shape_string() + " vs " + s.shape_string());
    }
  }
  return linear(concat_cols(states), w_fuse);
}

Tensor class_logits(const Tensor& z, const ClassifierParams& params) {
  const Tensor hidden = relu(linear(z, params.w_hidden, params.b_hidden));
  return linear(hidden, params.w_out, params.b_out);
}

Classification classify(const Tensor& z, const ClassifierParams& params) {
  Tensor probs = softmax_rows(class_logits(z, params));
  auto predictions = argmax_rows(probs);
  return {std::move(probs), std::move(predictions)};
}

std::vector<int> argmax_rows(const Tensor& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Index r = 0; r < scores.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

Tensor classification_loss(const Tensor& probs, std::span<const int> labels, double total_utterances) {
  return nll_loss(probs, labels, total_utterances);
}

EvalReport evaluate(std::span<const int> predictions, std::span<const int> labels, int num_classes) {
  if (predictions.size() != labels.size()) fail(ErrorKind::kContract, "predictions and labels differ in length");
  if (labels.empty()) fail(ErrorKind::kContract, "cannot evaluate an empty prediction set");
  if (num_classes < 1) fail(ErrorKind::kContract, "need at least one class");
  const auto c = static_cast<std::size_t>(num_classes);
  EvalReport report;
  report.confusion.assign(c, std::vector<std::int64_t>(c, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= num_classes || p < 0 || p >= num_classes) fail(ErrorKind::kContract, "class index out of range");
    ++report.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
  }
  const auto total = static_cast<double>(labels.size());
  std::int64_t correct = 0;
  report.support.assign(c, 0);
  report.per_class_f1.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    std::int64_t predicted = 0;
    for (std::size_t j = 0; j < c; ++j) {
      report.support[k] += report.confusion[k][j];
      predicted += report.confusion[j][k];
    }
    const std::int64_t tp = report.confusion[k][k];
    correct += tp;
    // F1 = 2TP / (2TP + FP + FN), zero when the class is neither present nor predicted.
    const std::int64_t denom = report.support[k] + predicted;
    report.per_class_f1[k] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    report.weighted_f1 += static_cast<double>(report.support[k]) / total * report.per_class_f1[k];
  }
  report.accuracy = static_cast<double>(correct) / total;
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j = {{"accuracy", accuracy},
                      {"weighted_f1", weighted_f1},
                      {"per_class_f1", per_class_f1},
                      {"support", support},
                      {"confusion", confusion}};
  return j.dump();
}

std::string EvalReport::confusion_csv(const std::vector<std::string>& class_names) const {
  auto name = [&](std::size_t k) { return k < class_names.size() ? class_names[k] : std::to_string(k); };
  std::ostringstream os;
  os << "true\\pred";
  for (std::size_t k = 0; k < confusion.size(); ++k) os << ',' << name(k);
  os << '\n';
  for (std::size_t r = 0; r < confusion.size(); ++r) {
    os << name(r);
    for (auto v : confusion[r]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace ercfuse
