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

#include "ercfuse/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "ercfuse/errors.hpp"
#include "ercfuse/ops.hpp"
#include "ercfuse/optim.hpp"

namespace ercfuse {

std::string TrainHistory::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,valid_acc,valid_wa_f1\n";
  for (const auto& e : epochs) os << e.epoch << ',' << e.train_loss << ',' << e.valid_acc << ',' << e.valid_wa_f1 << '\n';
  return os.str();
}

Tensor batch_loss(const Model& model, std::span<const Conversation> conversations, std::span<const std::size_t> batch,
                  const ForwardContext& ctx) {
  std::size_t total = 0;
  for (auto i : batch) total += conversations[i].size();
  if (total == 0) fail(ErrorKind::kContract, "batch has no utterances");
  Tensor loss;
  bool first = true;
  for (auto i : batch) {
    const auto& conv = conversations[i];
    std::vector<int> labels;
    labels.reserve(conv.size());
    for (const auto& u : conv.utterances) labels.push_back(u.label);
    const auto out = model.forward(conv, ctx);
    Tensor part = classification_loss(out.probs, labels, static_cast<double>(total));
    loss = first ? part : loss + part;
    first = false;
  }
  return loss;
}

std::vector<int> predict(const Model& model, const Dataset& dataset) {
  std::vector<int> predictions;
  const ForwardContext ctx;
  for (const auto& conv : dataset.conversations) {
    const auto out = model.forward(conv, ctx);
    predictions.insert(predictions.end(), out.predictions.begin(), out.predictions.end());
  }
  return predictions;
}

EvalReport evaluate_model(const Model& model, const Dataset& dataset) {
  model.check_compatible(dataset.meta);
  std::vector<int> labels;
  for (const auto& conv : dataset.conversations)
    for (const auto& u : conv.utterances) labels.push_back(u.label);
  return evaluate(predict(model, dataset), labels, model.meta().num_classes);
}

EvalReport evaluate_checkpoint(const Checkpoint& checkpoint, const Dataset& dataset) {
  const Model model = checkpoint.to_model();
  return evaluate_model(model, dataset);
}

TrainResult train(const ModelConfig& config, const Dataset& train_set, const Dataset& valid_set,
                  const TrainOptions& options) {
  config.validate();
  if (train_set.conversations.empty()) fail(ErrorKind::kValidation, "training set is empty");
  Model model(config, train_set.meta, config.seed);
  if (!valid_set.conversations.empty()) model.check_compatible(valid_set.meta);
  const Dataset& selection = valid_set.conversations.empty() ? train_set : valid_set;

  auto params = model.parameter_tensors();
  AdamWState state(params, AdamWOptions{config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng rng(config.seed ^ 0x5DEECE66DULL);
  const ForwardContext train_ctx{Mode::kTrain, config.dropout, &rng, config.norm_eps, nullptr};

  TrainResult result;
  double best = -1.0;
  int since_best = 0;
  auto best_values = model.snapshot();
  std::vector<std::size_t> order(train_set.conversations.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t utterances = 0;
    for (std::size_t start = 0, batch_no = 0; start < order.size(); start += batch_size, ++batch_no) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(batch_size, order.size() - start));
      std::size_t batch_utts = 0;
      for (auto i : batch) batch_utts += train_set.conversations[i].size();
      Tape tape;
      Tensor loss;
      try {
        const auto scope = tape.activate();
        loss = batch_loss(model, train_set.conversations, batch, train_ctx);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumerical) throw;
        fail(ErrorKind::kNumerical, "forward pass failed at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(batch_no) + ", parameter grad norm " +
                                        std::to_string(grad_norm(params)) + ": " + e.what());
      }
      tape.backward(loss);
      const double norm = grad_norm(params);
      if (!std::isfinite(loss.item()) || !std::isfinite(norm)) {
        fail(ErrorKind::kNumerical, "non-finite loss/gradient at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(batch_no) + " (loss " + std::to_string(loss.item()) +
                                        ", grad norm " + std::to_string(norm) + ")");
      }
      if (config.grad_clip > 0.0) clip_grad_norm(params, config.grad_clip);
      adamw_step(params, state);
      zero_grads(params);
      loss_sum += loss.item() * static_cast<double>(batch_utts);
      utterances += batch_utts;
    }

    const EvalReport report = evaluate_model(model, selection);
    EpochRecord record{epoch, loss_sum / static_cast<double>(utterances), report.accuracy, report.weighted_f1};
    result.history.epochs.push_back(record);
    if (options.log != nullptr) {
      *options.log << "epoch " << epoch << " loss " << record.train_loss << " valid_acc " << record.valid_acc
                   << " valid_wa_f1 " << record.valid_wa_f1 << '\n';
    }
    if (report.weighted_f1 > best) {
      best = report.weighted_f1;
      best_values = model.snapshot();
      result.checkpoint.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  model.restore(best_values);
  Checkpoint ckpt = Checkpoint::from_model(model);
  ckpt.best_epoch = result.checkpoint.best_epoch;
  ckpt.best_valid_metric = std::max(best, 0.0);
  std::ostringstream rng_state;
  rng_state << rng;
  ckpt.rng_state = rng_state.str();
  result.checkpoint = std::move(ckpt);
  return result;
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "windows") return SweepAxis::kWindows;
  if (text == "layers") return SweepAxis::kLayers;
  if (text == "lambda") return SweepAxis::kLambda;
  if (text == "update_rule") return SweepAxis::kUpdateRule;
  if (text == "modalities") return SweepAxis::kModalities;
  fail(ErrorKind::kConfig, "unknown sweep axis '" + text + "' (windows, layers, lambda, update_rule, modalities)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kWindows: return "windows";
    case SweepAxis::kLayers: return "layers";
    case SweepAxis::kLambda: return "lambda";
    case SweepAxis::kUpdateRule: return "update_rule";
    case SweepAxis::kModalities: return "modalities";
  }
  return "?";
}

namespace {

std::pair<std::string, std::string> split_pair(const std::string& value) {
  const auto colon = value.find(':');
  if (colon == std::string::npos) fail(ErrorKind::kConfig, "expected a pair like 2:2, got '" + value + "'");
  return {value.substr(0, colon), value.substr(colon + 1)};
}

}  // namespace

std::vector<ModelConfig> sweep_configs(const ModelConfig& base, SweepAxis axis, const std::vector<std::string>& values) {
  std::vector<ModelConfig> configs;
  for (const auto& value : values) {
    ModelConfig c = base;
    switch (axis) {
      case SweepAxis::kWindows: {
        const auto [past, future] = split_pair(value);
        c.set("window_past", past);
        c.set("window_future", future);
        break;
      }
      case SweepAxis::kLayers: {
        const auto [graph_layers, cross_layers] = split_pair(value);
        c.set("mdgat_layers", graph_layers);
        c.set("mpcat_layers", cross_layers);
        break;
      }
      case SweepAxis::kLambda: c.set("speaker_lambda", value); break;
      case SweepAxis::kUpdateRule: c.set("update_rule", value); break;
      case SweepAxis::kModalities: c.set("modalities", value); break;
    }
    c.validate();
    configs.push_back(c);
  }
  return configs;
}

std::vector<SweepRow> ablation_sweep(const ModelConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                                     const Dataset& train_set, const Dataset& valid_set, const Dataset& test_set,
                                     int threads) {
  const auto configs = sweep_configs(base, axis, values);
  const Dataset& report_set = !test_set.conversations.empty()    ? test_set
                              : !valid_set.conversations.empty() ? valid_set
                                                                 : train_set;
  std::vector<SweepRow> rows(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        const auto result = train(configs[i], train_set, valid_set);
        rows[i].value = values[i];
        rows[i].epochs_run = static_cast<int>(result.history.epochs.size());
        rows[i].best_epoch = result.checkpoint.best_epoch;
        rows[i].valid_wa_f1 = result.checkpoint.best_valid_metric;
        rows[i].test = evaluate_checkpoint(result.checkpoint, report_set);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(configs.size(), 1)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "axis,value,epochs,best_epoch,valid_wa_f1,test_acc,test_wa_f1\n";
  for (const auto& r : rows) {
    os << to_string(axis) << ',' << r.value << ',' << r.epochs_run << ',' << r.best_epoch << ',' << r.valid_wa_f1
       << ',' << r.test.accuracy << ',' << r.test.weighted_f1 << '\n';
  }
  return os.str();
}

}  // namespace ercfuse
