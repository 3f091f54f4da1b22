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

#include "ercfuse/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <json.hpp>

#include "ercfuse/data.hpp"
#include "ercfuse/errors.hpp"
#include "ercfuse/model.hpp"
#include "ercfuse/trainer.hpp"

namespace ercfuse {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

bool GradcheckReport::passed() const { return failures().empty(); }

double GradcheckReport::worst() const {
  double w = 0.0;
  for (const auto& p : parameters) w = std::max(w, p.max_rel_error);
  return w;
}

std::vector<std::pair<std::string, double>> GradcheckReport::per_module() const {
  std::vector<std::pair<std::string, double>> modules;
  for (const auto& p : parameters) {
    const auto module = p.name.substr(0, p.name.find('.'));
    auto it = std::find_if(modules.begin(), modules.end(), [&](const auto& m) { return m.first == module; });
    if (it == modules.end()) {
      modules.emplace_back(module, p.max_rel_error);
    } else {
      it->second = std::max(it->second, p.max_rel_error);
    }
  }
  return modules;
}

std::vector<std::string> GradcheckReport::failures() const {
  std::vector<std::string> names;
  for (const auto& p : parameters)
    if (!(p.max_rel_error < tolerance)) names.push_back(p.name);
  return names;
}

std::string GradcheckReport::to_json() const {
  nlohmann::json j;
  j["passed"] = passed();
  j["worst_rel_error"] = worst();
  j["tolerance"] = tolerance;
  j["num_parameters"] = parameters.size();
  std::size_t coords = 0;
  for (const auto& p : parameters) coords += p.size;
  j["num_coordinates"] = coords;
  j["seconds"] = seconds;
  nlohmann::json modules = nlohmann::json::object();
  for (const auto& [name, err] : per_module()) modules[name] = err;
  j["modules"] = modules;
  nlohmann::json failed = nlohmann::json::array();
  for (const auto& p : parameters) {
    if (p.max_rel_error < tolerance) continue;
    failed.push_back({{"name", p.name},
                      {"index", p.worst_index},
                      {"rel_error", p.max_rel_error},
                      {"analytic", p.analytic},
                      {"numeric", p.numeric}});
  }
  j["failures"] = failed;
  return j.dump();
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (options.utterances < 1) fail(ErrorKind::kConfig, "gradcheck needs at least one utterance");

  SynthOptions so;
  so.seed = options.seed;
  so.num_conversations = 1;
  so.min_length = options.utterances;
  so.max_length = options.utterances;
  so.num_classes = options.classes;
  so.num_speakers = options.speakers;
  so.dims = {6, 5, 4};
  so.separation = 2.0;
  const Dataset ds = synth_dataset(so);
  const Conversation& conv = ds.conversations.front();

  ModelConfig config;
  config.dim = options.dim;
  config.heads = options.heads;
  config.mdgat_layers = options.mdgat_layers;
  config.mpcat_layers = options.mpcat_layers;
  config.window_past = options.window_past;
  config.window_future = options.window_future;
  config.update_rule = options.rule;
  config.dropout = 0.0;
  config.seed = options.seed;
  config.validate();
  Model model(config, ds.meta, options.seed);

  // Non-trivial speaker rows and norm parameters so their gradients are not all symmetric.
  Rng rng(options.seed + 1);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto& p : model.parameters()) {
    const bool norm = p.name.find("norm") != std::string::npos;
    const bool bias = p.name.find("bias") != std::string::npos || p.name.find(".b_") != std::string::npos ||
                      p.name.find(".b0") != std::string::npos || p.name.find(".b1") != std::string::npos;
    if (!norm && !bias && p.name != "speaker.embedding") continue;
    auto values = p.tensor.values();
    for (auto& v : values) v += normal(rng);
  }

  const std::vector<std::size_t> batch{0};
  const std::span<const Conversation> convs(&conv, 1);
  const ForwardContext ctx;
  Tape tape;
  Tensor loss;
  {
    const auto scope = tape.activate();
    loss = batch_loss(model, convs, batch, ctx);
  }
  tape.backward(loss);

  auto loss_at = [&]() { return batch_loss(model, convs, batch, ctx).item(); };

  GradcheckReport report;
  report.tolerance = options.tolerance;
  for (auto& p : model.parameters()) {
    ParameterCheck check;
    check.name = p.name;
    auto values = p.tensor.values();
    check.size = values.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
      double analytic = p.tensor.has_grad() ? p.tensor.grad()[i] : 0.0;
      if (i == 0 && p.name == options.corrupt_parameter) analytic += 1.0;
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = loss_at();
      values[i] = saved - options.step;
      const double down = loss_at();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic, numeric);
      if (i == 0 || err > check.max_rel_error) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.analytic = analytic;
        check.numeric = numeric;
      }
    }
    report.parameters.push_back(check);
  }
  if (!options.corrupt_parameter.empty() &&
      std::none_of(report.parameters.begin(), report.parameters.end(),
                   [&](const auto& c) { return c.name == options.corrupt_parameter; })) {
    fail(ErrorKind::kConfig, "no parameter named '" + options.corrupt_parameter + "'");
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace ercfuse
