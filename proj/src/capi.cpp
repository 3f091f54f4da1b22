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

#include "ercfuse/ercfuse.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <new>
#include <optional>
#include <string>

#include <json.hpp>

#include "ercfuse/checkpoint.hpp"
#include "ercfuse/config.hpp"
#include "ercfuse/data.hpp"
#include "ercfuse/errors.hpp"
#include "ercfuse/gradcheck.hpp"
#include "ercfuse/graph.hpp"
#include "ercfuse/trainer.hpp"

struct ercf_dataset {
  ercfuse::Dataset data;
};

struct ercf_config {
  ercfuse::RunConfig run;
};

struct ercf_model {
  ercfuse::Checkpoint checkpoint;
  ercfuse::TrainHistory history;
};

namespace {

thread_local std::string last_error;

ercf_status status_of(ercfuse::ErrorKind kind) {
  using ercfuse::ErrorKind;
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kValidation:
    case ErrorKind::kParse:
    case ErrorKind::kIo:
      return ERCF_USER_ERROR;
    case ErrorKind::kNumerical:
      return ERCF_NUMERICAL;
    default:
      return ERCF_INTERNAL;
  }
}

template <typename F>
ercf_status guard(F&& body) {
  last_error.clear();
  try {
    return body();
  } catch (const ercfuse::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return ERCF_INTERNAL;
}

ercf_status null_argument(const char* name) {
  last_error = std::string("contract: null argument '") + name + "'";
  return ERCF_USER_ERROR;
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

#define ERCF_REQUIRE(p) \
  if ((p) == nullptr) return null_argument(#p)

}  // namespace

extern "C" {

const char* ercf_version(void) { return "1.0.0"; }

const char* ercf_last_error(void) { return last_error.c_str(); }

void ercf_string_free(char* s) { std::free(s); }

void ercf_synth_options_default(ercf_synth_options* options) {
  if (options == nullptr) return;
  const ercfuse::SynthOptions d;
  options->seed = d.seed;
  options->num_conversations = d.num_conversations;
  options->min_length = d.min_length;
  options->max_length = d.max_length;
  options->num_classes = d.num_classes;
  options->num_speakers = d.num_speakers;
  for (int i = 0; i < 3; ++i) options->dims[i] = d.dims[static_cast<std::size_t>(i)];
  options->separation = d.separation;
  options->persistence = d.persistence;
  options->speaker_bias = d.speaker_bias;
  options->mood = d.mood;
  options->ambiguity = d.ambiguity;
  options->noise = d.noise;
}

ercf_status ercf_dataset_synth(const ercf_synth_options* options, ercf_dataset** out) {
  return guard([&] {
    ERCF_REQUIRE(options);
    ERCF_REQUIRE(out);
    ercfuse::SynthOptions so;
    so.seed = options->seed;
    so.num_conversations = options->num_conversations;
    so.min_length = options->min_length;
    so.max_length = options->max_length;
    so.num_classes = options->num_classes;
    so.num_speakers = options->num_speakers;
    so.dims = {options->dims[0], options->dims[1], options->dims[2]};
    so.separation = options->separation;
    so.persistence = options->persistence;
    so.speaker_bias = options->speaker_bias;
    so.mood = options->mood;
    so.ambiguity = options->ambiguity;
    so.noise = options->noise;
    *out = new ercf_dataset{ercfuse::synth_dataset(so)};
    return ERCF_OK;
  });
}

ercf_status ercf_dataset_load(const char* path, ercf_dataset** out) {
  return guard([&] {
    ERCF_REQUIRE(path);
    ERCF_REQUIRE(out);
    *out = new ercf_dataset{ercfuse::load_jsonl(path)};
    return ERCF_OK;
  });
}

ercf_status ercf_dataset_save(const ercf_dataset* dataset, const char* path) {
  return guard([&] {
    ERCF_REQUIRE(dataset);
    ERCF_REQUIRE(path);
    ercfuse::save_jsonl(dataset->data, path);
    return ERCF_OK;
  });
}

ercf_status ercf_dataset_summary(const ercf_dataset* dataset, char** json) {
  return guard([&] {
    ERCF_REQUIRE(dataset);
    ERCF_REQUIRE(json);
    const auto& ds = dataset->data;
    nlohmann::json j = {{"conversations", ds.conversations.size()},
                        {"utterances", ds.num_utterances()},
                        {"classes", ds.meta.num_classes},
                        {"speakers", ds.meta.num_speakers},
                        {"dims", ds.meta.dims},
                        {"histogram", ercfuse::class_histogram(ds)}};
    *json = dup_string(j.dump());
    return ERCF_OK;
  });
}

ercf_status ercf_dataset_split(const ercf_dataset* dataset, double train_fraction, double valid_fraction,
                               ercf_dataset** train, ercf_dataset** valid, ercf_dataset** test) {
  return guard([&] {
    ERCF_REQUIRE(dataset);
    auto split = ercfuse::split_dataset(dataset->data, train_fraction, valid_fraction);
    if (train != nullptr) *train = new ercf_dataset{std::move(split.train)};
    if (valid != nullptr) *valid = new ercf_dataset{std::move(split.valid)};
    if (test != nullptr) *test = new ercf_dataset{std::move(split.test)};
    return ERCF_OK;
  });
}

void ercf_dataset_free(ercf_dataset* dataset) { delete dataset; }

ercf_status ercf_config_new(const char* profile, ercf_config** out) {
  return guard([&] {
    ERCF_REQUIRE(out);
    ercfuse::RunConfig run;
    const std::string name = profile == nullptr ? "" : profile;
    if (name == "iemocap") {
      run.model = ercfuse::iemocap_profile();
    } else if (name == "meld") {
      run.model = ercfuse::meld_profile();
    } else if (!name.empty() && name != "default") {
      ercfuse::fail(ercfuse::ErrorKind::kConfig, "unknown profile '" + name + "' (iemocap, meld)");
    }
    *out = new ercf_config{std::move(run)};
    return ERCF_OK;
  });
}

ercf_status ercf_config_load(ercf_config* config, const char* path) {
  return guard([&] {
    ERCF_REQUIRE(config);
    ERCF_REQUIRE(path);
    config->run = ercfuse::load_run_config(path, config->run);
    return ERCF_OK;
  });
}

ercf_status ercf_config_set(ercf_config* config, const char* key, const char* value) {
  return guard([&] {
    ERCF_REQUIRE(config);
    ERCF_REQUIRE(key);
    ERCF_REQUIRE(value);
    config->run.set(key, value);
    return ERCF_OK;
  });
}

ercf_status ercf_config_get_path(const ercf_config* config, const char* key, char** path) {
  return guard([&] {
    ERCF_REQUIRE(config);
    ERCF_REQUIRE(key);
    ERCF_REQUIRE(path);
    const std::string k = key;
    const auto& r = config->run;
    const std::filesystem::path* p = k == "data"         ? &r.data
                                     : k == "train_data" ? &r.train_data
                                     : k == "valid_data" ? &r.valid_data
                                     : k == "test_data"  ? &r.test_data
                                     : k == "out_dir"    ? &r.out_dir
                                                         : nullptr;
    if (p == nullptr) ercfuse::fail(ercfuse::ErrorKind::kConfig, "unknown path key '" + k + "'");
    *path = dup_string(p->string());
    return ERCF_OK;
  });
}

ercf_status ercf_config_to_json(const ercf_config* config, char** json) {
  return guard([&] {
    ERCF_REQUIRE(config);
    ERCF_REQUIRE(json);
    *json = dup_string(config->run.model.to_json());
    return ERCF_OK;
  });
}

void ercf_config_free(ercf_config* config) { delete config; }

ercf_status ercf_train(const ercf_config* config, const ercf_dataset* train, const ercf_dataset* valid, int verbose,
                       ercf_model** out) {
  return guard([&] {
    ERCF_REQUIRE(config);
    ERCF_REQUIRE(train);
    ERCF_REQUIRE(out);
    ercfuse::TrainOptions options;
    if (verbose != 0) options.log = &std::cerr;
    const ercfuse::Dataset empty{train->data.meta, {}};
    auto result = ercfuse::train(config->run.model, train->data, valid != nullptr ? valid->data : empty, options);
    *out = new ercf_model{std::move(result.checkpoint), std::move(result.history)};
    return ERCF_OK;
  });
}

ercf_status ercf_model_history_csv(const ercf_model* model, char** csv) {
  return guard([&] {
    ERCF_REQUIRE(model);
    ERCF_REQUIRE(csv);
    *csv = dup_string(model->history.to_csv());
    return ERCF_OK;
  });
}

ercf_status ercf_model_info(const ercf_model* model, char** json) {
  return guard([&] {
    ERCF_REQUIRE(model);
    ERCF_REQUIRE(json);
    std::size_t scalars = 0;
    for (const auto& p : model->checkpoint.parameters) scalars += static_cast<std::size_t>(p.tensor.size());
    nlohmann::json j = {{"version", model->checkpoint.version},
                        {"best_epoch", model->checkpoint.best_epoch},
                        {"best_valid_wa_f1", model->checkpoint.best_valid_metric},
                        {"epochs_run", model->history.epochs.size()},
                        {"num_parameters", model->checkpoint.parameters.size()},
                        {"num_scalars", scalars},
                        {"config", nlohmann::json::parse(model->checkpoint.config.to_json())}};
    *json = dup_string(j.dump());
    return ERCF_OK;
  });
}

ercf_status ercf_model_save(const ercf_model* model, const char* path) {
  return guard([&] {
    ERCF_REQUIRE(model);
    ERCF_REQUIRE(path);
    ercfuse::save_checkpoint(model->checkpoint, path);
    return ERCF_OK;
  });
}

ercf_status ercf_model_load(const char* path, ercf_model** out) {
  return guard([&] {
    ERCF_REQUIRE(path);
    ERCF_REQUIRE(out);
    *out = new ercf_model{ercfuse::load_checkpoint(path), {}};
    return ERCF_OK;
  });
}

ercf_status ercf_model_evaluate(const ercf_model* model, const ercf_dataset* dataset, char** report_json,
                                char** confusion_csv) {
  return guard([&] {
    ERCF_REQUIRE(model);
    ERCF_REQUIRE(dataset);
    const auto report = ercfuse::evaluate_checkpoint(model->checkpoint, dataset->data);
    char* json = report_json != nullptr ? dup_string(report.to_json()) : nullptr;
    if (confusion_csv != nullptr) {
      try {
        *confusion_csv = dup_string(report.confusion_csv(dataset->data.meta.class_names));
      } catch (...) {
        std::free(json);
        throw;
      }
    }
    if (report_json != nullptr) *report_json = json;
    return ERCF_OK;
  });
}

void ercf_model_free(ercf_model* model) { delete model; }

ercf_status ercf_sweep(const ercf_config* config, const char* axis, const char* const* values, size_t num_values,
                       const ercf_dataset* train, const ercf_dataset* valid, const ercf_dataset* test, int threads,
                       char** csv) {
  return guard([&] {
    ERCF_REQUIRE(config);
    ERCF_REQUIRE(axis);
    ERCF_REQUIRE(train);
    ERCF_REQUIRE(csv);
    if (num_values > 0) ERCF_REQUIRE(values);
    std::vector<std::string> vals;
    for (size_t i = 0; i < num_values; ++i) {
      if (values[i] == nullptr) return null_argument("values[i]");
      vals.emplace_back(values[i]);
    }
    const auto parsed = ercfuse::parse_sweep_axis(axis);
    const ercfuse::Dataset empty{train->data.meta, {}};
    const auto rows = ercfuse::ablation_sweep(config->run.model, parsed, vals, train->data,
                                              valid != nullptr ? valid->data : empty,
                                              test != nullptr ? test->data : empty, threads);
    *csv = dup_string(ercfuse::sweep_csv(parsed, rows));
    return ERCF_OK;
  });
}

void ercf_gradcheck_options_default(ercf_gradcheck_options* options) {
  if (options == nullptr) return;
  const ercfuse::GradcheckOptions d;
  options->seed = d.seed;
  options->utterances = d.utterances;
  options->speakers = d.speakers;
  options->classes = d.classes;
  options->dim = d.dim;
  options->heads = d.heads;
  options->mdgat_layers = d.mdgat_layers;
  options->mpcat_layers = d.mpcat_layers;
  options->window_past = d.window_past;
  options->window_future = d.window_future;
  options->update_rule = "sum_product";
  options->step = d.step;
  options->tolerance = d.tolerance;
  options->corrupt_parameter = nullptr;
}

ercf_status ercf_gradcheck(const ercf_gradcheck_options* options, char** report_json) {
  return guard([&] {
    ERCF_REQUIRE(options);
    ERCF_REQUIRE(report_json);
    ercfuse::GradcheckOptions o;
    o.seed = options->seed;
    o.utterances = options->utterances;
    o.speakers = options->speakers;
    o.classes = options->classes;
    o.dim = options->dim;
    o.heads = options->heads;
    o.mdgat_layers = options->mdgat_layers;
    o.mpcat_layers = options->mpcat_layers;
    o.window_past = options->window_past;
    o.window_future = options->window_future;
    if (options->update_rule != nullptr) o.rule = ercfuse::parse_update_rule(options->update_rule);
    o.step = options->step;
    o.tolerance = options->tolerance;
    if (options->corrupt_parameter != nullptr) o.corrupt_parameter = options->corrupt_parameter;
    const auto report = ercfuse::run_gradcheck(o);
    *report_json = dup_string(report.to_json());
    if (!report.passed()) {
      std::string names;
      for (const auto& n : report.failures()) names += (names.empty() ? "" : ", ") + n;
      last_error = "gradient check failed for: " + names;
      return ERCF_CHECK_FAILED;
    }
    return ERCF_OK;
  });
}

ercf_status ercf_inspect_graph(int64_t m, int64_t past, int64_t future, char** json) {
  return guard([&] {
    ERCF_REQUIRE(json);
    if (m < 1 || past < 0 || future < 0) {
      ercfuse::fail(ercfuse::ErrorKind::kConfig, "inspect-graph needs m >= 1 and window sizes >= 0");
    }
    const ercfuse::ConvGraph graph(m, past, future);
    *json = dup_string(graph.to_json());
    return ERCF_OK;
  });
}

}  // extern "C"
