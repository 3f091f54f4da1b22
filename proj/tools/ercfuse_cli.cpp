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

// Command-line front end. Links only the C interface.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ercfuse/ercfuse.h"

namespace fs = std::filesystem;

namespace {

struct Failure {
  ercf_status status;
};

void check(ercf_status status) {
  if (status != ERCF_OK) throw Failure{status};
}

std::string take(char* s) {
  std::string out = s == nullptr ? "" : s;
  ercf_string_free(s);
  return out;
}

struct DatasetDeleter {
  void operator()(ercf_dataset* d) const { ercf_dataset_free(d); }
};
struct ConfigDeleter {
  void operator()(ercf_config* c) const { ercf_config_free(c); }
};
struct ModelDeleter {
  void operator()(ercf_model* m) const { ercf_model_free(m); }
};
using DatasetPtr = std::unique_ptr<ercf_dataset, DatasetDeleter>;
using ConfigPtr = std::unique_ptr<ercf_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<ercf_model, ModelDeleter>;

DatasetPtr load_dataset(const std::string& path) {
  ercf_dataset* d = nullptr;
  check(ercf_dataset_load(path.c_str(), &d));
  return DatasetPtr(d);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error: io: cannot write " << path.string() << '\n';
    throw Failure{ERCF_USER_ERROR};
  }
}

std::string config_path(const ercf_config* config, const char* key) {
  char* s = nullptr;
  check(ercf_config_get_path(config, key, &s));
  return take(s);
}

// Options shared by train and sweep.
struct RunFlags {
  std::string profile;
  std::string config_file;
  std::vector<std::string> sets;
  std::string data, train, valid, test, out;
  int max_epochs = 0;
  long long seed = -1;

  void add(CLI::App* cmd) {
    cmd->add_option("--profile", profile, "Hyperparameter profile: iemocap or meld");
    cmd->add_option("--config", config_file, "key = value config file");
    cmd->add_option("--set", sets, "Override a config key, as key=value")->take_all();
    cmd->add_option("--data", data, "Dataset split 80/10/10 by conversation");
    cmd->add_option("--train", train, "Training set");
    cmd->add_option("--valid", valid, "Validation set");
    cmd->add_option("--test", test, "Test set");
    cmd->add_option("--max-epochs", max_epochs, "Override max_epochs");
    cmd->add_option("--seed", seed, "Override seed");
  }

  ConfigPtr build() const {
    ercf_config* raw = nullptr;
    check(ercf_config_new(profile.empty() ? nullptr : profile.c_str(), &raw));
    ConfigPtr config(raw);
    if (!config_file.empty()) check(ercf_config_load(config.get(), config_file.c_str()));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
        throw Failure{ERCF_USER_ERROR};
      }
      check(ercf_config_set(config.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    auto set_path = [&](const char* key, const std::string& value) {
      if (!value.empty()) check(ercf_config_set(config.get(), key, fs::absolute(value).string().c_str()));
    };
    set_path("data", data);
    set_path("train_data", train);
    set_path("valid_data", valid);
    set_path("test_data", test);
    set_path("out_dir", out);
    if (max_epochs > 0) check(ercf_config_set(config.get(), "max_epochs", std::to_string(max_epochs).c_str()));
    if (seed >= 0) check(ercf_config_set(config.get(), "seed", std::to_string(seed).c_str()));
    return config;
  }
};

struct Splits {
  DatasetPtr train, valid, test;
};

Splits load_splits(const ercf_config* config) {
  Splits s;
  const auto data = config_path(config, "data");
  const auto train = config_path(config, "train_data");
  if (!train.empty()) {
    s.train = load_dataset(train);
    const auto valid = config_path(config, "valid_data");
    const auto test = config_path(config, "test_data");
    if (!valid.empty()) s.valid = load_dataset(valid);
    if (!test.empty()) s.test = load_dataset(test);
  } else if (!data.empty()) {
    const auto all = load_dataset(data);
    ercf_dataset *tr = nullptr, *va = nullptr, *te = nullptr;
    check(ercf_dataset_split(all.get(), 0.8, 0.1, &tr, &va, &te));
    s.train.reset(tr);
    s.valid.reset(va);
    s.test.reset(te);
  } else {
    std::cerr << "error: config: no data given (--data or --train)\n";
    throw Failure{ERCF_USER_ERROR};
  }
  return s;
}

nlohmann::json evaluate_json(const ercf_model* model, const ercf_dataset* dataset) {
  char* report = nullptr;
  check(ercf_model_evaluate(model, dataset, &report, nullptr));
  return nlohmann::json::parse(take(report));
}

bool has_utterances(const ercf_dataset* d) {
  if (d == nullptr) return false;
  char* s = nullptr;
  check(ercf_dataset_summary(d, &s));
  return nlohmann::json::parse(take(s)).at("utterances").get<long long>() > 0;
}

int run_synth(const ercf_synth_options& options, const std::string& out) {
  ercf_dataset* raw = nullptr;
  check(ercf_dataset_synth(&options, &raw));
  DatasetPtr ds(raw);
  check(ercf_dataset_save(ds.get(), out.c_str()));
  char* summary = nullptr;
  check(ercf_dataset_summary(ds.get(), &summary));
  auto j = nlohmann::json::parse(take(summary));
  j["path"] = out;
  std::cout << j.dump() << '\n';
  std::cerr << "wrote " << j["conversations"] << " conversations, " << j["utterances"] << " utterances, histogram "
            << j["histogram"].dump() << " to " << out << '\n';
  return 0;
}

int run_train(const RunFlags& flags, bool quiet) {
  const auto config = flags.build();
  auto out = config_path(config.get(), "out_dir");
  if (out.empty()) {
    std::cerr << "error: config: no output directory (--out or out_dir)\n";
    throw Failure{ERCF_USER_ERROR};
  }
  const auto splits = load_splits(config.get());
  ercf_model* raw = nullptr;
  check(ercf_train(config.get(), splits.train.get(), has_utterances(splits.valid.get()) ? splits.valid.get() : nullptr,
                   quiet ? 0 : 1, &raw));
  ModelPtr model(raw);

  // Outputs are written only once training succeeded.
  fs::create_directories(out);
  check(ercf_model_save(model.get(), (fs::path(out) / "checkpoint.ercf").string().c_str()));
  char* history = nullptr;
  check(ercf_model_history_csv(model.get(), &history));
  write_file(fs::path(out) / "history.csv", take(history));

  char* info = nullptr;
  check(ercf_model_info(model.get(), &info));
  auto result = nlohmann::json::parse(take(info));
  result.erase("config");
  result["out_dir"] = out;
  result["train"] = evaluate_json(model.get(), splits.train.get());
  if (has_utterances(splits.valid.get())) result["valid"] = evaluate_json(model.get(), splits.valid.get());
  if (has_utterances(splits.test.get())) result["test"] = evaluate_json(model.get(), splits.test.get());
  write_file(fs::path(out) / "metrics.json", result.dump(2) + "\n");
  std::cout << result.dump() << '\n';
  std::cerr << "trained " << result["epochs_run"] << " epochs, best epoch " << result["best_epoch"]
            << ", train acc " << result["train"]["accuracy"] << '\n';
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data, const std::string& confusion) {
  const auto ds = load_dataset(data);
  ercf_model* raw = nullptr;
  check(ercf_model_load(checkpoint.c_str(), &raw));
  ModelPtr model(raw);
  char* report = nullptr;
  char* csv = nullptr;
  check(ercf_model_evaluate(model.get(), ds.get(), &report, &csv));
  const auto json = take(report);
  const auto matrix = take(csv);
  if (!confusion.empty()) write_file(confusion, matrix);
  std::cout << json << '\n';
  const auto j = nlohmann::json::parse(json);
  std::cerr << "accuracy " << j["accuracy"] << ", weighted F1 " << j["weighted_f1"] << '\n';
  return 0;
}

int run_sweep(const RunFlags& flags, const std::string& axis, const std::vector<std::string>& values,
              const std::string& csv_out) {
  const auto config = flags.build();
  const auto splits = load_splits(config.get());
  int threads = 1;
  if (const char* env = std::getenv("ERCF_SWEEP_THREADS"); env != nullptr && *env != '\0') threads = std::atoi(env);
  std::vector<const char*> raw_values;
  for (const auto& v : values) raw_values.push_back(v.c_str());
  char* csv = nullptr;
  check(ercf_sweep(config.get(), axis.c_str(), raw_values.data(), raw_values.size(), splits.train.get(),
                   splits.valid.get(), splits.test.get(), threads, &csv));
  const auto table = take(csv);
  if (!csv_out.empty()) write_file(csv_out, table);

  std::istringstream lines(table);
  std::string line;
  std::getline(lines, line);
  std::vector<std::string> header;
  for (std::istringstream h(line); std::getline(h, line, ',');) header.push_back(line);
  while (std::getline(lines, line)) {
    nlohmann::json row;
    std::istringstream cells(line);
    std::string cell;
    for (std::size_t i = 0; i < header.size() && std::getline(cells, cell, ','); ++i) {
      if (i >= 2) {
        row[header[i]] = std::stod(cell);
      } else {
        row[header[i]] = cell;
      }
    }
    std::cout << row.dump() << '\n';
  }
  std::cerr << "swept " << values.size() << " values of " << axis << '\n';
  return 0;
}

int run_gradcheck(const ercf_gradcheck_options& options) {
  char* report = nullptr;
  const ercf_status status = ercf_gradcheck(&options, &report);
  if (report == nullptr) throw Failure{status};
  const auto text = take(report);
  std::cout << text << '\n';
  const auto j = nlohmann::json::parse(text);
  for (const auto& [module, err] : j["modules"].items()) std::cerr << module << ": worst rel. err " << err << '\n';
  if (status == ERCF_OK) {
    std::cerr << "PASS worst rel. err " << j["worst_rel_error"] << " over " << j["num_coordinates"] << " coordinates\n";
  } else {
    std::cerr << "FAIL\n";
    for (const auto& f : j["failures"])
      std::cerr << "  " << f["name"].get<std::string>() << " rel. err " << f["rel_error"] << '\n';
  }
  return status;
}

int run_inspect(long long m, long long j, long long k) {
  char* json = nullptr;
  check(ercf_inspect_graph(m, j, k, &json));
  const auto text = take(json);
  std::cout << text << '\n';
  std::cerr << nlohmann::json::parse(text)["num_edges"] << " edges\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage multimodal graph/cross-modal attention models for emotion recognition in conversation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ercf_version()));

  auto* synth = app.add_subcommand("synth", "Generate a synthetic tri-modal conversation corpus");
  ercf_synth_options so;
  ercf_synth_options_default(&so);
  std::string synth_out;
  std::vector<int> dims;
  synth->add_option("--seed", so.seed);
  synth->add_option("--out", synth_out, "Output JSONL file")->required();
  synth->add_option("--convs", so.num_conversations);
  synth->add_option("--min-len", so.min_length);
  synth->add_option("--max-len", so.max_length);
  synth->add_option("--classes", so.num_classes);
  synth->add_option("--speakers", so.num_speakers);
  synth->add_option("--dims", dims, "Text, audio and visual feature widths")->expected(3)->delimiter(',');
  synth->add_option("--separation", so.separation);
  synth->add_option("--persistence", so.persistence);
  synth->add_option("--speaker-bias", so.speaker_bias);
  synth->add_option("--mood", so.mood);
  synth->add_option("--ambiguity", so.ambiguity);
  synth->add_option("--noise", so.noise);

  auto* train = app.add_subcommand("train", "Train a model; writes checkpoint.ercf, history.csv, metrics.json");
  RunFlags train_flags;
  train_flags.add(train);
  train->add_option("--out", train_flags.out, "Output directory");
  bool quiet = false;
  train->add_flag("--quiet", quiet, "No per-epoch progress");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ckpt, eval_data, confusion;
  eval->add_option("--checkpoint", ckpt)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--confusion", confusion, "Write the confusion matrix as CSV");

  auto* sweep = app.add_subcommand("sweep", "Train one model per value of an ablation axis");
  RunFlags sweep_flags;
  sweep_flags.add(sweep);
  std::string axis, sweep_csv;
  std::vector<std::string> values;
  sweep->add_option("--axis", axis, "windows, layers, lambda, update_rule or modalities")->required();
  sweep->add_option("--values", values, "Comma-separated values, e.g. 0:0,2:2,4:4")->required()->delimiter(',');
  sweep->add_option("--csv", sweep_csv, "Write the result table as CSV");

  auto* gc = app.add_subcommand("gradcheck", "Compare backprop with finite differences on a tiny model");
  ercf_gradcheck_options go;
  ercf_gradcheck_options_default(&go);
  std::string rule = go.update_rule;
  std::string corrupt;
  gc->add_option("--seed", go.seed);
  gc->add_option("--utterances", go.utterances);
  gc->add_option("--speakers", go.speakers);
  gc->add_option("--classes", go.classes);
  gc->add_option("--dim", go.dim);
  gc->add_option("--heads", go.heads);
  gc->add_option("--graph-layers", go.mdgat_layers);
  gc->add_option("--cross-layers", go.mpcat_layers);
  gc->add_option("--j", go.window_past, "Past window");
  gc->add_option("--k", go.window_future, "Future window");
  gc->add_option("--rule", rule, "sum, concat or sum_product");
  gc->add_option("--step", go.step);
  gc->add_option("--tolerance", go.tolerance);
  gc->add_option("--corrupt", corrupt, "Test hook: perturb this parameter's analytic gradient");

  auto* inspect = app.add_subcommand("inspect-graph", "Print the conversation graph for m utterances");
  long long m = 1, j = 0, k = 0;
  inspect->add_option("--m", m)->required();
  inspect->add_option("--j", j, "Past window");
  inspect->add_option("--k", k, "Future window");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ERCF_USER_ERROR;
  }

  try {
    if (*synth) {
      if (!dims.empty())
        for (int i = 0; i < 3; ++i) so.dims[i] = dims[static_cast<std::size_t>(i)];
      return run_synth(so, synth_out);
    }
    if (*train) return run_train(train_flags, quiet);
    if (*eval) return run_eval(ckpt, eval_data, confusion);
    if (*sweep) return run_sweep(sweep_flags, axis, values, sweep_csv);
    if (*gc) {
      go.update_rule = rule.c_str();
      go.corrupt_parameter = corrupt.empty() ? nullptr : corrupt.c_str();
      return run_gradcheck(go);
    }
    if (*inspect) return run_inspect(m, j, k);
  } catch (const Failure& f) {
    const char* msg = ercf_last_error();
    if (msg != nullptr && *msg != '\0') std::cerr << "error: " << msg << '\n';
    return f.status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ERCF_USER_ERROR;
  }
  return 0;
}
