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

#include "ercfuse/config.hpp"

#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ercfuse/errors.hpp"

namespace ercfuse {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) fail(ErrorKind::kConfig, "invalid value '" + text + "' for " + key);
  return value;
}

}  // namespace

ModalitySet ModalitySet::parse(const std::string& letters) {
  ModalitySet set;
  for (char ch : letters) {
    switch (ch) {
      case 't': set.insert(Modality::kText); break;
      case 'a': set.insert(Modality::kAudio); break;
      case 'v': set.insert(Modality::kVisual); break;
      default: fail(ErrorKind::kConfig, "unknown modality letter '" + std::string(1, ch) + "' (use t, a, v)");
    }
  }
  return set;
}

std::size_t ModalitySet::size() const { return members().size(); }

std::vector<Modality> ModalitySet::members() const {
  std::vector<Modality> out;
  for (auto m : kAllModalities)
    if (contains(m)) out.push_back(m);
  return out;
}

std::string ModalitySet::to_string() const {
  std::string s;
  if (contains(Modality::kText)) s += 't';
  if (contains(Modality::kAudio)) s += 'a';
  if (contains(Modality::kVisual)) s += 'v';
  return s;
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kConfig, what); };
  if (dim < 1) bad("dim must be >= 1");
  if (heads < 1) bad("heads must be >= 1");
  if (dim % heads != 0) bad("dim must be divisible by heads");
  if (mdgat_layers < 0) bad("mdgat_layers must be >= 0");
  if (mpcat_layers < 0) bad("mpcat_layers must be >= 0");
  if (window_past < 0 || window_future < 0) bad("window sizes must be >= 0");
  if (!(speaker_lambda >= 0.0)) bad("speaker_lambda must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (!(lr >= 0.0)) bad("lr must be >= 0");
  if (!(weight_decay >= 0.0)) bad("weight_decay must be >= 0");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (max_epochs < 0) bad("max_epochs must be >= 0");
  if (patience < 1) bad("patience must be >= 1");
  if (modalities.size() < 2) bad("at least two modalities are required");
  if (message_dim < 0 || ff_dim < 0 || classifier_hidden < 0 || text_hidden < 0) bad("sizes must be >= 0");
  if (update_rule == UpdateRule::kSumProduct && resolved_message_dim() != dim) {
    bad("sum_product update requires message_dim == dim (" + std::to_string(resolved_message_dim()) + " != " +
        std::to_string(dim) + ")");
  }
  if (!(grad_clip >= 0.0)) bad("grad_clip must be >= 0");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) bad("leaky_slope must lie in [0, 1)");
  if (!(norm_eps > 0.0)) bad("norm_eps must be > 0");
}

void ModelConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "dim") dim = parse_number<int>(key, value);
  else if (key == "heads") heads = parse_number<int>(key, value);
  else if (key == "mdgat_layers") mdgat_layers = parse_number<int>(key, value);
  else if (key == "mpcat_layers") mpcat_layers = parse_number<int>(key, value);
  else if (key == "window_past") window_past = parse_number<int>(key, value);
  else if (key == "window_future") window_future = parse_number<int>(key, value);
  else if (key == "speaker_lambda") speaker_lambda = parse_number<double>(key, value);
  else if (key == "update_rule") update_rule = parse_update_rule(value);
  else if (key == "dropout") dropout = parse_number<double>(key, value);
  else if (key == "lr") lr = parse_number<double>(key, value);
  else if (key == "weight_decay") weight_decay = parse_number<double>(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "max_epochs") max_epochs = parse_number<int>(key, value);
  else if (key == "patience") patience = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "modalities") modalities = ModalitySet::parse(value);
  else if (key == "message_dim") message_dim = parse_number<int>(key, value);
  else if (key == "ff_dim") ff_dim = parse_number<int>(key, value);
  else if (key == "classifier_hidden") classifier_hidden = parse_number<int>(key, value);
  else if (key == "text_hidden") text_hidden = parse_number<int>(key, value);
  else if (key == "grad_clip") grad_clip = parse_number<double>(key, value);
  else if (key == "leaky_slope") leaky_slope = parse_number<double>(key, value);
  else if (key == "norm_eps") norm_eps = parse_number<double>(key, value);
  else fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j = {{"dim", dim},
                      {"heads", heads},
                      {"mdgat_layers", mdgat_layers},
                      {"mpcat_layers", mpcat_layers},
                      {"window_past", window_past},
                      {"window_future", window_future},
                      {"speaker_lambda", speaker_lambda},
                      {"update_rule", ercfuse::to_string(update_rule)},
                      {"dropout", dropout},
                      {"lr", lr},
                      {"weight_decay", weight_decay},
                      {"batch_size", batch_size},
                      {"max_epochs", max_epochs},
                      {"patience", patience},
                      {"seed", seed},
                      {"modalities", modalities.to_string()},
                      {"message_dim", message_dim},
                      {"ff_dim", ff_dim},
                      {"classifier_hidden", classifier_hidden},
                      {"text_hidden", text_hidden},
                      {"grad_clip", grad_clip},
                      {"leaky_slope", leaky_slope},
                      {"norm_eps", norm_eps}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("config JSON: ") + e.what());
  }
  ModelConfig c;
  try {
    c.dim = j.at("dim");
    c.heads = j.at("heads");
    c.mdgat_layers = j.at("mdgat_layers");
    c.mpcat_layers = j.at("mpcat_layers");
    c.window_past = j.at("window_past");
    c.window_future = j.at("window_future");
    c.speaker_lambda = j.at("speaker_lambda");
    c.update_rule = parse_update_rule(j.at("update_rule").get<std::string>());
    c.dropout = j.at("dropout");
    c.lr = j.at("lr");
    c.weight_decay = j.at("weight_decay");
    c.batch_size = j.at("batch_size");
    c.max_epochs = j.at("max_epochs");
    c.patience = j.at("patience");
    c.seed = j.at("seed");
    c.modalities = ModalitySet::parse(j.at("modalities").get<std::string>());
    c.message_dim = j.at("message_dim");
    c.ff_dim = j.at("ff_dim");
    c.classifier_hidden = j.at("classifier_hidden");
    c.text_hidden = j.at("text_hidden");
    c.grad_clip = j.at("grad_clip");
    c.leaky_slope = j.at("leaky_slope");
    c.norm_eps = j.at("norm_eps");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("config JSON: ") + e.what());
  }
  return c;
}

ModelConfig iemocap_profile() {
  ModelConfig c;
  c.mdgat_layers = 3;
  c.mpcat_layers = 4;
  c.speaker_lambda = 1.6;
  c.lr = 1e-5;
  c.batch_size = 8;
  return c;
}

ModelConfig meld_profile() {
  ModelConfig c;
  c.mdgat_layers = 2;
  c.mpcat_layers = 2;
  c.speaker_lambda = 0.6;
  c.lr = 1e-5;
  c.batch_size = 32;
  return c;
}

void RunConfig::set(const std::string& key, const std::string& raw, const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& v) {
    std::filesystem::path p(trim(v));
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return p.lexically_normal();
  };
  if (key == "data") data = resolve(raw);
  else if (key == "train_data") train_data = resolve(raw);
  else if (key == "valid_data") valid_data = resolve(raw);
  else if (key == "test_data") test_data = resolve(raw);
  else if (key == "out_dir") out_dir = resolve(raw);
  else model.set(key, raw);
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  const auto dir = std::filesystem::absolute(path).parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kConfig, path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      base.set(trim(line.substr(0, eq)), line.substr(eq + 1), dir);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

std::string to_key_value(const ModelConfig& config) {
  const auto j = nlohmann::json::parse(config.to_json());
  std::ostringstream os;
  for (const auto& [key, value] : j.items()) {
    os << key << " = " << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
  }
  return os.str();
}

}  // namespace ercfuse
