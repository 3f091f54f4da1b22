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

#include "ercfuse/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "ercfuse/errors.hpp"

namespace ercfuse {

namespace {

constexpr std::array<char, 8> kMagic = {'E', 'R', 'C', 'F', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) fail(ErrorKind::kParse, "truncated checkpoint");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

nlohmann::json meta_json(const DatasetMeta& m) {
  return {{"c", m.num_classes}, {"n", m.num_speakers}, {"dims", m.dims}, {"classes", m.class_names}};
}

DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta m;
  m.num_classes = j.at("c");
  m.num_speakers = j.at("n");
  m.dims = j.at("dims").get<std::array<int, 3>>();
  m.class_names = j.at("classes").get<std::vector<std::string>>();
  return m;
}

}  // namespace

Checkpoint Checkpoint::from_model(const Model& model) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.meta = model.meta();
  for (const auto& p : model.parameters()) ckpt.parameters.push_back({p.name, p.tensor.clone()});
  return ckpt;
}

Model Checkpoint::to_model() const {
  Model model(config, meta, 0);
  auto& params = model.parameters();
  if (params.size() != parameters.size()) {
    fail(ErrorKind::kState, "checkpoint holds " + std::to_string(parameters.size()) + " parameters, model expects " +
                                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = parameters[i];
    auto& dst = params[i];
    if (src.name != dst.name || src.tensor.rows() != dst.tensor.rows() || src.tensor.cols() != dst.tensor.cols()) {
      fail(ErrorKind::kState, "checkpoint parameter '" + src.name + "' " + src.tensor.shape_string() +
                                  " does not match model parameter '" + dst.name + "' " + dst.tensor.shape_string());
    }
    std::copy(src.tensor.values().begin(), src.tensor.values().end(), dst.tensor.values().begin());
  }
  return model;
}

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  const nlohmann::json header = {{"config", nlohmann::json::parse(ckpt.config.to_json())},
                                 {"meta", meta_json(ckpt.meta)},
                                 {"rng_state", ckpt.rng_state},
                                 {"best_valid_metric", ckpt.best_valid_metric},
                                 {"best_epoch", ckpt.best_epoch}};
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, ckpt.version);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(out, ckpt.parameters.size());
  for (const auto& p : ckpt.parameters) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.tensor.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.tensor.cols()));
    for (double v : p.tensor.values()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) fail(ErrorKind::kParse, "not a checkpoint file");
  Checkpoint ckpt;
  ckpt.version = get<std::uint32_t>(in);
  if (ckpt.version != Checkpoint::kVersion) {
    fail(ErrorKind::kParse, "unsupported checkpoint version " + std::to_string(ckpt.version));
  }
  const auto text_len = get<std::uint64_t>(in);
  if (text_len > (1ULL << 26)) fail(ErrorKind::kParse, "checkpoint header too large");
  std::string text(text_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(text_len))) fail(ErrorKind::kParse, "truncated checkpoint");
  try {
    const auto header = nlohmann::json::parse(text);
    ckpt.config = ModelConfig::from_json(header.at("config").dump());
    ckpt.meta = meta_from_json(header.at("meta"));
    ckpt.rng_state = header.at("rng_state").get<std::string>();
    ckpt.best_valid_metric = header.at("best_valid_metric");
    ckpt.best_epoch = header.at("best_epoch");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("checkpoint header: ") + e.what());
  }
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = get<std::uint32_t>(in);
    if (name_len > 4096) fail(ErrorKind::kParse, "checkpoint parameter name too long");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) fail(ErrorKind::kParse, "truncated checkpoint");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows > (1ULL << 24) || cols > (1ULL << 24)) fail(ErrorKind::kParse, "implausible parameter shape for " + name);
    std::vector<double> values(rows * cols);
    for (double& v : values) v = std::bit_cast<double>(get<std::uint64_t>(in));
    ckpt.parameters.push_back({std::move(name), Tensor(static_cast<Index>(rows), static_cast<Index>(cols), std::move(values))});
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  write_checkpoint(checkpoint, out);
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace ercfuse
