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

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "ercfuse/data.hpp"
#include "ercfuse/errors.hpp"
#include "ercfuse/model.hpp"
#include "ercfuse/trainer.hpp"
#include "../support.hpp"

using namespace ercfuse;

namespace {

std::string feature_list(int n, double v) {
  std::string s = "[";
  for (int i = 0; i < n; ++i) s += (i ? "," : "") + std::to_string(v + i);
  return s + "]";
}

std::string utterance_json(int spk, int y, int d) {
  const auto f = feature_list(d, 0.5);
  return "{\"spk\":" + std::to_string(spk) + ",\"y\":" + std::to_string(y) + ",\"t\":" + f + ",\"a\":" + f +
         ",\"v\":" + f + "}";
}

Error parse_error(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_jsonl(in);
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected a parse failure");
  return Error(ErrorKind::kContract, "");
}

}  // namespace

TEST_CASE("minimal well-formed file") {
  std::istringstream in("{\"c\":6,\"n\":2,\"dims\":[100,100,100]}\n{\"id\":\"d0\",\"utts\":[" +
                        utterance_json(0, 3, 100) + "," + utterance_json(1, 5, 100) + "]}\n");
  const Dataset ds = parse_jsonl(in);
  CHECK(ds.meta.num_classes == 6);
  CHECK(ds.meta.num_speakers == 2);
  CHECK(ds.meta.dims == std::array<int, 3>{100, 100, 100});
  REQUIRE(ds.conversations.size() == 1);
  CHECK(ds.conversations[0].id == "d0");
  CHECK(ds.conversations[0].size() == 2);
  CHECK(ds.conversations[0].utterances[1].label == 5);
  CHECK(ds.conversations[0].utterances[1].feature(Modality::kAudio)[99] == 99.5);
}

TEST_CASE("label outside the class range is a validation error naming the conversation") {
  const auto e = parse_error("{\"c\":6,\"n\":2,\"dims\":[2,2,2]}\n{\"id\":\"bad_conv\",\"utts\":[" +
                             utterance_json(0, 6, 2) + "]}\n");
  CHECK(e.kind() == ErrorKind::kValidation);
  CHECK(std::string(e.what()).find("bad_conv") != std::string::npos);
}

TEST_CASE("other validation failures") {
  CHECK(parse_error("{\"c\":2,\"n\":1,\"dims\":[2,2,2]}\n{\"id\":\"s\",\"utts\":[" + utterance_json(1, 0, 2) + "]}")
            .kind() == ErrorKind::kValidation);
  CHECK(parse_error("{\"c\":2,\"n\":1,\"dims\":[3,2,2]}\n{\"id\":\"w\",\"utts\":[" + utterance_json(0, 0, 2) + "]}")
            .kind() == ErrorKind::kValidation);
  CHECK(parse_error("{\"c\":2,\"n\":1,\"dims\":[2,2,2]}\n{\"id\":\"e\",\"utts\":[]}").kind() ==
        ErrorKind::kValidation);

  Dataset ds = synth_dataset({});
  ds.conversations[3].utterances[2].features[1][0] = std::nan("");
  try {
    validate(ds);
    FAIL("NaN accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
    CHECK(std::string(e.what()).find(ds.conversations[3].id) != std::string::npos);
  }
  ds.conversations[3].utterances[2].features[1][0] = INFINITY;
  CHECK_THROWS_AS(validate(ds), Error);
}

TEST_CASE("malformed lines report their line number") {
  const auto e = parse_error("{\"c\":2,\"n\":1,\"dims\":[2,2,2]}\n{\"id\":\"ok\",\"utts\":[" +
                             utterance_json(0, 0, 2) + "]}\n{\"id\": oops}\n");
  CHECK(e.kind() == ErrorKind::kParse);
  CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  CHECK(parse_error("").kind() == ErrorKind::kParse);
  CHECK(parse_error("{\"c\":2,\"n\":1,\"dims\":[2,2,2]}\n{\"id\":\"x\"}").kind() == ErrorKind::kParse);
}

TEST_CASE("missing file is an IO error") {
  try {
    load_jsonl("/nonexistent/dir/data.jsonl");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}

TEST_CASE("save then load is the identity") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthOptions o;
    o.seed = seed;
    o.num_conversations = 6;
    o.num_speakers = 3;
    o.dims = {5, 4, 3};
    const Dataset ds = synth_dataset(o);
    std::stringstream buffer;
    write_jsonl(ds, buffer);
    CHECK(parse_jsonl(buffer) == ds);
  }
  const auto path = std::filesystem::temp_directory_path() / "ercfuse_roundtrip.jsonl";
  const Dataset ds = synth_dataset({});
  save_jsonl(ds, path);
  CHECK(load_jsonl(path) == ds);
  std::filesystem::remove(path);
}

TEST_CASE("synthetic generator is deterministic") {
  SynthOptions o;
  o.seed = 42;
  CHECK(synth_dataset(o) == synth_dataset(o));
  SynthOptions p = o;
  p.seed = 43;
  CHECK_FALSE(synth_dataset(o) == synth_dataset(p));
  const Dataset ds = synth_dataset(o);
  CHECK(ds.conversations.size() == 50);
  for (const auto& c : ds.conversations) {
    CHECK(c.size() >= 8);
    CHECK(c.size() <= 12);
  }
  validate(ds);
}

TEST_CASE("synthetic prototypes sit `separation` apart") {
  // With no noise every non-ambiguous feature is exactly its class prototype.
  SynthOptions o;
  o.noise = 0.0;
  o.separation = 6.0;
  const Dataset ds = synth_dataset(o);
  for (std::size_t m = 0; m < 3; ++m) {
    std::vector<const std::vector<double>*> proto(4, nullptr);
    for (const auto& c : ds.conversations)
      for (const auto& u : c.utterances) proto[static_cast<std::size_t>(u.label)] = &u.features[m];
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = a + 1; b < 4; ++b) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < proto[a]->size(); ++i) d2 += std::pow((*proto[a])[i] - (*proto[b])[i], 2);
        CHECK(std::sqrt(d2) == doctest::Approx(6.0).epsilon(1e-12));
      }
  }
}

TEST_CASE("label transitions follow the persistence chain") {
  // Oracle: T = p·I + (1 − p)·1·πᵀ with π the fresh-label distribution.
  for (double bias : {0.0, 0.5}) {
    SynthOptions o;
    o.seed = 9;
    o.num_conversations = 1200;
    o.persistence = 0.6;
    o.speaker_bias = bias;
    o.dims = {1, 1, 1};
    const Dataset ds = synth_dataset(o);
    const auto pi = fresh_label_distribution(o);
    std::vector<std::vector<double>> counts(4, std::vector<double>(4, 0.0));
    std::size_t transitions = 0;
    for (const auto& c : ds.conversations)
      for (std::size_t i = 1; i < c.size(); ++i) {
        counts[static_cast<std::size_t>(c.utterances[i - 1].label)][static_cast<std::size_t>(c.utterances[i].label)]++;
        ++transitions;
      }
    REQUIRE(transitions >= 10000);
    for (std::size_t a = 0; a < 4; ++a) {
      double row = 0.0;
      for (double v : counts[a]) row += v;
      for (std::size_t b = 0; b < 4; ++b) {
        const double expected = (a == b ? o.persistence : 0.0) + (1.0 - o.persistence) * pi[b];
        CHECK(std::abs(counts[a][b] / row - expected) < 0.05);
      }
    }
  }
}

TEST_CASE("class histogram matches the chain's stationary distribution") {
  // Oracle: the stationary distribution of T = p·I + (1 − p)·1·πᵀ is π itself,
  // checked here by power iteration rather than assumed.
  SynthOptions o;
  o.seed = 4;
  o.num_conversations = 1100;
  o.speaker_bias = 0.4;
  o.num_speakers = 3;
  o.dims = {1, 1, 1};
  const auto pi = fresh_label_distribution(o);
  std::vector<double> state{1.0, 0.0, 0.0, 0.0};
  for (int it = 0; it < 500; ++it) {
    std::vector<double> next(4, 0.0);
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b)
        next[b] += state[a] * ((a == b ? o.persistence : 0.0) + (1.0 - o.persistence) * pi[b]);
    state = next;
  }
  const Dataset ds = synth_dataset(o);
  REQUIRE(ds.num_utterances() >= 10000);
  const auto hist = class_histogram(ds);
  for (std::size_t c = 0; c < 4; ++c) {
    const double freq = static_cast<double>(hist[c]) / static_cast<double>(ds.num_utterances());
    CHECK(std::abs(freq - state[c]) < 0.05);
  }
}

TEST_CASE("a linear probe separates well-separated classes") {
  // Oracle: least-squares regression onto one-hot targets, fitted with Eigen.
  SynthOptions o;
  o.seed = 17;
  o.num_conversations = 200;
  o.separation = 10.0;
  const Dataset ds = synth_dataset(o);
  std::vector<const UtteranceRecord*> rows;
  for (const auto& c : ds.conversations)
    for (const auto& u : c.utterances) rows.push_back(&u);
  const int width = 32 + 16 + 16 + 1;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index n_fit = n / 2;
  Eigen::MatrixXd x(n, width);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index col = 0;
    for (const auto& f : rows[static_cast<std::size_t>(i)]->features)
      for (double v : f) x(i, col++) = v;
    x(i, col) = 1.0;
    y(i, rows[static_cast<std::size_t>(i)]->label) = 1.0;
  }
  const Eigen::MatrixXd w = x.topRows(n_fit).colPivHouseholderQr().solve(y.topRows(n_fit));
  const Eigen::MatrixXd scores = x.bottomRows(n - n_fit) * w;
  int correct = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    scores.row(i).maxCoeff(&best);
    correct += best == rows[static_cast<std::size_t>(n_fit + i)]->label;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(scores.rows()) > 0.95);
}

TEST_CASE("zero separation leaves a trained model at chance") {
  SynthOptions o;
  o.seed = 23;
  o.num_conversations = 230;
  o.separation = 0.0;
  o.dims = {8, 6, 6};
  const auto split = split_dataset(synth_dataset(o), 30.0 / 230.0, 0.0);
  ModelConfig c;
  c.dim = 16;
  c.heads = 2;
  c.mdgat_layers = 1;
  c.mpcat_layers = 1;
  c.window_past = 2;
  c.window_future = 2;
  c.lr = 1e-3;
  c.max_epochs = 8;
  c.patience = 100;
  const auto result = train(c, split.train, {});
  const auto report = evaluate_checkpoint(result.checkpoint, split.test);
  CHECK(split.test.num_utterances() >= 1500);
  CHECK(std::abs(report.accuracy - 0.25) <= 0.05);
}

TEST_CASE("batching groups whole conversations in order") {
  SynthOptions o;
  o.num_conversations = 10;
  const Dataset ds = synth_dataset(o);
  const auto batches = batch_conversations(ds.conversations, 4);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].conversations.size() == 4);
  CHECK(batches[1].conversations.size() == 4);
  CHECK(batches[2].conversations.size() == 2);
  std::size_t next = 0;
  for (const auto& b : batches) {
    std::size_t utts = 0;
    for (auto i : b.conversations) {
      CHECK(i == next++);
      utts += ds.conversations[i].size();
    }
    CHECK(b.num_utterances == utts);
  }
  const auto singles = batch_conversations(ds.conversations, 1);
  CHECK(singles.size() == 10);
  for (const auto& b : singles) CHECK(b.conversations.size() == 1);
  CHECK_THROWS_AS(batch_conversations(ds.conversations, 0), Error);
}

TEST_CASE("batch loss equals the per-utterance mean computed directly") {
  SynthOptions o;
  o.num_conversations = 5;
  o.dims = {6, 5, 4};
  const Dataset ds = synth_dataset(o);
  ModelConfig c;
  c.dim = 8;
  c.heads = 2;
  c.mdgat_layers = 1;
  c.mpcat_layers = 1;
  const Model model(c, ds.meta, 3);
  const ForwardContext ctx;
  const std::vector<std::size_t> batch{0, 2, 4};
  const double batched = batch_loss(model, ds.conversations, batch, ctx).item();
  double total = 0.0;
  std::size_t count = 0;
  for (auto i : batch) {
    const auto out = model.forward(ds.conversations[i], ctx);
    for (std::size_t r = 0; r < ds.conversations[i].size(); ++r) {
      total -= std::log(out.probs(static_cast<Index>(r), ds.conversations[i].utterances[r].label));
      ++count;
    }
  }
  CHECK(std::abs(batched - total / static_cast<double>(count)) < 1e-12);
}

TEST_CASE("split by conversation 80/10/10") {
  SynthOptions o;
  o.num_conversations = 50;
  const Dataset ds = synth_dataset(o);
  const auto s = split_dataset(ds);
  CHECK(s.train.conversations.size() == 40);
  CHECK(s.valid.conversations.size() == 5);
  CHECK(s.test.conversations.size() == 5);
  CHECK(s.train.conversations.front() == ds.conversations.front());
  CHECK(s.test.conversations.back() == ds.conversations.back());
  CHECK(s.valid.meta == ds.meta);
}
