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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ercfuse/checkpoint.hpp"
#include "ercfuse/config.hpp"
#include "ercfuse/errors.hpp"
#include "ercfuse/optim.hpp"
#include "ercfuse/trainer.hpp"
#include "../support.hpp"

using namespace ercfuse;
using namespace ercfuse::testing;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.dim = 8;
  c.heads = 2;
  c.mdgat_layers = 1;
  c.mpcat_layers = 1;
  c.window_past = 1;
  c.window_future = 1;
  c.lr = 1e-2;
  c.batch_size = 2;
  c.max_epochs = 3;
  c.patience = 5;
  c.seed = 3;
  return c;
}

Dataset tiny_data(std::uint64_t seed = 1, int convs = 6) {
  SynthOptions o;
  o.seed = seed;
  o.num_conversations = convs;
  o.min_length = 3;
  o.max_length = 5;
  o.num_classes = 3;
  o.dims = {6, 5, 4};
  return synth_dataset(o);
}

std::vector<std::vector<double>> values_of(const Model& m) { return m.snapshot(); }

std::string error_message(const std::function<void()>& f, ErrorKind kind) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
    return e.what();
  }
  FAIL("no error raised");
  return {};
}

}  // namespace

TEST_CASE("lr = 0 leaves parameters and loss fixed") {
  auto c = tiny_config();
  c.lr = 0.0;
  c.weight_decay = 0.0;
  c.dropout = 0.0;
  c.patience = 10;
  const auto data = tiny_data();
  const auto r = train(c, data, data);
  const Model fresh(c, data.meta, c.seed);
  CHECK(r.checkpoint.to_model().snapshot() == values_of(fresh));
  REQUIRE(r.history.epochs.size() == 3);
  for (const auto& e : r.history.epochs) CHECK(e.train_loss == r.history.epochs[0].train_loss);
}

TEST_CASE("training is deterministic") {
  const auto c = tiny_config();
  const auto data = tiny_data();
  const auto a = train(c, data, data);
  const auto b = train(c, data, data);
  CHECK(a.history.to_csv() == b.history.to_csv());
  CHECK(a.checkpoint.to_model().snapshot() == b.checkpoint.to_model().snapshot());
  CHECK(a.checkpoint.rng_state == b.checkpoint.rng_state);
  auto d = c;
  d.seed = 4;
  CHECK(train(d, data, data).history.to_csv() != a.history.to_csv());
}

TEST_CASE("a fresh model sits at chance on balanced labels") {
  SynthOptions o;
  o.seed = 5;
  o.num_conversations = 200;
  o.persistence = 0.0;
  o.dims = {6, 5, 4};
  const auto data = synth_dataset(o);
  auto c = tiny_config();
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) mean += evaluate_model(Model(c, data.meta, seed), data).accuracy / 5.0;
  // 5 × ~2000 utterances; a label-blind predictor averages 0.25
  CHECK(std::abs(mean - 0.25) < 0.05);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto c = tiny_config();
  const auto data = tiny_data();
  const auto r = train(c, data, data);
  const Model before = r.checkpoint.to_model();
  const auto path = std::filesystem::temp_directory_path() / "ercfuse_unit_ckpt.ercf";
  save_checkpoint(r.checkpoint, path);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.version == Checkpoint::kVersion);
  CHECK(loaded.config == r.checkpoint.config);
  CHECK(loaded.meta == r.checkpoint.meta);
  CHECK(loaded.best_epoch == r.checkpoint.best_epoch);
  CHECK(loaded.best_valid_metric == r.checkpoint.best_valid_metric);
  CHECK(loaded.rng_state == r.checkpoint.rng_state);
  const Model after = loaded.to_model();
  CHECK(after.snapshot() == before.snapshot());
  for (const auto& conv : data.conversations) {
    const auto x = before.forward(conv, {}).probs;
    const auto y = after.forward(conv, {}).probs;
    CHECK(bit_equal(x, y));
  }
  const auto e0 = evaluate_checkpoint(r.checkpoint, data);
  const auto e1 = evaluate_checkpoint(loaded, data);
  CHECK(e0.to_json() == e1.to_json());

  // Container layout: magic, version, JSON length, JSON, tensor blocks.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  REQUIRE(bytes.size() > 20);
  CHECK(bytes.substr(0, 8) == "ERCFCKPT");
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  CHECK(version == 1);
  std::uint64_t json_len = 0;
  std::memcpy(&json_len, bytes.data() + 12, 8);
  CHECK(bytes[20] == '{');
  std::uint64_t count = 0;
  std::memcpy(&count, bytes.data() + 20 + json_len, 8);
  CHECK(count == before.parameters().size());
  std::size_t expected = 20 + json_len + 8;
  for (const auto& p : before.parameters()) expected += 4 + p.name.size() + 16 + 8 * static_cast<std::size_t>(p.tensor.size());
  CHECK(bytes.size() == expected);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint errors") {
  const auto c = tiny_config();
  const auto data = tiny_data();
  Checkpoint ck = Checkpoint::from_model(Model(c, data.meta, 1));

  SUBCASE("shape mismatch") {
    ck.parameters[0].tensor = Tensor(1, 1, 0.0);
    error_message([&] { (void)ck.to_model(); }, ErrorKind::kState);
  }
  SUBCASE("dataset dims differ") {
    auto other = data;
    auto o = SynthOptions{};
    o.num_conversations = 2;
    o.num_classes = 3;
    o.dims = {7, 5, 4};
    const auto wrong = synth_dataset(o);
    const auto msg = error_message([&] { (void)evaluate_checkpoint(ck, wrong); }, ErrorKind::kConfig);
    CHECK(msg.find("dim") != std::string::npos);
  }
  SUBCASE("corrupt stream") {
    std::stringstream s("NOTACKPT garbage");
    CHECK_THROWS_AS(read_checkpoint(s), Error);
    std::stringstream good;
    write_checkpoint(ck, good);
    std::string bytes = good.str();
    bytes[8] = 9;  // unknown version
    std::stringstream bad(bytes);
    CHECK_THROWS_AS(read_checkpoint(bad), Error);
    std::stringstream cut(good.str().substr(0, good.str().size() - 5));
    CHECK_THROWS_AS(read_checkpoint(cut), Error);
  }
}

TEST_CASE("history rows match epochs run; early stopping keeps the best") {
  auto c = tiny_config();
  c.max_epochs = 40;
  c.patience = 2;
  c.lr = 5e-2;
  const auto all = tiny_data(9, 12);
  const auto split = split_dataset(all, 0.5, 0.5);
  std::ostringstream log;
  const auto r = train(c, split.train, split.valid, {&log});
  const auto& h = r.history.epochs;
  REQUIRE(!h.empty());
  CHECK(h.size() < 40);
  std::size_t lines = 0;
  for (char ch : log.str()) lines += ch == '\n';
  CHECK(lines == h.size());
  const std::string csv = r.history.to_csv();
  CHECK(csv.rfind("epoch,train_loss,valid_acc,valid_wa_f1\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == h.size() + 1);

  double best = -1.0;
  int best_epoch = 0;
  for (const auto& e : h)
    if (e.valid_wa_f1 > best) {
      best = e.valid_wa_f1;
      best_epoch = e.epoch;
    }
  CHECK(r.checkpoint.best_epoch == best_epoch);
  CHECK(r.checkpoint.best_valid_metric == best);
  CHECK(h.back().epoch - best_epoch == c.patience);
  CHECK(evaluate_checkpoint(r.checkpoint, split.valid).weighted_f1 == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("empty validation set selects on training data") {
  auto c = tiny_config();
  const auto data = tiny_data();
  const auto r = train(c, data, Dataset{data.meta, {}});
  CHECK(r.history.epochs.back().valid_wa_f1 >= 0.0);
  CHECK(evaluate_checkpoint(r.checkpoint, data).weighted_f1 ==
        doctest::Approx(r.checkpoint.best_valid_metric).epsilon(1e-12));
}

TEST_CASE("batched and per-conversation gradients give the same step") {
  auto c = tiny_config();
  c.dropout = 0.0;
  const auto data = tiny_data(2, 3);
  Model a(c, data.meta, 7), b(c, data.meta, 7);
  const std::vector<std::size_t> batch{0, 1, 2};
  double total = 0.0;
  for (const auto& conv : data.conversations) total += static_cast<double>(conv.size());

  auto pa = a.parameter_tensors(), pb = b.parameter_tensors();
  for (auto& t : pa) t.set_requires_grad(true);
  for (auto& t : pb) t.set_requires_grad(true);
  {
    Tape tape;
    const auto scope = tape.activate();
    tape.backward(batch_loss(a, data.conversations, batch, {}));
  }
  for (const auto& conv : data.conversations) {
    // one tape per conversation; leaf gradients accumulate
    Tape tape;
    const auto scope = tape.activate();
    std::vector<int> labels;
    for (const auto& u : conv.utterances) labels.push_back(u.label);
    tape.backward(classification_loss(b.forward(conv, {}).probs, labels, total));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t k = 0; k < pa[i].grad().size(); ++k)
      worst = std::max(worst, std::abs(pa[i].grad()[k] - pb[i].grad()[k]));
  CHECK(worst < 1e-14);
  // Feed both optimisers the same gradient buffer.
  for (std::size_t i = 0; i < pa.size(); ++i)
    std::copy(pa[i].grad().begin(), pa[i].grad().end(), pb[i].grad().begin());
  AdamWState sa(pa, {c.lr}), sb(pb, {c.lr});
  adamw_step(pa, sa);
  adamw_step(pb, sb);
  CHECK(a.snapshot() == b.snapshot());
}

TEST_CASE("non-finite training aborts with diagnostics") {
  auto data = tiny_data();
  for (auto& conv : data.conversations)
    for (auto& u : conv.utterances)
      for (auto& f : u.features)
        for (double& v : f) v *= 1e306;
  const auto msg = error_message([&] { train(tiny_config(), data, data); }, ErrorKind::kNumerical);
  CHECK(msg.find("epoch 1") != std::string::npos);
  CHECK(msg.find("batch 0") != std::string::npos);
  CHECK(msg.find("grad norm") != std::string::npos);
}

TEST_CASE("gradient clipping option trains finitely") {
  auto c = tiny_config();
  c.grad_clip = 1e-3;
  const auto data = tiny_data();
  const auto r = train(c, data, data);
  for (const auto& e : r.history.epochs) CHECK(std::isfinite(e.train_loss));
}

TEST_CASE("sweep configs and table shape") {
  const auto base = tiny_config();
  const auto w = sweep_configs(base, SweepAxis::kWindows, {"0:0", "2:2", "4:4"});
  REQUIRE(w.size() == 3);
  CHECK(w[1].window_past == 2);
  CHECK(w[2].window_future == 4);
  const auto l = sweep_configs(base, SweepAxis::kLayers, {"0:3"});
  CHECK(l[0].mdgat_layers == 0);
  CHECK(l[0].mpcat_layers == 3);
  CHECK(sweep_configs(base, SweepAxis::kLambda, {"0.6"})[0].speaker_lambda == 0.6);
  const auto u = sweep_configs(base, SweepAxis::kUpdateRule, {"sum", "concat", "sumproduct"});
  CHECK(u[0].update_rule == UpdateRule::kSum);
  CHECK(u[1].update_rule == UpdateRule::kConcat);
  CHECK(u[2].update_rule == UpdateRule::kSumProduct);
  CHECK(sweep_configs(base, SweepAxis::kModalities, {"av"})[0].modalities == ModalitySet::parse("av"));
  CHECK_THROWS_AS(sweep_configs(base, SweepAxis::kWindows, {"3"}), Error);
  CHECK_THROWS_AS(sweep_configs(base, SweepAxis::kModalities, {"t"}), Error);
  CHECK_THROWS_AS(parse_sweep_axis("depth"), Error);
  CHECK(to_string(parse_sweep_axis("update_rule")) == "update_rule");

  auto quick = base;
  quick.max_epochs = 1;
  const auto data = tiny_data();
  const auto rows = ablation_sweep(quick, SweepAxis::kWindows, {"0:0", "2:2", "4:4"}, data, data, data, 2);
  const auto csv = sweep_csv(SweepAxis::kWindows, rows);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "axis,value,epochs,best_epoch,valid_wa_f1,test_acc,test_wa_f1");
  int n = 0;
  while (std::getline(lines, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
    CHECK(line.rfind("windows,", 0) == 0);
    ++n;
  }
  CHECK(n == 3);
  // Thread count does not change results.
  const auto serial = ablation_sweep(quick, SweepAxis::kWindows, {"0:0", "2:2", "4:4"}, data, data, data, 1);
  CHECK(sweep_csv(SweepAxis::kWindows, serial) == csv);
}

TEST_CASE("config parsing, profiles and validation") {
  const auto ie = iemocap_profile();
  CHECK(ie.mdgat_layers == 3);
  CHECK(ie.mpcat_layers == 4);
  CHECK(ie.speaker_lambda == 1.6);
  CHECK(ie.lr == 1e-5);
  CHECK(ie.batch_size == 8);
  const auto me = meld_profile();
  CHECK(me.mdgat_layers == 2);
  CHECK(me.mpcat_layers == 2);
  CHECK(me.speaker_lambda == 0.6);
  CHECK(me.batch_size == 32);

  auto c = ie;
  c.set("dim", "32");
  c.set("update_rule", "concat");
  c.set("modalities", "ta");
  CHECK(c.dim == 32);
  CHECK(c.update_rule == UpdateRule::kConcat);
  CHECK(ModelConfig::from_json(c.to_json()) == c);
  error_message([&] { c.set("depth", "3"); }, ErrorKind::kConfig);
  error_message([&] { c.set("dim", "abc"); }, ErrorKind::kConfig);

  auto bad = ie;
  bad.dropout = 1.0;
  error_message([&] { bad.validate(); }, ErrorKind::kConfig);
  bad = ie;
  bad.mdgat_layers = -1;
  error_message([&] { bad.validate(); }, ErrorKind::kConfig);
  bad = ie;
  bad.heads = 5;  // 64 not divisible
  error_message([&] { bad.validate(); }, ErrorKind::kConfig);
  bad = ie;
  bad.message_dim = 16;  // sum-product needs message width = dim
  error_message([&] { bad.validate(); }, ErrorKind::kConfig);
  bad.update_rule = UpdateRule::kConcat;
  CHECK_NOTHROW(bad.validate());
  bad = ie;
  bad.modalities = ModalitySet::parse("t");
  error_message([&] { bad.validate(); }, ErrorKind::kConfig);
  error_message([] { ModalitySet::parse("tx"); }, ErrorKind::kConfig);

  const auto dir = std::filesystem::temp_directory_path() / "ercfuse_cfg_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "run.cfg");
    f << "# comment\nbatch_size = 32\ndim = 16\n  heads=2 \nwindow_past = 1\ndata = sub/x.jsonl  # trailing\nout_dir = out\n";
  }
  const auto run = load_run_config(dir / "run.cfg");
  CHECK(run.model.dim == 16);
  CHECK(run.model.heads == 2);
  CHECK(run.model.batch_size == 32);
  CHECK(run.data == (dir / "sub/x.jsonl").lexically_normal());
  CHECK(run.out_dir == (dir / "out").lexically_normal());
  {
    std::ofstream f(dir / "bad.cfg");
    f << "dim = 16\nbogus = 1\n";
  }
  const auto msg = error_message([&] { load_run_config(dir / "bad.cfg"); }, ErrorKind::kConfig);
  CHECK(msg.find("bogus") != std::string::npos);
  CHECK(msg.find("bad.cfg:2:") != std::string::npos);
  {
    std::ofstream f(dir / "kv.cfg");
    f << to_key_value(c);
  }
  CHECK(load_run_config(dir / "kv.cfg").model == c);
  std::filesystem::remove_all(dir);
}
