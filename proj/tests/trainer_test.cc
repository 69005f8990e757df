// Copyright 2026 The avsr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <random>
#include <sstream>

#include "avsr/error.h"
#include "avsr/synth.h"
#include "avsr/trainer.h"
#include "doctest.h"
#include "oracles.h"

namespace avsr {
namespace {

struct OnePair {
  EmbeddingStore store;
  TrialSet trials;
};

OnePair SinglePair() {
  OnePair d;
  d.store.Add({"v", "a", Modality::kVoice, Eigen::Vector4d(1.0, -0.5, 0.25, 2.0)});
  d.store.Add({"f", "a", Modality::kFace, Eigen::Vector4d(-1.0, 0.3, 0.8, 0.1)});
  d.trials.Add({"v", "f", TrialLabel::kTarget});
  return d;
}

TrainConfig SmallConfig() {
  TrainConfig c;
  c.hidden_dim = 8;
  c.output_dim = 4;
  c.batch_size = 1;
  return c;
}

SynthData SmallBench(std::uint64_t seed) {
  GenConfig g;
  g.d_id = 8;
  g.d_voice = g.d_face = 16;
  g.n_identities_train = 120;
  g.n_identities_test = 40;
  g.seed = seed;
  return Generate(g);
}

TEST_CASE("a single separable pair is driven below the S = 1 loss floor bound") {
  const OnePair d = SinglePair();
  TrainConfig c = SmallConfig();
  // Plain gradient steps; Adam's normalized steps overshoot once S nears 1.
  c.optimizer.kind = OptimizerKind::kSgd;
  c.learning_rate = 0.01;
  c.max_epochs = 100;
  const TrainReport r = Train(d.store, d.trials, {}, c);
  REQUIRE(r.epochs.size() == 100);
  for (size_t i = 1; i < r.epochs.size(); ++i) {
    CHECK(r.epochs[i].train_loss < r.epochs[i - 1].train_loss);
  }
  const double final_loss =
      PairLoss(ScorePair(r.final_params, d.store.Get("v").vector, d.store.Get("f").vector),
               PairLabel::kSame);
  CHECK(final_loss < 0.32);
  CHECK(final_loss > -std::log(Logistic(1.0)) - 1e-12);

  SUBCASE("retraining a fitted pair stays near the floor") {
    const TrainReport again = RetrainWithExtra(r.final_params, d.store, d.trials, EmbeddingStore{},
                                               TrialSet{}, TrialSet{}, c);
    for (const auto& e : again.epochs) CHECK(e.train_loss < 0.32);
  }
}

TEST_CASE("zero learning rate leaves parameters and loss unchanged") {
  const OnePair d = SinglePair();
  TrainConfig c = SmallConfig();
  c.learning_rate = 0.0;
  c.max_epochs = 5;
  const VFNetParams init = VFNetParams::GlorotUniform({4, 4, 8, 4}, 3);
  const TrainReport r = Train(d.store, d.trials, {}, c, init);
  CHECK(r.final_params == init);
  for (const auto& e : r.epochs) CHECK(e.train_loss == r.epochs.front().train_loss);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const SynthData data = SmallBench(5);
  TrainConfig c;
  c.hidden_dim = 16;
  c.output_dim = 8;
  c.batch_size = 64;
  c.max_epochs = 4;
  c.seed = 17;
  const TrainReport a = TrainOnStore(data.train, c, {}, 0.2);
  const TrainReport b = TrainOnStore(data.train, c, {}, 0.2);
  CHECK(a.epochs == b.epochs);
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(a.final_params == b.final_params);
  c.seed = 18;
  CHECK_FALSE(TrainOnStore(data.train, c, {}, 0.2).final_params == a.final_params);
}

TEST_CASE("best epoch indexes the minimum validation EER and the report is TSV") {
  const SynthData data = SmallBench(6);
  TrainConfig c;
  c.hidden_dim = 16;
  c.output_dim = 8;
  c.batch_size = 32;
  c.max_epochs = 8;
  c.patience = 100;
  const TrainReport r = TrainOnStore(data.train, c, {}, 0.25);
  REQUIRE(r.epochs.size() == 8);
  double best = 1.0;
  for (const auto& e : r.epochs) {
    CHECK(std::isfinite(e.train_loss));
    best = std::min(best, e.validation_eer);
  }
  CHECK(r.epochs[static_cast<size_t>(r.best_epoch)].validation_eer == best);
  for (int i = 0; i < r.best_epoch; ++i) CHECK(r.epochs[static_cast<size_t>(i)].validation_eer > best);

  std::ostringstream out;
  r.WriteTsv(out);
  std::istringstream lines(out.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "epoch\ttrain_loss\tvalidation_eer\tbest");
  int rows = 0, flagged = 0;
  for (std::string line; std::getline(lines, line);) {
    ++rows;
    flagged += line.back() == '1';
  }
  CHECK(rows == 8);
  CHECK(flagged == 1);
}

TEST_CASE("early stopping waits exactly `patience` epochs after the best") {
  const SynthData data = SmallBench(7);
  TrainConfig c;
  c.hidden_dim = 16;
  c.output_dim = 8;
  c.max_epochs = 50;
  c.patience = 2;
  c.learning_rate = 0.05;
  const TrainReport r = TrainOnStore(data.train, c, {}, 0.25);
  if (r.epochs.size() < 50) {
    CHECK(static_cast<int>(r.epochs.size()) == r.best_epoch + 1 + c.patience);
  }
}

TEST_CASE("epoch-mean training loss falls over the first five epochs for most seeds") {
  // 20 seeded runs at lr 1e-3 on a reduced synthetic benchmark.
  GenConfig g;
  g.n_identities_train = 150;
  const SynthData data = Generate(g);
  const CrossmodalTrialOptions trial_options;
  const TrialSet trials = BuildCrossmodalTrials(data.train, trial_options);
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig c;
    c.seed = seed;
    c.max_epochs = 5;
    const TrainReport r = Train(data.train, trials, {}, c);
    bool ok = true;
    for (size_t i = 1; i < r.epochs.size(); ++i) {
      ok = ok && r.epochs[i].train_loss <= r.epochs[i - 1].train_loss;
    }
    monotone += ok;
  }
  CHECK(monotone >= 19);
}

TEST_CASE("retraining with an empty extra set equals continuing on the base data") {
  const SynthData data = SmallBench(8);
  TrainConfig c;
  c.hidden_dim = 16;
  c.output_dim = 8;
  c.max_epochs = 3;
  const TrialSet trials = BuildCrossmodalTrials(data.train, {});
  const VFNetParams start = VFNetParams::GlorotUniform({16, 16, 16, 8}, 1);
  const TrainReport cont = Train(data.train, trials, {}, c, start);
  const TrainReport extra =
      RetrainWithExtra(start, data.train, trials, EmbeddingStore{}, TrialSet{}, TrialSet{}, c);
  CHECK(extra.final_params == cont.final_params);
  REQUIRE(extra.epochs.size() == cont.epochs.size());
  for (size_t i = 0; i < cont.epochs.size(); ++i) {
    CHECK(extra.epochs[i].train_loss == cont.epochs[i].train_loss);
  }
  const TrainReport again =
      RetrainWithExtra(start, data.train, trials, EmbeddingStore{}, TrialSet{}, TrialSet{}, c);
  CHECK(again.final_params == extra.final_params);
}

TEST_CASE("retraining on extra data uses both trial streams") {
  const SynthData a = SmallBench(9);
  GenConfig g;
  g.d_id = 8;
  g.d_voice = g.d_face = 16;
  g.n_identities_train = 30;
  g.seed = 99;
  // Relabel identities so the extra set cannot collide with the base set.
  const SynthData b = Generate(g);
  EmbeddingStore extra;
  for (const auto& r : b.train.records()) {
    extra.Add({"x-" + r.record_id, "x-" + r.identity_id, r.modality, r.vector});
  }
  TrainConfig c;
  c.hidden_dim = 16;
  c.output_dim = 8;
  c.max_epochs = 2;
  const TrialSet base_trials = BuildCrossmodalTrials(a.train, {});
  const TrialSet extra_trials = BuildCrossmodalTrials(extra, {});
  const VFNetParams start = VFNetParams::GlorotUniform({16, 16, 16, 8}, 1);
  const TrainReport with = RetrainWithExtra(start, a.train, base_trials, extra, extra_trials, {}, c);
  const TrainReport without =
      RetrainWithExtra(start, a.train, base_trials, EmbeddingStore{}, TrialSet{}, {}, c);
  CHECK_FALSE(with.final_params == without.final_params);
}

TEST_CASE("training errors carry diagnostics") {
  const OnePair d = SinglePair();
  TrainConfig c = SmallConfig();
  VFNetParams dead = VFNetParams::GlorotUniform({4, 4, 8, 4}, 3);
  dead.voice_fc2.weight.setZero();
  try {
    Train(d.store, d.trials, {}, c, dead);
    FAIL("expected a runtime failure");
  } catch (const RuntimeFailure& e) {
    const std::string msg = e.what();
    CHECK(msg.find("batch 0") != std::string::npos);
    CHECK(msg.find("(v, f)") != std::string::npos);
  }

  TrialSet unlabeled;
  unlabeled.Add({"v", "f", std::nullopt});
  CHECK_THROWS_AS(Train(d.store, unlabeled, {}, c), ValidationError);
  TrialSet unknown;
  unknown.Add({"v", "nope", TrialLabel::kTarget});
  CHECK_THROWS_AS(Train(d.store, unknown, {}, c), ValidationError);

  TrainConfig bad = c;
  bad.learning_rate = -1.0;
  CHECK_THROWS_AS(bad.Validate(), ValidationError);
  bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.Validate(), ValidationError);
}

TEST_CASE("train config reads every documented key") {
  std::istringstream in(
      "lr = 0.01\nbatch_size = 32\nmax_epochs = 7\npatience = 0\nseed = 9\n"
      "optimizer = adam(0.8,0.99,1e-6)\nhidden_dim = 12\noutput_dim = 6\n");
  const TrainConfig c = TrainConfig::FromKv(KvConfig::Read(in, "mem"));
  CHECK(c.learning_rate == 0.01);
  CHECK(c.batch_size == 32);
  CHECK(c.max_epochs == 7);
  CHECK(c.patience == 0);
  CHECK(c.seed == 9);
  CHECK(c.optimizer.kind == OptimizerKind::kAdam);
  CHECK(c.optimizer.beta1 == 0.8);
  CHECK(c.optimizer.beta2 == 0.99);
  CHECK(c.optimizer.epsilon == 1e-6);
  CHECK(c.hidden_dim == 12);
  CHECK(c.output_dim == 6);
  std::istringstream sgd("optimizer = sgd\n");
  CHECK(TrainConfig::FromKv(KvConfig::Read(sgd, "mem")).optimizer.kind == OptimizerKind::kSgd);
  std::istringstream bad("optimizer = rmsprop\n");
  CHECK_THROWS_AS(TrainConfig::FromKv(KvConfig::Read(bad, "mem")), ValidationError);
}

}  // namespace
}  // namespace avsr
