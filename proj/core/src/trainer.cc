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

#include "avsr/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "avsr/error.h"
#include "avsr/metrics.h"
#include "avsr/text_io.h"

namespace avsr {
namespace {

struct ResolvedPair {
  const Trial* trial;
  const Eigen::VectorXd* voice;
  const Eigen::VectorXd* face;
  PairLabel label;
};

std::vector<ResolvedPair> ResolvePairs(const EmbeddingStore& store, const TrialSet& trials,
                                       bool require_labels) {
  if (require_labels && !trials.empty() && !trials.labeled()) {
    throw ValidationError("training trials must be labeled");
  }
  std::vector<ResolvedPair> out;
  out.reserve(trials.size());
  for (const Trial& t : trials.trials()) {
    const EmbeddingRecord& a = store.Get(t.enroll_id);
    const EmbeddingRecord& b = store.Get(t.test_id);
    if (a.modality == b.modality) {
      throw ValidationError("trial (" + t.enroll_id + ", " + t.test_id +
                            ") does not pair a voice with a face");
    }
    const EmbeddingRecord& voice = a.modality == Modality::kVoice ? a : b;
    const EmbeddingRecord& face = a.modality == Modality::kVoice ? b : a;
    const PairLabel label =
        t.label ? ToPairLabel(*t.label) : PairLabel::kDifferent;
    out.push_back({&t, &voice.vector, &face.vector, label});
  }
  return out;
}

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, double lr, Eigen::Index n)
      : cfg_(cfg), lr_(lr) {
    if (cfg_.kind == OptimizerKind::kAdam) {
      m_ = Eigen::VectorXd::Zero(n);
      v_ = Eigen::VectorXd::Zero(n);
    }
  }

  void Step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (cfg_.kind == OptimizerKind::kSgd) {
      params -= lr_ * grad;
      return;
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
  }

 private:
  OptimizerConfig cfg_;
  double lr_;
  long long t_ = 0;
  Eigen::VectorXd m_, v_;
};

double ValidationEer(const VFNetParams& params, const std::vector<ResolvedPair>& pairs) {
  std::vector<double> tar, non;
  for (const ResolvedPair& p : pairs) {
    const double s = ScorePair(params, *p.voice, *p.face).p_same;
    (p.label == PairLabel::kSame ? tar : non).push_back(s);
  }
  if (tar.empty() || non.empty()) return std::numeric_limits<double>::quiet_NaN();
  return Eer(tar, non);
}

// Cyclic reader over a shuffled index list.
class Cycler {
 public:
  explicit Cycler(std::vector<size_t> items) : items_(std::move(items)) {}
  bool empty() const { return items_.empty(); }
  size_t size() const { return items_.size(); }
  void Shuffle(std::mt19937_64& rng) {
    std::shuffle(items_.begin(), items_.end(), rng);
    pos_ = 0;
  }
  size_t Next() {
    size_t v = items_[pos_];
    pos_ = (pos_ + 1) % items_.size();
    return v;
  }

 private:
  std::vector<size_t> items_;
  size_t pos_ = 0;
};

}  // namespace

void TrainConfig::Validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be finite and non-negative");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (max_epochs < 1) throw ValidationError("max_epochs must be positive");
  if (patience < 0) throw ValidationError("patience must be non-negative");
  if (hidden_dim < 1 || output_dim < 1) throw ValidationError("layer sizes must be positive");
  if (optimizer.kind == OptimizerKind::kAdam) {
    if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
        !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0) || !(optimizer.epsilon > 0.0)) {
      throw ValidationError("adam needs beta1, beta2 in [0, 1) and epsilon > 0");
    }
  }
}

const std::vector<std::string>& TrainConfig::KvKeys() {
  static const std::vector<std::string> keys = {"lr",   "batch_size", "max_epochs", "patience",
                                                "seed", "optimizer",  "hidden_dim", "output_dim"};
  return keys;
}

TrainConfig TrainConfig::FromKv(const KvConfig& kv) {
  TrainConfig c;
  c.learning_rate = kv.GetDouble("lr", c.learning_rate);
  c.batch_size = static_cast<int>(kv.GetInt("batch_size", c.batch_size));
  c.max_epochs = static_cast<int>(kv.GetInt("max_epochs", c.max_epochs));
  c.patience = static_cast<int>(kv.GetInt("patience", c.patience));
  c.seed = static_cast<std::uint64_t>(kv.GetInt("seed", static_cast<long long>(c.seed)));
  c.hidden_dim = static_cast<int>(kv.GetInt("hidden_dim", c.hidden_dim));
  c.output_dim = static_cast<int>(kv.GetInt("output_dim", c.output_dim));
  if (auto opt = kv.Get("optimizer")) {
    std::string s(Trim(*opt));
    if (s == "sgd") {
      c.optimizer.kind = OptimizerKind::kSgd;
    } else if (s == "adam") {
      c.optimizer = OptimizerConfig{};
    } else if (s.rfind("adam(", 0) == 0 && s.back() == ')') {
      auto args = Split(std::string_view(s).substr(5, s.size() - 6), ',');
      if (args.size() != 3) throw ValidationError("optimizer: adam(b1,b2,eps) needs 3 values");
      auto b1 = ParseDouble(Trim(args[0]));
      auto b2 = ParseDouble(Trim(args[1]));
      auto eps = ParseDouble(Trim(args[2]));
      if (!b1 || !b2 || !eps) throw ValidationError("optimizer: malformed adam arguments");
      c.optimizer = {OptimizerKind::kAdam, *b1, *b2, *eps};
    } else {
      throw ValidationError("unknown optimizer '" + s + "'");
    }
  }
  c.Validate();
  return c;
}

void TrainReport::WriteTsv(std::ostream& out) const {
  out << "epoch\ttrain_loss\tvalidation_eer\tbest\n";
  for (size_t i = 0; i < epochs.size(); ++i) {
    out << (i + 1) << '\t' << FormatDouble(epochs[i].train_loss) << '\t'
        << FormatDouble(epochs[i].validation_eer) << '\t'
        << (static_cast<int>(i) == best_epoch ? 1 : 0) << '\n';
  }
}

void TrainReport::SaveTsv(const std::string& path) const {
  auto out = OpenForWrite(path);
  WriteTsv(out);
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

TrainReport Train(const EmbeddingStore& store, const TrialSet& train_trials,
                  const TrialSet& valid_trials, const TrainConfig& config) {
  config.Validate();
  if (!store.HasModality(Modality::kVoice) || !store.HasModality(Modality::kFace)) {
    throw ValidationError("training store needs voice and face records");
  }
  const int dim = store.dim();
  const VFNetShape shape{dim, dim, config.hidden_dim, config.output_dim};
  // Decorrelate the init stream from the batch-order stream.
  return Train(store, train_trials, valid_trials, config,
               VFNetParams::GlorotUniform(shape, config.seed ^ 0x9e3779b97f4a7c15ULL));
}

TrainReport Train(const EmbeddingStore& store, const TrialSet& train_trials,
                  const TrialSet& valid_trials, const TrainConfig& config,
                  const VFNetParams& init) {
  config.Validate();
  if (train_trials.empty()) throw ValidationError("no training trials");
  const std::vector<ResolvedPair> train = ResolvePairs(store, train_trials, true);
  const std::vector<ResolvedPair> valid = ResolvePairs(store, valid_trials, true);

  std::vector<size_t> targets, nontargets;
  for (size_t i = 0; i < train.size(); ++i) {
    (train[i].label == PairLabel::kSame ? targets : nontargets).push_back(i);
  }
  Cycler target_cycle(std::move(targets));
  Cycler nontarget_cycle(std::move(nontargets));

  const size_t n_total = train.size();
  const size_t batch = std::min(static_cast<size_t>(config.batch_size), n_total);
  const size_t n_batches = (n_total + batch - 1) / batch;

  std::mt19937_64 rng(config.seed);
  VFNetParams params = init;
  VFNetParams grad = VFNetParams::Zeros(params.shape());
  Eigen::VectorXd flat = params.Flatten();
  Optimizer optimizer(config.optimizer, config.learning_rate, flat.size());

  TrainReport report;
  report.final_params = params;
  double best_eer = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    if (!target_cycle.empty()) target_cycle.Shuffle(rng);
    if (!nontarget_cycle.empty()) nontarget_cycle.Shuffle(rng);

    double loss_sum = 0.0;
    size_t loss_count = 0;
    for (size_t b = 0; b < n_batches; ++b) {
      size_t n_tar = batch / 2;
      if (nontarget_cycle.empty()) n_tar = batch;
      if (target_cycle.empty()) n_tar = 0;
      const double weight = 1.0 / static_cast<double>(batch);

      grad.SetZero();
      for (size_t k = 0; k < batch; ++k) {
        const ResolvedPair& p = train[k < n_tar ? target_cycle.Next() : nontarget_cycle.Next()];
        double loss = 0.0;
        try {
          loss = AccumulatePairGrad(params, *p.voice, *p.face, p.label, weight, &grad);
        } catch (const RuntimeFailure& e) {
          throw RuntimeFailure("epoch " + std::to_string(epoch + 1) + ", batch " +
                               std::to_string(b) + ", pair (" + p.trial->enroll_id + ", " +
                               p.trial->test_id + "): " + e.what());
        }
        if (!std::isfinite(loss)) {
          throw RuntimeFailure("non-finite loss at epoch " + std::to_string(epoch + 1) +
                               ", batch " + std::to_string(b) + ", pair (" +
                               p.trial->enroll_id + ", " + p.trial->test_id + ")");
        }
        loss_sum += loss;
        ++loss_count;
      }
      optimizer.Step(flat, grad.Flatten());
      params.Unflatten(flat);
      if (!params.AllFinite()) {
        throw RuntimeFailure("non-finite parameters after epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(b));
      }
    }

    EpochStats stats{loss_sum / static_cast<double>(loss_count), ValidationEer(params, valid)};
    report.epochs.push_back(stats);

    if (std::isnan(stats.validation_eer)) {
      // No usable validation set: keep the latest parameters.
      report.best_epoch = epoch;
      report.final_params = params;
      continue;
    }
    if (stats.validation_eer < best_eer) {
      best_eer = stats.validation_eer;
      report.best_epoch = epoch;
      report.final_params = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return report;
}

TrainReport RetrainWithExtra(const VFNetParams& params, const EmbeddingStore& base_store,
                             const TrialSet& base_trials, const EmbeddingStore& extra_store,
                             const TrialSet& extra_trials, const TrialSet& valid_trials,
                             const TrainConfig& config) {
  const EmbeddingStore merged =
      extra_store.empty() ? base_store : MergeStores(base_store, extra_store);
  TrialSet all = base_trials;
  for (const Trial& t : extra_trials.trials()) all.Add(t);
  return Train(merged, all, valid_trials, config, params);
}

TrainReport TrainOnStore(const EmbeddingStore& store, const TrainConfig& config,
                         const CrossmodalTrialOptions& trial_options, double valid_fraction) {
  const StoreSplit split = SplitByIdentity(store, valid_fraction, trial_options.seed);
  const TrialSet train = BuildCrossmodalTrials(split.first, trial_options);
  TrialSet valid;
  if (!split.second.empty()) {
    CrossmodalTrialOptions valid_options = trial_options;
    valid_options.seed = trial_options.seed + 1;
    valid = BuildCrossmodalTrials(split.second, valid_options);
  }
  return Train(store, train, valid, config);
}

ScoreSet ScoreCrossmodalTrials(const VFNetParams& params, const EmbeddingStore& store,
                               const TrialSet& trials) {
  ScoreSet out;
  for (const ResolvedPair& p : ResolvePairs(store, trials, false)) {
    out.Add({p.trial->enroll_id, p.trial->test_id, ScorePair(params, *p.voice, *p.face).p_same,
             p.trial->label});
  }
  return out;
}

}  // namespace avsr
