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

#ifndef AVSR_TRAINER_H_
#define AVSR_TRAINER_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "avsr/embedding_store.h"
#include "avsr/kv_config.h"
#include "avsr/vfnet.h"

namespace avsr {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 256;
  int max_epochs = 50;
  // Epochs without a validation-EER improvement before stopping.
  int patience = 5;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  int hidden_dim = 256;
  int output_dim = 128;

  void Validate() const;

  // Keys: lr, batch_size, max_epochs, patience, seed, optimizer, hidden_dim,
  // output_dim. `optimizer` is "sgd", "adam" or "adam(b1,b2,eps)".
  // Missing keys keep the defaults above.
  static TrainConfig FromKv(const KvConfig& kv);
  static const std::vector<std::string>& KvKeys();
};

struct EpochStats {
  double train_loss = 0.0;
  // NaN when no usable validation set was supplied.
  double validation_eer = 0.0;

  bool operator==(const EpochStats&) const = default;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // index into epochs
  VFNetParams final_params;

  // Columns: epoch (1-based), train_loss, validation_eer, best (0/1).
  void WriteTsv(std::ostream& out) const;
  void SaveTsv(const std::string& path) const;
};

// Mini-batch training on labeled voice/face trials resolved against `store`.
// Batches are balanced between target and nontarget trials; the returned
// parameters are those of the epoch with the lowest validation EER. Fully
// deterministic for a given config.seed.
//
// Throws ValidationError for unlabeled trials or unknown ids, and
// RuntimeFailure (naming the batch and pair) on a non-finite loss.
TrainReport Train(const EmbeddingStore& store, const TrialSet& train_trials,
                  const TrialSet& valid_trials, const TrainConfig& config);

// As above, starting from `init` instead of a fresh initialization.
TrainReport Train(const EmbeddingStore& store, const TrialSet& train_trials,
                  const TrialSet& valid_trials, const TrainConfig& config,
                  const VFNetParams& init);

// Continues training `params` on the union of the base and extra trials.
TrainReport RetrainWithExtra(const VFNetParams& params, const EmbeddingStore& base_store,
                             const TrialSet& base_trials, const EmbeddingStore& extra_store,
                             const TrialSet& extra_trials, const TrialSet& valid_trials,
                             const TrainConfig& config);

// Convenience front end: holds out a `valid_fraction` of identities of
// `store`, builds cross-modal trials for both parts and trains.
TrainReport TrainOnStore(const EmbeddingStore& store, const TrainConfig& config,
                         const CrossmodalTrialOptions& trial_options, double valid_fraction);

// Scores each voice/face trial with p_same; labels are carried over.
ScoreSet ScoreCrossmodalTrials(const VFNetParams& params, const EmbeddingStore& store,
                               const TrialSet& trials);

}  // namespace avsr

#endif  // AVSR_TRAINER_H_
