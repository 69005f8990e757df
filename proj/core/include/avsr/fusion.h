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

#ifndef AVSR_FUSION_H_
#define AVSR_FUSION_H_

// Prior-weighted logistic-regression calibration and linear fusion. Fusing a
// single system is calibration.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avsr/checkpoint.h"
#include "avsr/embedding_store.h"
#include "avsr/metrics.h"

namespace avsr {

struct FusionModel {
  std::vector<double> weights;  // one per input system
  double bias = 0.0;
  double effective_prior = 0.5;

  // llr = weights . scores + bias
  double Apply(std::span<const double> scores) const;

  Checkpoint ToCheckpoint() const;
  static FusionModel FromCheckpoint(const Checkpoint& ckpt);
  void Save(const std::string& path) const;
  static FusionModel Load(const std::string& path);
};

struct FusionOptions {
  double l2 = 0.0;
  // The optimum is at infinity for separable data; stop at this norm.
  double max_weight_norm = 1e3;
  double gradient_tolerance = 1e-8;
  int max_iterations = 500;
  // Starting point (weights..., bias); zeros when absent.
  std::optional<std::vector<double>> initial;
};

struct FusionFitResult {
  FusionModel model;
  double objective = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool weight_norm_capped = false;
};

// Scores from several systems aligned on one trial list: row i of `scores`
// holds every system's score for trials[i].
struct AlignedScores {
  std::vector<ScoreEntry> trials;  // ids and labels; score field unused
  Eigen::MatrixXd scores;          // n_trials x n_systems
};

// Aligns systems on the first system's trial order. Throws ValidationError if
// any system misses a trial, has extra trials, or disagrees on a label.
AlignedScores AlignSystems(std::span<const ScoreSet> systems);

// Minimizes
//   prior/N_t * sum_t log(1 + exp(-(s_t + logit(prior))))
//   + (1 - prior)/N_n * sum_n log(1 + exp(s_n + logit(prior))) + l2/2 |w|^2
// with s = w . x + b and prior = params.EffectivePrior(), by damped Newton
// iterations with a backtracking line search.
FusionFitResult FitFusion(std::span<const ScoreSet> systems, const DcfParams& params,
                          const FusionOptions& options = {});

// Value of the training objective for a given (weights, bias).
double FusionObjective(const AlignedScores& data, const FusionModel& model, double l2 = 0.0);

// Fused llrs over the first system's trial list.
ScoreSet ApplyFusion(const FusionModel& model, std::span<const ScoreSet> systems);

}  // namespace avsr

#endif  // AVSR_FUSION_H_
