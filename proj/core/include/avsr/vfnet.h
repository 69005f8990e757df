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

#ifndef AVSR_VFNET_H_
#define AVSR_VFNET_H_

// Voice-face discriminative network. Each modality has its own two-layer
// branch, fc2(relu(fc1(x))), mapping an embedding into a shared space; a pair
// is scored by the cosine similarity S of the two transformed vectors, and
// the same-person probability is the two-way softmax over (S, 1 - S), which
// reduces to logistic(2S - 1).

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "avsr/checkpoint.h"
#include "avsr/embedding_store.h"

namespace avsr {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
  bool operator==(const DenseLayer& o) const {
    return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() &&
           weight == o.weight && bias.size() == o.bias.size() && bias == o.bias;
  }
};

struct VFNetShape {
  int voice_dim = 512;
  int face_dim = 512;
  int hidden_dim = 256;
  int output_dim = 128;

  bool operator==(const VFNetShape&) const = default;
};

struct VFNetParams {
  DenseLayer voice_fc1;
  DenseLayer voice_fc2;
  DenseLayer face_fc1;
  DenseLayer face_fc2;

  static VFNetParams Zeros(const VFNetShape& shape);
  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
  static VFNetParams GlorotUniform(const VFNetShape& shape, std::uint64_t seed);

  VFNetShape shape() const;
  Eigen::Index NumParameters() const;
  bool AllFinite() const;
  void SetZero();

  // Flat view in a fixed order: voice_fc1 (W row-major, b), voice_fc2,
  // face_fc1, face_fc2.
  Eigen::VectorXd Flatten() const;
  // Throws ValidationError if the size does not match NumParameters().
  void Unflatten(const Eigen::VectorXd& flat);

  Checkpoint ToCheckpoint() const;
  static VFNetParams FromCheckpoint(const Checkpoint& ckpt);
  void Save(const std::string& path) const;
  static VFNetParams Load(const std::string& path);

  bool operator==(const VFNetParams&) const = default;
};

enum class PairLabel { kSame, kDifferent };

inline PairLabel ToPairLabel(TrialLabel label) {
  return label == TrialLabel::kTarget ? PairLabel::kSame : PairLabel::kDifferent;
}

struct PairScore {
  double similarity = 0.0;
  double p_same = 0.5;
  double p_diff = 0.5;
};

// Numerically stable 1 / (1 + exp(-x)).
double Logistic(double x);

// Throw ValidationError on an input dimension mismatch.
Eigen::VectorXd TransformVoice(const VFNetParams& params, const Eigen::VectorXd& voice);
Eigen::VectorXd TransformFace(const VFNetParams& params, const Eigen::VectorXd& face);

// a.b / (|a||b|). Throws ValidationError for unequal lengths and
// RuntimeFailure naming the zero-norm argument ("first"/"second").
double CosineSimilarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

PairScore PairProbability(double similarity);

// Cross-entropy of the two-way softmax against a hard label.
double PairLoss(const PairScore& score, PairLabel label);

// Full forward pass for a (voice, face) pair.
PairScore ScorePair(const VFNetParams& params, const Eigen::VectorXd& voice,
                    const Eigen::VectorXd& face);

struct PairGradient {
  double loss = 0.0;
  VFNetParams gradient;
};

// Exact reverse-mode gradient of PairLoss with respect to every parameter.
// Throws RuntimeFailure if either transformed vector has zero norm.
PairGradient PairGrad(const VFNetParams& params, const Eigen::VectorXd& voice,
                      const Eigen::VectorXd& face, PairLabel label);

// Adds weight * d(loss)/d(params) into *grad (which must already have the
// shape of params) and returns the unweighted loss.
double AccumulatePairGrad(const VFNetParams& params, const Eigen::VectorXd& voice,
                          const Eigen::VectorXd& face, PairLabel label, double weight,
                          VFNetParams* grad);

enum class MatchChoice { kFirst, kSecond };

// 1-of-2 matching with a voice probe: both faces go through the (shared) face
// branch and the one with strictly larger similarity wins; ties go to kFirst.
MatchChoice MatchOneOfTwo(const VFNetParams& params, const Eigen::VectorXd& voice,
                          const Eigen::VectorXd& face_a, const Eigen::VectorXd& face_b);

// Mirror task with a face probe and two candidate voices.
MatchChoice MatchOneOfTwoFaceProbe(const VFNetParams& params, const Eigen::VectorXd& face,
                                   const Eigen::VectorXd& voice_a,
                                   const Eigen::VectorXd& voice_b);

}  // namespace avsr

#endif  // AVSR_VFNET_H_
