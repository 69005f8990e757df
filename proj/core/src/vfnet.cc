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

#include "avsr/vfnet.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "avsr/error.h"

namespace avsr {
namespace {

DenseLayer ZeroLayer(int in, int out) {
  return {Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
}

DenseLayer GlorotLayer(int in, int out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  DenseLayer layer = ZeroLayer(in, out);
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
  }
  return layer;
}

void CheckShape(const VFNetShape& s) {
  if (s.voice_dim <= 0 || s.face_dim <= 0 || s.hidden_dim <= 0 || s.output_dim <= 0) {
    throw ValidationError("VFNet layer sizes must be positive");
  }
}

std::array<const DenseLayer*, 4> Layers(const VFNetParams& p) {
  return {&p.voice_fc1, &p.voice_fc2, &p.face_fc1, &p.face_fc2};
}

std::array<DenseLayer*, 4> Layers(VFNetParams& p) {
  return {&p.voice_fc1, &p.voice_fc2, &p.face_fc1, &p.face_fc2};
}

constexpr std::array<const char*, 4> kLayerNames = {"voice_fc1", "voice_fc2", "face_fc1",
                                                    "face_fc2"};

// Activations of one branch kept for the backward pass.
struct BranchForward {
  Eigen::VectorXd pre;     // fc1 output before relu
  Eigen::VectorXd hidden;  // relu(pre)
  Eigen::VectorXd out;     // fc2 output
};

BranchForward RunBranch(const DenseLayer& fc1, const DenseLayer& fc2, const Eigen::VectorXd& x,
                        const char* which) {
  if (x.size() != fc1.in_dim()) {
    throw ValidationError(std::string(which) + " embedding has dimension " +
                          std::to_string(x.size()) + ", model expects " +
                          std::to_string(fc1.in_dim()));
  }
  BranchForward f;
  f.pre.noalias() = fc1.weight * x;
  f.pre += fc1.bias;
  f.hidden = f.pre.cwiseMax(0.0);
  f.out.noalias() = fc2.weight * f.hidden;
  f.out += fc2.bias;
  return f;
}

void BackpropBranch(const DenseLayer& fc2, const BranchForward& f, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& grad_out, double weight, DenseLayer* g_fc1,
                    DenseLayer* g_fc2) {
  Eigen::VectorXd g_out = weight * grad_out;
  g_fc2->weight.noalias() += g_out * f.hidden.transpose();
  g_fc2->bias += g_out;
  Eigen::VectorXd g_hidden = fc2.weight.transpose() * g_out;
  for (Eigen::Index i = 0; i < g_hidden.size(); ++i) {
    if (f.pre[i] <= 0.0) g_hidden[i] = 0.0;
  }
  g_fc1->weight.noalias() += g_hidden * x.transpose();
  g_fc1->bias += g_hidden;
}

}  // namespace

VFNetParams VFNetParams::Zeros(const VFNetShape& s) {
  CheckShape(s);
  return {ZeroLayer(s.voice_dim, s.hidden_dim), ZeroLayer(s.hidden_dim, s.output_dim),
          ZeroLayer(s.face_dim, s.hidden_dim), ZeroLayer(s.hidden_dim, s.output_dim)};
}

VFNetParams VFNetParams::GlorotUniform(const VFNetShape& s, std::uint64_t seed) {
  CheckShape(s);
  std::mt19937_64 rng(seed);
  VFNetParams p;
  p.voice_fc1 = GlorotLayer(s.voice_dim, s.hidden_dim, rng);
  p.voice_fc2 = GlorotLayer(s.hidden_dim, s.output_dim, rng);
  p.face_fc1 = GlorotLayer(s.face_dim, s.hidden_dim, rng);
  p.face_fc2 = GlorotLayer(s.hidden_dim, s.output_dim, rng);
  return p;
}

VFNetShape VFNetParams::shape() const {
  return {static_cast<int>(voice_fc1.in_dim()), static_cast<int>(face_fc1.in_dim()),
          static_cast<int>(voice_fc1.out_dim()), static_cast<int>(voice_fc2.out_dim())};
}

Eigen::Index VFNetParams::NumParameters() const {
  Eigen::Index n = 0;
  for (const DenseLayer* l : Layers(*this)) n += l->weight.size() + l->bias.size();
  return n;
}

bool VFNetParams::AllFinite() const {
  for (const DenseLayer* l : Layers(*this)) {
    if (!l->weight.allFinite() || !l->bias.allFinite()) return false;
  }
  return true;
}

void VFNetParams::SetZero() {
  for (DenseLayer* l : Layers(*this)) {
    l->weight.setZero();
    l->bias.setZero();
  }
}

Eigen::VectorXd VFNetParams::Flatten() const {
  Eigen::VectorXd flat(NumParameters());
  Eigen::Index k = 0;
  for (const DenseLayer* l : Layers(*this)) {
    for (Eigen::Index r = 0; r < l->weight.rows(); ++r) {
      flat.segment(k, l->weight.cols()) = l->weight.row(r).transpose();
      k += l->weight.cols();
    }
    flat.segment(k, l->bias.size()) = l->bias;
    k += l->bias.size();
  }
  return flat;
}

void VFNetParams::Unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != NumParameters()) {
    throw ValidationError("flat parameter vector has " + std::to_string(flat.size()) +
                          " entries, expected " + std::to_string(NumParameters()));
  }
  Eigen::Index k = 0;
  for (DenseLayer* l : Layers(*this)) {
    for (Eigen::Index r = 0; r < l->weight.rows(); ++r) {
      l->weight.row(r) = flat.segment(k, l->weight.cols()).transpose();
      k += l->weight.cols();
    }
    l->bias = flat.segment(k, l->bias.size());
    k += l->bias.size();
  }
}

Checkpoint VFNetParams::ToCheckpoint() const {
  Checkpoint ckpt("vfnet");
  auto layers = Layers(*this);
  for (size_t i = 0; i < layers.size(); ++i) {
    ckpt.PutMatrix(std::string(kLayerNames[i]) + ".weight", layers[i]->weight);
    ckpt.PutVector(std::string(kLayerNames[i]) + ".bias", layers[i]->bias);
  }
  return ckpt;
}

VFNetParams VFNetParams::FromCheckpoint(const Checkpoint& ckpt) {
  ckpt.ExpectKind("vfnet");
  VFNetParams p;
  auto layers = Layers(p);
  for (size_t i = 0; i < layers.size(); ++i) {
    layers[i]->weight = ckpt.GetMatrix(std::string(kLayerNames[i]) + ".weight");
    layers[i]->bias = ckpt.GetVector(std::string(kLayerNames[i]) + ".bias");
    if (layers[i]->bias.size() != layers[i]->weight.rows()) {
      throw ValidationError(std::string("bias/weight shape mismatch in ") + kLayerNames[i]);
    }
  }
  if (p.voice_fc2.in_dim() != p.voice_fc1.out_dim() ||
      p.face_fc2.in_dim() != p.face_fc1.out_dim() ||
      p.voice_fc2.out_dim() != p.face_fc2.out_dim()) {
    throw ValidationError("inconsistent VFNet layer shapes in checkpoint");
  }
  return p;
}

void VFNetParams::Save(const std::string& path) const { ToCheckpoint().Save(path); }

VFNetParams VFNetParams::Load(const std::string& path) {
  return FromCheckpoint(Checkpoint::Load(path));
}

double Logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd TransformVoice(const VFNetParams& params, const Eigen::VectorXd& voice) {
  return RunBranch(params.voice_fc1, params.voice_fc2, voice, "voice").out;
}

Eigen::VectorXd TransformFace(const VFNetParams& params, const Eigen::VectorXd& face) {
  return RunBranch(params.face_fc1, params.face_fc2, face, "face").out;
}

double CosineSimilarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine similarity of vectors with lengths " +
                          std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0) throw RuntimeFailure("cosine similarity: first argument has zero norm");
  if (nb == 0.0) throw RuntimeFailure("cosine similarity: second argument has zero norm");
  const double s = a.dot(b) / (na * nb);
  return std::clamp(s, -1.0, 1.0);
}

PairScore PairProbability(double similarity) {
  // softmax over (S, 1 - S) == logistic(S - (1 - S)).
  const double p_same = Logistic(2.0 * similarity - 1.0);
  const double p_diff = Logistic(1.0 - 2.0 * similarity);
  return {similarity, p_same, p_diff};
}

double PairLoss(const PairScore& score, PairLabel label) {
  return -std::log(label == PairLabel::kSame ? score.p_same : score.p_diff);
}

PairScore ScorePair(const VFNetParams& params, const Eigen::VectorXd& voice,
                    const Eigen::VectorXd& face) {
  return PairProbability(CosineSimilarity(TransformVoice(params, voice), TransformFace(params, face)));
}

double AccumulatePairGrad(const VFNetParams& params, const Eigen::VectorXd& voice,
                          const Eigen::VectorXd& face, PairLabel label, double weight,
                          VFNetParams* grad) {
  const BranchForward fv = RunBranch(params.voice_fc1, params.voice_fc2, voice, "voice");
  const BranchForward ff = RunBranch(params.face_fc1, params.face_fc2, face, "face");

  const double nv = fv.out.norm();
  const double nf = ff.out.norm();
  if (nv == 0.0 || nf == 0.0) {
    throw RuntimeFailure(std::string("pair gradient undefined: transformed ") +
                         (nv == 0.0 ? "voice" : "face") + " vector has zero norm");
  }
  // Unclamped similarity keeps the gradient consistent with the forward value.
  const double s = fv.out.dot(ff.out) / (nv * nf);
  const PairScore score = PairProbability(s);
  const double loss = PairLoss(score, label);

  // d loss / dz with z = 2S - 1; logistic derivative of the cross-entropy.
  const double dz = label == PairLabel::kSame ? score.p_same - 1.0 : score.p_same;
  const double ds = 2.0 * dz;

  Eigen::VectorXd g_v = ds * (ff.out / (nv * nf) - s * fv.out / (nv * nv));
  Eigen::VectorXd g_f = ds * (fv.out / (nv * nf) - s * ff.out / (nf * nf));

  BackpropBranch(params.voice_fc2, fv, voice, g_v, weight, &grad->voice_fc1, &grad->voice_fc2);
  BackpropBranch(params.face_fc2, ff, face, g_f, weight, &grad->face_fc1, &grad->face_fc2);
  return loss;
}

PairGradient PairGrad(const VFNetParams& params, const Eigen::VectorXd& voice,
                      const Eigen::VectorXd& face, PairLabel label) {
  PairGradient out;
  out.gradient = VFNetParams::Zeros(params.shape());
  out.loss = AccumulatePairGrad(params, voice, face, label, 1.0, &out.gradient);
  return out;
}

MatchChoice MatchOneOfTwo(const VFNetParams& params, const Eigen::VectorXd& voice,
                          const Eigen::VectorXd& face_a, const Eigen::VectorXd& face_b) {
  const Eigen::VectorXd probe = TransformVoice(params, voice);
  const double sa = CosineSimilarity(probe, TransformFace(params, face_a));
  const double sb = CosineSimilarity(probe, TransformFace(params, face_b));
  return sb > sa ? MatchChoice::kSecond : MatchChoice::kFirst;
}

MatchChoice MatchOneOfTwoFaceProbe(const VFNetParams& params, const Eigen::VectorXd& face,
                                   const Eigen::VectorXd& voice_a,
                                   const Eigen::VectorXd& voice_b) {
  const Eigen::VectorXd probe = TransformFace(params, face);
  const double sa = CosineSimilarity(TransformVoice(params, voice_a), probe);
  const double sb = CosineSimilarity(TransformVoice(params, voice_b), probe);
  return sb > sa ? MatchChoice::kSecond : MatchChoice::kFirst;
}

}  // namespace avsr
