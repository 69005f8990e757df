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

#include <cmath>
#include <random>

#include "avsr/error.h"
#include "avsr/vfnet.h"
#include "doctest.h"
#include "oracles.h"

namespace avsr {
namespace {

using testing::RandomVector;

// Both branches: fc1 = identity, fc2 = identity, zero biases.
VFNetParams IdentityNet(int dim) {
  VFNetParams p = VFNetParams::Zeros({dim, dim, dim, dim});
  for (DenseLayer* l : {&p.voice_fc1, &p.voice_fc2, &p.face_fc1, &p.face_fc2}) {
    l->weight.setIdentity();
  }
  return p;
}

TEST_CASE("zero input with zero biases maps to zero output") {
  const auto p = VFNetParams::GlorotUniform({6, 5, 4, 3}, 1);
  CHECK(TransformVoice(p, Eigen::VectorXd::Zero(6)).isZero(0.0));
  CHECK(TransformFace(p, Eigen::VectorXd::Zero(5)).isZero(0.0));
}

TEST_CASE("toy 4-3-2 network evaluates to the hand-computed output") {
  VFNetParams p = VFNetParams::Zeros({4, 4, 3, 2});
  p.voice_fc1.weight << 1, 0, 0, 0,  //
      0, 1, 0, 0,                    //
      0, 0, 1, 0;
  p.voice_fc2.weight.setOnes();
  // relu([1,1,1]) summed by each output row -> 3.
  const Eigen::VectorXd out = TransformVoice(p, Eigen::VectorXd::Ones(4));
  CHECK(out == Eigen::Vector2d(3.0, 3.0));
  p.voice_fc2.bias << 0.5, -1.0;
  CHECK(TransformVoice(p, Eigen::VectorXd::Ones(4)) == Eigen::Vector2d(3.5, 2.0));
}

TEST_CASE("units with negative pre-activation contribute nothing downstream") {
  VFNetParams p = VFNetParams::GlorotUniform({3, 3, 4, 2}, 7);
  p.voice_fc1.bias << 0.0, -100.0, 0.0, -100.0;
  const Eigen::Vector3d x(0.3, -0.2, 0.5);
  const Eigen::VectorXd before = TransformVoice(p, x);
  p.voice_fc2.weight.col(1).setConstant(42.0);
  p.voice_fc2.weight.col(3).setConstant(-42.0);
  CHECK(TransformVoice(p, x) == before);
}

TEST_CASE("transforms reject inputs of the wrong dimension") {
  const auto p = VFNetParams::GlorotUniform({4, 5, 3, 2}, 1);
  CHECK_THROWS_AS(TransformVoice(p, Eigen::VectorXd::Ones(5)), ValidationError);
  CHECK_THROWS_AS(TransformFace(p, Eigen::VectorXd::Ones(4)), ValidationError);
}

TEST_CASE("cosine similarity basics") {
  const Eigen::Vector3d a(1.0, -2.0, 0.5);
  CHECK(CosineSimilarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(CosineSimilarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 3)) == 0.0);
  CHECK(CosineSimilarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0)) == -1.0);
}

TEST_CASE("cosine similarity names the zero-norm argument") {
  const Eigen::Vector2d z(0, 0), a(1, 2);
  try {
    CosineSimilarity(z, a);
    FAIL("expected an error");
  } catch (const RuntimeFailure& e) {
    CHECK(std::string(e.what()).find("first") != std::string::npos);
  }
  try {
    CosineSimilarity(a, z);
    FAIL("expected an error");
  } catch (const RuntimeFailure& e) {
    CHECK(std::string(e.what()).find("second") != std::string::npos);
  }
}

TEST_CASE("cosine similarity is invariant to positive rescaling") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd a = RandomVector(rng, 7), b = RandomVector(rng, 7);
    CHECK(std::abs(CosineSimilarity(scale(rng) * a, scale(rng) * b) - CosineSimilarity(a, b)) <
          1e-12);
  }
}

TEST_CASE("pair probability at reference similarities") {
  const PairScore half = PairProbability(0.5);
  CHECK(half.p_same == 0.5);
  CHECK(half.p_diff == 0.5);
  const double e = std::exp(1.0);
  CHECK(PairProbability(1.0).p_same == doctest::Approx(e / (e + 1.0)).epsilon(1e-14));
  CHECK(PairProbability(1.0).p_same == doctest::Approx(0.731059).epsilon(1e-6));
  CHECK(PairProbability(0.0).p_same == doctest::Approx(0.268941).epsilon(1e-6));
  CHECK(std::abs(PairProbability(0.0).p_same + PairProbability(1.0).p_same - 1.0) < 1e-15);
}

TEST_CASE("pair probability equals the two-way softmax and is normalized") {
  for (int i = 0; i <= 2000; ++i) {
    const double s = -10.0 + 20.0 * i / 2000.0;
    const PairScore p = PairProbability(s);
    const double softmax = std::exp(s) / (std::exp(s) + std::exp(1.0 - s));
    CHECK(std::abs(p.p_same - softmax) < 1e-12);
    CHECK(std::abs(p.p_same + p.p_diff - 1.0) < 1e-12);
  }
}

TEST_CASE("pair loss reference values") {
  CHECK(PairLoss(PairProbability(0.5), PairLabel::kSame) ==
        doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(PairLoss(PairProbability(1.0), PairLabel::kSame) ==
        doctest::Approx(0.313262).epsilon(1e-6));
  CHECK(PairLoss(PairScore{0.0, 1.0 - 1e-15, 1e-15}, PairLabel::kSame) < 1e-14);
  CHECK(PairLoss(PairProbability(0.3), PairLabel::kDifferent) ==
        doctest::Approx(-std::log(PairProbability(0.3).p_diff)));
}

TEST_CASE("loss slope in the similarity is -2(1 - p_same) for same-identity pairs") {
  for (double s : {-0.9, -0.2, 0.0, 0.4, 0.95}) {
    const double h = 1e-6;
    const double numeric = (PairLoss(PairProbability(s + h), PairLabel::kSame) -
                            PairLoss(PairProbability(s - h), PairLabel::kSame)) /
                           (2 * h);
    CHECK(numeric == doctest::Approx(-2.0 * (1.0 - PairProbability(s).p_same)).epsilon(1e-7));
    CHECK(numeric < 0.0);
  }
}

TEST_CASE("pair gradient is finite and matches central differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const VFNetShape shape{5, 4, 6, 3};
    VFNetParams p = VFNetParams::GlorotUniform(shape, 100 + trial);
    p.voice_fc1.bias = RandomVector(rng, 6, 0.1);
    p.face_fc2.bias = RandomVector(rng, 3, 0.1);
    const Eigen::VectorXd v = RandomVector(rng, 5), f = RandomVector(rng, 4);
    const PairLabel label = trial % 2 ? PairLabel::kSame : PairLabel::kDifferent;
    const PairGradient g = PairGrad(p, v, f, label);
    CHECK(g.gradient.AllFinite());
    CHECK(g.loss == doctest::Approx(testing::ReferenceLoss(p, v, f, label)).epsilon(1e-12));
    const Eigen::VectorXd analytic = g.gradient.Flatten();
    const Eigen::VectorXd numeric = testing::FiniteDifferenceGrad(p, v, f, label, 1e-5);
    // Ten random coordinates, as a quick check; the acceptance suite checks all.
    std::uniform_int_distribution<Eigen::Index> pick(0, analytic.size() - 1);
    for (int k = 0; k < 10; ++k) {
      const Eigen::Index i = pick(rng);
      if (std::abs(analytic[i]) < 1e-8) {
        CHECK(std::abs(numeric[i]) < 1e-8);
      } else {
        CHECK(std::abs(analytic[i] - numeric[i]) / std::abs(analytic[i]) < 1e-4);
      }
    }
  }
}

TEST_CASE("gradient through a zero transformed vector is an error") {
  VFNetParams p = VFNetParams::GlorotUniform({3, 3, 4, 2}, 5);
  p.voice_fc2.weight.setZero();
  CHECK_THROWS_AS(PairGrad(p, Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 0, 0), PairLabel::kSame),
                  RuntimeFailure);
}

TEST_CASE("glorot initialization respects the fan bound and zero biases") {
  const VFNetShape shape{512, 512, 256, 128};
  const auto p = VFNetParams::GlorotUniform(shape, 9);
  const double b1 = std::sqrt(6.0 / (512 + 256));
  const double b2 = std::sqrt(6.0 / (256 + 128));
  CHECK(p.voice_fc1.weight.cwiseAbs().maxCoeff() <= b1);
  CHECK(p.face_fc2.weight.cwiseAbs().maxCoeff() <= b2);
  CHECK(p.voice_fc1.weight.cwiseAbs().maxCoeff() > 0.9 * b1);
  CHECK(p.voice_fc1.bias.isZero(0.0));
  CHECK(p.face_fc2.bias.isZero(0.0));
  CHECK(p.shape() == shape);
  CHECK(VFNetParams::GlorotUniform(shape, 9) == p);
  CHECK_FALSE(VFNetParams::GlorotUniform(shape, 10) == p);
  CHECK(p.NumParameters() == 2 * (512 * 256 + 256 + 256 * 128 + 128));
}

TEST_CASE("parameters round-trip through flatten and checkpoint files") {
  auto p = VFNetParams::GlorotUniform({7, 6, 5, 4}, 2);
  p.face_fc1.bias.setConstant(0.1 + 0.2);
  VFNetParams q = VFNetParams::Zeros(p.shape());
  q.Unflatten(p.Flatten());
  CHECK(q == p);

  testing::TempDir dir("vfnet");
  p.Save(dir.File("m.ckpt"));
  CHECK(VFNetParams::Load(dir.File("m.ckpt")) == p);
}

TEST_CASE("one-of-two matching picks the closer face and breaks ties toward the first") {
  const VFNetParams p = IdentityNet(2);
  const Eigen::Vector2d voice(1.0, 0.0);
  const Eigen::Vector2d near(0.9, std::sqrt(1.0 - 0.81));
  const Eigen::Vector2d far(0.1, std::sqrt(1.0 - 0.01));
  CHECK(ScorePair(p, voice, near).similarity == doctest::Approx(0.9));
  CHECK(ScorePair(p, voice, far).similarity == doctest::Approx(0.1));
  CHECK(MatchOneOfTwo(p, voice, near, far) == MatchChoice::kFirst);
  CHECK(MatchOneOfTwo(p, voice, far, near) == MatchChoice::kSecond);
  CHECK(MatchOneOfTwo(p, voice, near, near) == MatchChoice::kFirst);
  CHECK(MatchOneOfTwoFaceProbe(p, near, voice, voice) == MatchChoice::kFirst);
}

TEST_CASE("one-of-two matching follows p_same and ignores face rescaling with zero biases") {
  // Zero biases make each branch positively homogeneous, so rescaling a face
  // cannot change its cosine with the voice.
  const VFNetParams p = VFNetParams::GlorotUniform({6, 6, 32, 4}, 21);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> scale(0.05, 20.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd v = RandomVector(rng, 6);
    const Eigen::VectorXd a = RandomVector(rng, 6);
    const Eigen::VectorXd b = RandomVector(rng, 6);
    const MatchChoice c = MatchOneOfTwo(p, v, a, b);
    const bool by_p = ScorePair(p, v, b).p_same > ScorePair(p, v, a).p_same;
    CHECK((c == MatchChoice::kSecond) == by_p);
    CHECK(MatchOneOfTwo(p, v, scale(rng) * a, b) == c);
    CHECK(MatchOneOfTwo(p, v, a, scale(rng) * b) == c);
  }
}

}  // namespace
}  // namespace avsr
