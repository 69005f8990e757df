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

#ifndef AVSR_SYNTH_H_
#define AVSR_SYNTH_H_

// Linear-Gaussian voice/face embedding generator with a known shared
// identity space, and its exact Bayes scorer.
//
// Per identity z ~ N(0, I_{d_id}); a voice session is A_v z + sigma * n and a
// face session A_f z + sigma * n, where A_v, A_f have orthonormal columns drawn
// from the seed.

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "avsr/embedding_store.h"
#include "avsr/kv_config.h"

namespace avsr {

struct GenConfig {
  int d_id = 16;
  int d_voice = 64;
  int d_face = 64;
  int n_identities_train = 500;
  int n_identities_test = 100;
  int voice_sessions = 4;
  int face_sessions = 4;
  double session_noise_sigma = 0.5;
  std::uint64_t seed = 1;

  // Throws ValidationError. Voice and face share one store, so d_voice must
  // equal d_face.
  void Validate() const;

  KvConfig ToKv() const;
  static GenConfig FromKv(const KvConfig& kv);
  static const std::vector<std::string>& KvKeys();
};

struct MixingMaps {
  Eigen::MatrixXd voice;  // d_voice x d_id, orthonormal columns
  Eigen::MatrixXd face;   // d_face x d_id, orthonormal columns
};

MixingMaps DrawMixingMaps(const GenConfig& config);

struct SynthData {
  EmbeddingStore train;  // identities "tr%05d"
  EmbeddingStore test;   // identities "te%05d"
  GenConfig config;
};

// Deterministic in config.seed; train and test identities are disjoint.
SynthData Generate(const GenConfig& config);

// Exact same-vs-different identity log-likelihood ratio of a (voice, face)
// pair under the generating model.
class OracleScorer {
 public:
  explicit OracleScorer(const GenConfig& config);
  double Score(const Eigen::VectorXd& voice, const Eigen::VectorXd& face) const;

 private:
  MixingMaps maps_;
  double sigma2_;
};

double OracleScore(const GenConfig& config, const Eigen::VectorXd& voice,
                   const Eigen::VectorXd& face);

// SRE-style audio-visual evaluation sets drawn from the same generator.
// Record ids are "<segment>/<part>"; an enrollment segment holds one voice
// and `enroll_faces` faces of its speaker, a test segment one voice and
// `test_faces` faces of its speaker plus `distractor_faces` faces of
// unrelated people. Trials pair every enrollment segment with every test
// segment of the same split.
struct AvBenchConfig {
  int n_identities_dev = 200;
  int n_identities_eval = 300;
  int test_segments_per_identity = 2;
  int enroll_faces = 3;
  int test_faces = 3;
  int distractor_faces = 2;

  void Validate() const;
  KvConfig ToKv() const;
  static AvBenchConfig FromKv(const KvConfig& kv);
  static const std::vector<std::string>& KvKeys();
};

struct AvSplit {
  EmbeddingStore store;
  TrialSet trials;
};

struct AvBench {
  AvSplit dev;   // identities "dv%05d"
  AvSplit eval;  // identities "ev%05d"
};

AvBench GenerateAvBench(const GenConfig& config, const AvBenchConfig& av);

}  // namespace avsr

#endif  // AVSR_SYNTH_H_
