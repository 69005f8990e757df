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

#include "avsr/synth.h"

#include <cmath>
#include <cstdio>
#include <random>

#include "avsr/error.h"
#include "avsr/text_io.h"

namespace avsr {
namespace {

enum Stream : std::uint64_t {
  kMixingStream = 0,
  kTrainStream = 1,
  kTestStream = 2,
  kDevStream = 3,
  kEvalStream = 4,
};

std::mt19937_64 SubStream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

Eigen::VectorXd Gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

Eigen::MatrixXd OrthonormalColumns(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) g(r, c) = dist(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Fix column signs so that R has a positive diagonal.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (r(c, c) < 0) q.col(c) = -q.col(c);
  }
  return q;
}

std::string Id(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05d", prefix, index);
  return buf;
}

Eigen::VectorXd Session(const Eigen::MatrixXd& mix, const Eigen::VectorXd& z, double sigma,
                        std::mt19937_64& rng) {
  return mix * z + sigma * Gaussian(mix.rows(), rng);
}

EmbeddingStore GenerateSplit(const GenConfig& c, const MixingMaps& maps, const char* prefix,
                             int n_identities, std::uint64_t stream) {
  std::mt19937_64 rng = SubStream(c.seed, stream);
  EmbeddingStore store(c.d_voice);
  for (int i = 0; i < n_identities; ++i) {
    const std::string identity = Id(prefix, i);
    const Eigen::VectorXd z = Gaussian(c.d_id, rng);
    for (int s = 0; s < c.voice_sessions; ++s) {
      store.Add({identity + "-v" + std::to_string(s), identity, Modality::kVoice,
                 Session(maps.voice, z, c.session_noise_sigma, rng)});
    }
    for (int s = 0; s < c.face_sessions; ++s) {
      store.Add({identity + "-f" + std::to_string(s), identity, Modality::kFace,
                 Session(maps.face, z, c.session_noise_sigma, rng)});
    }
  }
  return store;
}

AvSplit GenerateAvSplit(const GenConfig& c, const AvBenchConfig& av, const MixingMaps& maps,
                        const char* prefix, int n_identities, std::uint64_t stream) {
  std::mt19937_64 rng = SubStream(c.seed, stream);
  const double sigma = c.session_noise_sigma;
  AvSplit split;
  split.store = EmbeddingStore(c.d_voice);
  std::vector<std::pair<std::string, std::string>> enrolls, tests;  // (segment, identity)
  int distractor = 0;
  for (int i = 0; i < n_identities; ++i) {
    const std::string identity = Id(prefix, i);
    const Eigen::VectorXd z = Gaussian(c.d_id, rng);

    const std::string enroll = "enr-" + identity;
    split.store.Add({enroll + "/v0", identity, Modality::kVoice, Session(maps.voice, z, sigma, rng)});
    for (int f = 0; f < av.enroll_faces; ++f) {
      split.store.Add({enroll + "/f" + std::to_string(f), identity, Modality::kFace,
                       Session(maps.face, z, sigma, rng)});
    }
    enrolls.emplace_back(enroll, identity);

    for (int t = 0; t < av.test_segments_per_identity; ++t) {
      const std::string test = "tst-" + identity + "-" + std::to_string(t);
      split.store.Add({test + "/v0", identity, Modality::kVoice, Session(maps.voice, z, sigma, rng)});
      int part = 0;
      for (int f = 0; f < av.test_faces; ++f) {
        split.store.Add({test + "/f" + std::to_string(part++), identity, Modality::kFace,
                         Session(maps.face, z, sigma, rng)});
      }
      for (int f = 0; f < av.distractor_faces; ++f) {
        const Eigen::VectorXd other = Gaussian(c.d_id, rng);
        split.store.Add({test + "/f" + std::to_string(part++),
                         std::string(prefix) + "x" + std::to_string(distractor++), Modality::kFace,
                         Session(maps.face, other, sigma, rng)});
      }
      tests.emplace_back(test, identity);
    }
  }
  for (const auto& [enroll, enroll_identity] : enrolls) {
    for (const auto& [test, test_identity] : tests) {
      split.trials.Add({enroll, test,
                        enroll_identity == test_identity ? TrialLabel::kTarget
                                                         : TrialLabel::kNontarget});
    }
  }
  return split;
}

}  // namespace

void GenConfig::Validate() const {
  if (d_id < 1 || d_voice < 1 || d_face < 1) throw ValidationError("dimensions must be positive");
  if (d_id > d_voice || d_id > d_face) {
    throw ValidationError("d_id must not exceed d_voice or d_face");
  }
  if (d_voice != d_face) {
    throw ValidationError("d_voice must equal d_face (voice and face share one store)");
  }
  if (n_identities_train < 0 || n_identities_test < 0) {
    throw ValidationError("identity counts must be non-negative");
  }
  if (voice_sessions < 1 || face_sessions < 1) {
    throw ValidationError("session counts must be positive");
  }
  if (!(session_noise_sigma > 0.0) || !std::isfinite(session_noise_sigma)) {
    throw ValidationError("session_noise_sigma must be positive");
  }
}

const std::vector<std::string>& GenConfig::KvKeys() {
  static const std::vector<std::string> keys = {
      "d_id",          "d_voice",        "d_face",        "n_identities_train",
      "n_identities_test", "voice_sessions", "face_sessions", "session_noise_sigma",
      "seed"};
  return keys;
}

KvConfig GenConfig::ToKv() const {
  KvConfig kv;
  kv.Set("d_id", std::to_string(d_id));
  kv.Set("d_voice", std::to_string(d_voice));
  kv.Set("d_face", std::to_string(d_face));
  kv.Set("n_identities_train", std::to_string(n_identities_train));
  kv.Set("n_identities_test", std::to_string(n_identities_test));
  kv.Set("voice_sessions", std::to_string(voice_sessions));
  kv.Set("face_sessions", std::to_string(face_sessions));
  kv.Set("session_noise_sigma", FormatDouble(session_noise_sigma));
  kv.Set("seed", std::to_string(seed));
  return kv;
}

GenConfig GenConfig::FromKv(const KvConfig& kv) {
  GenConfig c;
  c.d_id = static_cast<int>(kv.GetInt("d_id", c.d_id));
  c.d_voice = static_cast<int>(kv.GetInt("d_voice", c.d_voice));
  c.d_face = static_cast<int>(kv.GetInt("d_face", c.d_face));
  c.n_identities_train = static_cast<int>(kv.GetInt("n_identities_train", c.n_identities_train));
  c.n_identities_test = static_cast<int>(kv.GetInt("n_identities_test", c.n_identities_test));
  c.voice_sessions = static_cast<int>(kv.GetInt("voice_sessions", c.voice_sessions));
  c.face_sessions = static_cast<int>(kv.GetInt("face_sessions", c.face_sessions));
  c.session_noise_sigma = kv.GetDouble("session_noise_sigma", c.session_noise_sigma);
  c.seed = static_cast<std::uint64_t>(kv.GetInt("seed", static_cast<long long>(c.seed)));
  c.Validate();
  return c;
}

MixingMaps DrawMixingMaps(const GenConfig& config) {
  config.Validate();
  std::mt19937_64 rng = SubStream(config.seed, kMixingStream);
  MixingMaps maps;
  maps.voice = OrthonormalColumns(config.d_voice, config.d_id, rng);
  maps.face = OrthonormalColumns(config.d_face, config.d_id, rng);
  return maps;
}

SynthData Generate(const GenConfig& config) {
  const MixingMaps maps = DrawMixingMaps(config);
  SynthData data;
  data.config = config;
  data.train = GenerateSplit(config, maps, "tr", config.n_identities_train, kTrainStream);
  data.test = GenerateSplit(config, maps, "te", config.n_identities_test, kTestStream);
  return data;
}

OracleScorer::OracleScorer(const GenConfig& config)
    : maps_(DrawMixingMaps(config)),
      sigma2_(config.session_noise_sigma * config.session_noise_sigma) {}

double OracleScorer::Score(const Eigen::VectorXd& voice, const Eigen::VectorXd& face) const {
  if (voice.size() != maps_.voice.rows() || face.size() != maps_.face.rows()) {
    throw ValidationError("oracle score: embedding dimension does not match the generator");
  }
  // Components orthogonal to the mixing maps are identity-free noise with the
  // same law under both hypotheses, so the llr only depends on the projections,
  // which are z + sigma * n with n ~ N(0, I) on each side.
  const Eigen::VectorXd u = maps_.voice.transpose() * voice;
  const Eigen::VectorXd w = maps_.face.transpose() * face;
  const double a = 1.0 + sigma2_;
  const double det_same = a * a - 1.0;
  const double d = static_cast<double>(u.size());
  const double quad_same = (a * u.squaredNorm() + a * w.squaredNorm() - 2.0 * u.dot(w)) / det_same;
  const double quad_diff = (u.squaredNorm() + w.squaredNorm()) / a;
  return -0.5 * quad_same + 0.5 * quad_diff - 0.5 * d * std::log(det_same) + d * std::log(a);
}

double OracleScore(const GenConfig& config, const Eigen::VectorXd& voice,
                   const Eigen::VectorXd& face) {
  return OracleScorer(config).Score(voice, face);
}

void AvBenchConfig::Validate() const {
  if (n_identities_dev < 2 || n_identities_eval < 2) {
    throw ValidationError("AV splits need at least 2 identities each");
  }
  if (test_segments_per_identity < 1 || enroll_faces < 1 || test_faces < 1 ||
      distractor_faces < 0) {
    throw ValidationError("AV segment counts out of range");
  }
}

const std::vector<std::string>& AvBenchConfig::KvKeys() {
  static const std::vector<std::string> keys = {
      "n_identities_dev", "n_identities_eval", "test_segments_per_identity",
      "enroll_faces",     "test_faces",        "distractor_faces"};
  return keys;
}

KvConfig AvBenchConfig::ToKv() const {
  KvConfig kv;
  kv.Set("n_identities_dev", std::to_string(n_identities_dev));
  kv.Set("n_identities_eval", std::to_string(n_identities_eval));
  kv.Set("test_segments_per_identity", std::to_string(test_segments_per_identity));
  kv.Set("enroll_faces", std::to_string(enroll_faces));
  kv.Set("test_faces", std::to_string(test_faces));
  kv.Set("distractor_faces", std::to_string(distractor_faces));
  return kv;
}

AvBenchConfig AvBenchConfig::FromKv(const KvConfig& kv) {
  AvBenchConfig c;
  c.n_identities_dev = static_cast<int>(kv.GetInt("n_identities_dev", c.n_identities_dev));
  c.n_identities_eval = static_cast<int>(kv.GetInt("n_identities_eval", c.n_identities_eval));
  c.test_segments_per_identity =
      static_cast<int>(kv.GetInt("test_segments_per_identity", c.test_segments_per_identity));
  c.enroll_faces = static_cast<int>(kv.GetInt("enroll_faces", c.enroll_faces));
  c.test_faces = static_cast<int>(kv.GetInt("test_faces", c.test_faces));
  c.distractor_faces = static_cast<int>(kv.GetInt("distractor_faces", c.distractor_faces));
  c.Validate();
  return c;
}

AvBench GenerateAvBench(const GenConfig& config, const AvBenchConfig& av) {
  av.Validate();
  const MixingMaps maps = DrawMixingMaps(config);
  return {GenerateAvSplit(config, av, maps, "dv", av.n_identities_dev, kDevStream),
          GenerateAvSplit(config, av, maps, "ev", av.n_identities_eval, kEvalStream)};
}

}  // namespace avsr
