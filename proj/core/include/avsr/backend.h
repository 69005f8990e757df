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

#ifndef AVSR_BACKEND_H_
#define AVSR_BACKEND_H_

// Single-modality scoring back-ends: LDA followed by a two-covariance PLDA
// for voice embeddings, cosine scoring with top-fraction pooling for faces,
// and top-fraction pooling of VFNet voice-to-face probabilities.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avsr/checkpoint.h"
#include "avsr/embedding_store.h"
#include "avsr/vfnet.h"

namespace avsr {

// Vectors grouped by class (identity); one inner vector per class.
using ClassGroups = std::vector<std::vector<Eigen::VectorXd>>;

// Groups every record of `store` by identity, in sorted identity order.
ClassGroups GroupByIdentity(const EmbeddingStore& store);

struct LdaTransform {
  Eigen::MatrixXd projection;  // out x in
  Eigen::VectorXd mean;        // in

  int input_dim() const { return static_cast<int>(projection.cols()); }
  int output_dim() const { return static_cast<int>(projection.rows()); }
  Eigen::VectorXd Apply(const Eigen::VectorXd& x) const;
};

// Fisher LDA. Keeps the top min(target_dim, classes - 1, D) generalized
// eigenvectors of between- vs within-class scatter, scaled so the projected
// within-class covariance of the training data is the identity. A singular
// within-class scatter is regularized with 1e-4 * trace / D and a warning.
LdaTransform FitLda(const ClassGroups& classes, int target_dim);
LdaTransform FitLda(const EmbeddingStore& store, int target_dim);

// Two-covariance model: identity y ~ N(mean, between), observation
// x ~ N(y, within).
struct PldaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd between;
  Eigen::MatrixXd within;

  int dim() const { return static_cast<int>(mean.size()); }
  // Throws ValidationError unless shapes agree, both matrices are symmetric
  // (1e-10), `within` is positive definite and `between` is PSD.
  void Validate() const;
};

struct PldaFitOptions {
  int max_iterations = 100;
  // Stop once the per-sample log-likelihood gain falls below this.
  double tolerance = 1e-6;
};

struct PldaFitResult {
  PldaModel model;
  // Total log-likelihood of the training data: initial model first, then one
  // entry per EM iteration.
  std::vector<double> log_likelihood;
  bool converged = false;
};

PldaFitResult FitPlda(const ClassGroups& classes, const PldaFitOptions& options = {});

// Marginal log-likelihood of grouped data under the model.
double PldaLogLikelihood(const PldaModel& model, const ClassGroups& classes);

// Closed-form same/different-identity log-likelihood ratio for single
// enrollment and test vectors, with the quadratic forms precomputed.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& model);
  double Llr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd q_;  // applied to each side
  Eigen::MatrixXd p_;  // cross term
  double offset_ = 0.0;
};

double PldaLlr(const PldaModel& model, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// LDA projection, optional length normalization to norm sqrt(dim), then PLDA.
struct AudioBackend {
  LdaTransform lda;
  PldaModel plda;
  bool length_normalize = true;

  Eigen::VectorXd Project(const Eigen::VectorXd& x) const;

  Checkpoint ToCheckpoint() const;
  static AudioBackend FromCheckpoint(const Checkpoint& ckpt);
  void Save(const std::string& path) const;
  static AudioBackend Load(const std::string& path);
};

struct AudioBackendOptions {
  int lda_dim = 150;
  bool length_normalize = true;
  PldaFitOptions plda;
};

// Fits LDA and PLDA on the voice records of `store`.
AudioBackend FitAudioBackend(const EmbeddingStore& store, const AudioBackendOptions& options);

struct PoolingRule {
  double fraction = 0.2;

  void Validate() const;  // fraction in (0, 1]
  // max(1, ceil(fraction * n)), tolerant of binary rounding of the product.
  size_t TopK(size_t n) const;
};

// Mean of the TopK(n) largest scores. Throws ValidationError on empty input.
double PoolTopFraction(std::span<const double> scores, const PoolingRule& rule);

// Cosine of the length-normalized mean enrollment face against each test
// face, pooled.
double ScoreFaceTrial(std::span<const Eigen::VectorXd> enroll_faces,
                      std::span<const Eigen::VectorXd> test_faces, const PoolingRule& rule);

// VFNet p_same of the enrollment voice against each test face, pooled.
double ScoreVfnetTrial(const VFNetParams& params, const Eigen::VectorXd& enroll_voice,
                       std::span<const Eigen::VectorXd> test_faces, const PoolingRule& rule);

}  // namespace avsr

#endif  // AVSR_BACKEND_H_
