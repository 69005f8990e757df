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

#include "avsr/backend.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>

#include "avsr/error.h"
#include "avsr/log.h"

namespace avsr {
namespace {

constexpr double kEigenFloor = 1e-10;

Eigen::MatrixXd Symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Clamps eigenvalues of a symmetric matrix from below; warns when it had to.
Eigen::MatrixXd FloorEigenvalues(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Symmetrize(m));
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() >= kEigenFloor) return Symmetrize(m);
  Warn(std::string("PLDA ") + what + " covariance collapsed (min eigenvalue " +
       std::to_string(ev.minCoeff()) + "); flooring at 1e-10");
  ev = ev.cwiseMax(kEigenFloor);
  return Symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

double LogDetSpd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw RuntimeFailure("matrix is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

void CheckGroups(const ClassGroups& classes, const char* who) {
  if (classes.size() < 2) throw ValidationError(std::string(who) + " needs at least 2 classes");
  Eigen::Index dim = -1;
  for (const auto& c : classes) {
    if (c.empty()) throw ValidationError(std::string(who) + ": empty class");
    for (const auto& x : c) {
      if (dim < 0) dim = x.size();
      if (x.size() != dim) throw ValidationError(std::string(who) + ": dimension mismatch");
    }
  }
}

// Per-class sufficient statistics.
struct ClassStats {
  double n = 0.0;
  Eigen::VectorXd sum;
  Eigen::MatrixXd scatter;  // sum of x x^T
};

std::vector<ClassStats> ComputeStats(const ClassGroups& classes) {
  std::vector<ClassStats> out;
  out.reserve(classes.size());
  const Eigen::Index d = classes.front().front().size();
  for (const auto& c : classes) {
    ClassStats s{static_cast<double>(c.size()), Eigen::VectorXd::Zero(d),
                 Eigen::MatrixXd::Zero(d, d)};
    for (const auto& x : c) {
      s.sum += x;
      s.scatter.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
    s.scatter = s.scatter.selfadjointView<Eigen::Lower>();
    out.push_back(std::move(s));
  }
  return out;
}

double ClassLogLikelihood(const ClassStats& s, const Eigen::VectorXd& mean,
                          const Eigen::MatrixXd& between, const Eigen::MatrixXd& within,
                          const Eigen::MatrixXd& within_inv, double log_det_within) {
  const double d = static_cast<double>(mean.size());
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const Eigen::VectorXd xbar = s.sum / s.n;
  const Eigen::MatrixXd centered_scatter = s.scatter - s.n * xbar * xbar.transpose();
  const double within_quad = (within_inv.cwiseProduct(centered_scatter)).sum();

  const Eigen::MatrixXd cov_mean = between + within / s.n;
  Eigen::LLT<Eigen::MatrixXd> llt(cov_mean);
  if (llt.info() != Eigen::Success) throw RuntimeFailure("PLDA marginal covariance not PD");
  const Eigen::VectorXd diff = xbar - mean;
  const double mahal = llt.matrixL().solve(diff).squaredNorm();
  const double log_det_cov = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();

  return -0.5 * (s.n - 1.0) * d * log2pi - 0.5 * (s.n - 1.0) * log_det_within -
         0.5 * d * std::log(s.n) - 0.5 * within_quad - 0.5 * d * log2pi - 0.5 * log_det_cov -
         0.5 * mahal;
}

double LogLikelihoodFromStats(const std::vector<ClassStats>& stats, const PldaModel& m) {
  const Eigen::MatrixXd within_inv = m.within.llt().solve(
      Eigen::MatrixXd::Identity(m.dim(), m.dim()));
  const double log_det_within = LogDetSpd(m.within);
  double total = 0.0;
  for (const auto& s : stats) {
    total += ClassLogLikelihood(s, m.mean, m.between, m.within, within_inv, log_det_within);
  }
  return total;
}

}  // namespace

ClassGroups GroupByIdentity(const EmbeddingStore& store) {
  std::map<std::string, std::vector<Eigen::VectorXd>> groups;
  for (const auto& r : store.records()) groups[r.identity_id].push_back(r.vector);
  ClassGroups out;
  out.reserve(groups.size());
  for (auto& [id, vecs] : groups) out.push_back(std::move(vecs));
  return out;
}

Eigen::VectorXd LdaTransform::Apply(const Eigen::VectorXd& x) const {
  if (x.size() != mean.size()) {
    throw ValidationError("LDA input has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(mean.size()));
  }
  return projection * (x - mean);
}

LdaTransform FitLda(const ClassGroups& classes, int target_dim) {
  if (target_dim < 1) throw ValidationError("LDA target dimension must be positive");
  CheckGroups(classes, "LDA");
  const bool any_repeat = std::any_of(classes.begin(), classes.end(),
                                      [](const auto& c) { return c.size() >= 2; });
  if (!any_repeat) throw ValidationError("LDA needs at least one class with 2 or more samples");

  const Eigen::Index d = classes.front().front().size();
  double n_total = 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& c : classes) {
    for (const auto& x : c) mean += x;
    n_total += static_cast<double>(c.size());
  }
  mean /= n_total;

  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(d, d);
  for (const auto& c : classes) {
    Eigen::VectorXd cm = Eigen::VectorXd::Zero(d);
    for (const auto& x : c) cm += x;
    cm /= static_cast<double>(c.size());
    for (const auto& x : c) sw.selfadjointView<Eigen::Lower>().rankUpdate(x - cm);
    sb.selfadjointView<Eigen::Lower>().rankUpdate(cm - mean, static_cast<double>(c.size()));
  }
  sw = Eigen::MatrixXd(sw.selfadjointView<Eigen::Lower>()) / n_total;
  sb = Eigen::MatrixXd(sb.selfadjointView<Eigen::Lower>()) / n_total;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sw_eig(sw, Eigen::EigenvaluesOnly);
  const double max_ev = sw_eig.eigenvalues().maxCoeff();
  if (sw_eig.eigenvalues().minCoeff() <= 1e-10 * std::max(max_ev, 1e-300)) {
    double lambda = 1e-4 * sw.trace() / static_cast<double>(d);
    if (lambda <= 0.0) lambda = 1e-4;
    Warn("LDA within-class scatter is singular; adding " + std::to_string(lambda) +
         " to the diagonal");
    sw.diagonal().array() += lambda;
  }

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sb, sw);
  if (ges.info() != Eigen::Success) throw RuntimeFailure("LDA eigen decomposition failed");

  const Eigen::Index keep = std::min<Eigen::Index>(
      {static_cast<Eigen::Index>(target_dim), static_cast<Eigen::Index>(classes.size()) - 1, d});
  LdaTransform lda;
  lda.mean = mean;
  lda.projection.resize(keep, d);
  // Eigenvalues ascend; take the largest first. Vectors satisfy v' Sw v = 1.
  for (Eigen::Index i = 0; i < keep; ++i) {
    Eigen::VectorXd v = ges.eigenvectors().col(d - 1 - i);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    lda.projection.row(i) = v.transpose();
  }
  return lda;
}

LdaTransform FitLda(const EmbeddingStore& store, int target_dim) {
  return FitLda(GroupByIdentity(store), target_dim);
}

void PldaModel::Validate() const {
  const Eigen::Index d = mean.size();
  if (d == 0) throw ValidationError("PLDA model is empty");
  if (between.rows() != d || between.cols() != d || within.rows() != d || within.cols() != d) {
    throw ValidationError("PLDA covariance shapes do not match the mean");
  }
  if (!mean.allFinite() || !between.allFinite() || !within.allFinite()) {
    throw ValidationError("PLDA model has non-finite entries");
  }
  if ((between - between.transpose()).cwiseAbs().maxCoeff() > 1e-10 ||
      (within - within.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ValidationError("PLDA covariances must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> w(within, Eigen::EigenvaluesOnly);
  if (w.eigenvalues().minCoeff() <= 0.0) {
    throw ValidationError("PLDA within covariance must be positive definite");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> b(between, Eigen::EigenvaluesOnly);
  if (b.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, b.eigenvalues().maxCoeff())) {
    throw ValidationError("PLDA between covariance must be positive semidefinite");
  }
}

double PldaLogLikelihood(const PldaModel& model, const ClassGroups& classes) {
  model.Validate();
  CheckGroups(classes, "PLDA");
  return LogLikelihoodFromStats(ComputeStats(classes), model);
}

PldaFitResult FitPlda(const ClassGroups& classes, const PldaFitOptions& options) {
  CheckGroups(classes, "PLDA");
  if (options.max_iterations < 0) throw ValidationError("max_iterations must be >= 0");
  const std::vector<ClassStats> stats = ComputeStats(classes);
  const Eigen::Index d = classes.front().front().size();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);

  double n_total = 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd total_scatter = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : stats) {
    n_total += s.n;
    mean += s.sum;
    total_scatter += s.scatter;
  }
  mean /= n_total;
  const Eigen::MatrixXd total_cov = total_scatter / n_total - mean * mean.transpose();

  // Moment-based initialization.
  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : stats) {
    const Eigen::VectorXd cm = s.sum / s.n;
    within += s.scatter - s.n * cm * cm.transpose();
    between += (cm - mean) * (cm - mean).transpose();
  }
  const double k = static_cast<double>(stats.size());
  if (n_total > k) {
    within /= (n_total - k);
    between /= k;
  } else {
    within = 0.5 * total_cov;
    between = 0.5 * total_cov;
  }

  PldaFitResult result;
  result.model = {mean, FloorEigenvalues(between, "between"), FloorEigenvalues(within, "within")};
  result.log_likelihood.push_back(LogLikelihoodFromStats(stats, result.model));

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const PldaModel& cur = result.model;
    const Eigen::MatrixXd b_inv = cur.between.llt().solve(eye);
    const Eigen::MatrixXd w_inv = cur.within.llt().solve(eye);
    const Eigen::VectorXd b_inv_mu = b_inv * cur.mean;

    // Posterior covariance depends only on the class size.
    std::map<double, Eigen::MatrixXd> post_cov_by_n;
    std::vector<Eigen::VectorXd> post_mean(stats.size());
    Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd between_acc = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd within_acc = Eigen::MatrixXd::Zero(d, d);
    for (size_t i = 0; i < stats.size(); ++i) {
      const ClassStats& s = stats[i];
      auto it = post_cov_by_n.find(s.n);
      if (it == post_cov_by_n.end()) {
        Eigen::MatrixXd precision = b_inv + s.n * w_inv;
        it = post_cov_by_n.emplace(s.n, Symmetrize(precision.llt().solve(eye))).first;
      }
      const Eigen::MatrixXd& cov = it->second;
      post_mean[i] = cov * (b_inv_mu + w_inv * s.sum);
      const Eigen::VectorXd& y = post_mean[i];
      mean_acc += y;
      between_acc += cov + y * y.transpose();
      within_acc += s.scatter - s.sum * y.transpose() - y * s.sum.transpose() +
                    s.n * (y * y.transpose() + cov);
    }
    PldaModel next;
    next.mean = mean_acc / k;
    next.between =
        FloorEigenvalues(between_acc / k - next.mean * next.mean.transpose(), "between");
    next.within = FloorEigenvalues(within_acc / n_total, "within");

    const double ll = LogLikelihoodFromStats(stats, next);
    const double gain = (ll - result.log_likelihood.back()) / n_total;
    result.model = std::move(next);
    result.log_likelihood.push_back(ll);
    if (gain < options.tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

PldaScorer::PldaScorer(const PldaModel& model) {
  model.Validate();
  const Eigen::Index d = model.mean.size();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd total = model.between + model.within;
  const Eigen::MatrixXd total_inv = Symmetrize(total.llt().solve(eye));
  // Schur complement of the same-identity joint covariance.
  const Eigen::MatrixXd schur = Symmetrize(total - model.between * total_inv * model.between);
  const Eigen::MatrixXd schur_inv = Symmetrize(schur.llt().solve(eye));
  mean_ = model.mean;
  q_ = total_inv - schur_inv;
  p_ = Symmetrize(total_inv * model.between * schur_inv);
  offset_ = 0.5 * LogDetSpd(total) - 0.5 * LogDetSpd(schur);
}

double PldaScorer::Llr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  if (a.size() != mean_.size() || b.size() != mean_.size()) {
    throw ValidationError("PLDA input dimension mismatch: model is " +
                          std::to_string(mean_.size()) + "-d");
  }
  const Eigen::VectorXd x = a - mean_;
  const Eigen::VectorXd y = b - mean_;
  return 0.5 * (x.dot(q_ * x) + y.dot(q_ * y)) + x.dot(p_ * y) + offset_;
}

double PldaLlr(const PldaModel& model, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return PldaScorer(model).Llr(a, b);
}

Eigen::VectorXd AudioBackend::Project(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = lda.Apply(x);
  if (length_normalize) {
    const double n = y.norm();
    if (n == 0.0) throw RuntimeFailure("cannot length-normalize a zero projected vector");
    y *= std::sqrt(static_cast<double>(y.size())) / n;
  }
  return y;
}

Checkpoint AudioBackend::ToCheckpoint() const {
  Checkpoint ckpt("audio-backend");
  ckpt.PutMatrix("lda.projection", lda.projection);
  ckpt.PutVector("lda.mean", lda.mean);
  ckpt.PutScalar("length_normalize", length_normalize ? 1.0 : 0.0);
  ckpt.PutVector("plda.mean", plda.mean);
  ckpt.PutMatrix("plda.between", plda.between);
  ckpt.PutMatrix("plda.within", plda.within);
  return ckpt;
}

AudioBackend AudioBackend::FromCheckpoint(const Checkpoint& ckpt) {
  ckpt.ExpectKind("audio-backend");
  AudioBackend b;
  b.lda.projection = ckpt.GetMatrix("lda.projection");
  b.lda.mean = ckpt.GetVector("lda.mean");
  b.length_normalize = ckpt.GetScalar("length_normalize") != 0.0;
  b.plda.mean = ckpt.GetVector("plda.mean");
  b.plda.between = ckpt.GetMatrix("plda.between");
  b.plda.within = ckpt.GetMatrix("plda.within");
  if (b.lda.projection.cols() != b.lda.mean.size() ||
      b.lda.projection.rows() != b.plda.mean.size()) {
    throw ValidationError("inconsistent audio back-end shapes in checkpoint");
  }
  b.plda.Validate();
  return b;
}

void AudioBackend::Save(const std::string& path) const { ToCheckpoint().Save(path); }

AudioBackend AudioBackend::Load(const std::string& path) {
  return FromCheckpoint(Checkpoint::Load(path));
}

AudioBackend FitAudioBackend(const EmbeddingStore& store, const AudioBackendOptions& options) {
  const EmbeddingStore voices = store.Filter(Modality::kVoice);
  const ClassGroups groups = GroupByIdentity(voices);
  AudioBackend backend;
  backend.lda = FitLda(groups, options.lda_dim);
  backend.length_normalize = options.length_normalize;
  ClassGroups projected;
  projected.reserve(groups.size());
  for (const auto& c : groups) {
    std::vector<Eigen::VectorXd> pc;
    pc.reserve(c.size());
    for (const auto& x : c) pc.push_back(backend.Project(x));
    projected.push_back(std::move(pc));
  }
  backend.plda = FitPlda(projected, options.plda).model;
  return backend;
}

void PoolingRule::Validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("pooling fraction must be in (0, 1]");
  }
}

size_t PoolingRule::TopK(size_t n) const {
  Validate();
  const double product = fraction * static_cast<double>(n);
  const double k = std::ceil(product * (1.0 - 1e-12));
  return std::clamp<size_t>(static_cast<size_t>(k), 1, std::max<size_t>(n, 1));
}

double PoolTopFraction(std::span<const double> scores, const PoolingRule& rule) {
  if (scores.empty()) throw ValidationError("cannot pool an empty score list");
  const size_t k = rule.TopK(scores.size());
  std::vector<double> sorted(scores.begin(), scores.end());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(),
                    std::greater<>());
  double sum = 0.0;
  for (size_t i = 0; i < k; ++i) sum += sorted[i];
  return sum / static_cast<double>(k);
}

double ScoreFaceTrial(std::span<const Eigen::VectorXd> enroll_faces,
                      std::span<const Eigen::VectorXd> test_faces, const PoolingRule& rule) {
  if (enroll_faces.empty() || test_faces.empty()) {
    throw ValidationError("face trial needs enrollment and test faces");
  }
  Eigen::VectorXd templ = Eigen::VectorXd::Zero(enroll_faces.front().size());
  for (const auto& f : enroll_faces) {
    if (f.size() != templ.size()) throw ValidationError("enrollment face dimension mismatch");
    templ += f;
  }
  templ /= static_cast<double>(enroll_faces.size());
  const double n = templ.norm();
  if (n == 0.0) throw RuntimeFailure("face enrollment template has zero norm");
  templ /= n;
  std::vector<double> scores;
  scores.reserve(test_faces.size());
  for (const auto& f : test_faces) scores.push_back(CosineSimilarity(templ, f));
  return PoolTopFraction(scores, rule);
}

double ScoreVfnetTrial(const VFNetParams& params, const Eigen::VectorXd& enroll_voice,
                       std::span<const Eigen::VectorXd> test_faces, const PoolingRule& rule) {
  if (test_faces.empty()) throw ValidationError("VFNet trial needs at least one test face");
  const Eigen::VectorXd voice = TransformVoice(params, enroll_voice);
  std::vector<double> scores;
  scores.reserve(test_faces.size());
  for (const auto& f : test_faces) {
    scores.push_back(PairProbability(CosineSimilarity(voice, TransformFace(params, f))).p_same);
  }
  return PoolTopFraction(scores, rule);
}

}  // namespace avsr
