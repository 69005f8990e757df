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

#include "avsr/fusion.h"

#include <cmath>
#include <unordered_map>

#include "avsr/error.h"
#include "avsr/log.h"
#include "avsr/vfnet.h"

namespace avsr {
namespace {

// log(1 + exp(x)) without overflow.
double Softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

std::string Key(const ScoreEntry& e) { return e.enroll_id + '\t' + e.test_id; }

struct Problem {
  const AlignedScores* data;
  std::vector<double> sample_weight;  // prior / N_t or (1 - prior) / N_n
  std::vector<double> sign;           // +1 target, -1 nontarget
  double offset;                      // logit(prior)
  double l2;
  Eigen::Index n_systems;

  // theta = (w..., b)
  double Objective(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd s =
        data->scores * theta.head(n_systems) + Eigen::VectorXd::Constant(data->scores.rows(), theta[n_systems]);
    double c = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      c += sample_weight[static_cast<size_t>(i)] *
           Softplus(-sign[static_cast<size_t>(i)] * (s[i] + offset));
    }
    return c + 0.5 * l2 * theta.head(n_systems).squaredNorm();
  }

  void GradientHessian(const Eigen::VectorXd& theta, Eigen::VectorXd* g,
                       Eigen::MatrixXd* h) const {
    const Eigen::Index p = n_systems + 1;
    g->setZero(p);
    h->setZero(p, p);
    Eigen::VectorXd x(p);
    for (Eigen::Index i = 0; i < data->scores.rows(); ++i) {
      x.head(n_systems) = data->scores.row(i).transpose();
      x[n_systems] = 1.0;
      const double a = sign[static_cast<size_t>(i)] * (x.dot(theta) + offset);
      const double w = sample_weight[static_cast<size_t>(i)];
      // d/da softplus(-a) = -logistic(-a)
      *g -= w * sign[static_cast<size_t>(i)] * Logistic(-a) * x;
      h->selfadjointView<Eigen::Lower>().rankUpdate(x, w * Logistic(a) * Logistic(-a));
    }
    *h = Eigen::MatrixXd(h->selfadjointView<Eigen::Lower>());
    g->head(n_systems) += l2 * theta.head(n_systems);
    h->topLeftCorner(n_systems, n_systems).diagonal().array() += l2;
  }
};

Problem MakeProblem(const AlignedScores& data, double prior, double l2) {
  Problem pr{&data, {}, {}, std::log(prior / (1.0 - prior)), l2, data.scores.cols()};
  size_t nt = 0, nn = 0;
  for (const auto& t : data.trials) (t.label == TrialLabel::kTarget ? nt : nn)++;
  if (nt == 0 || nn == 0) throw ValidationError("fusion needs target and nontarget trials");
  for (const auto& t : data.trials) {
    const bool target = t.label == TrialLabel::kTarget;
    pr.sign.push_back(target ? 1.0 : -1.0);
    pr.sample_weight.push_back(target ? prior / static_cast<double>(nt)
                                      : (1.0 - prior) / static_cast<double>(nn));
  }
  return pr;
}

}  // namespace

double FusionModel::Apply(std::span<const double> scores) const {
  if (scores.size() != weights.size()) {
    throw ValidationError("fusion model expects " + std::to_string(weights.size()) +
                          " systems, got " + std::to_string(scores.size()));
  }
  double s = bias;
  for (size_t i = 0; i < scores.size(); ++i) s += weights[i] * scores[i];
  return s;
}

Checkpoint FusionModel::ToCheckpoint() const {
  Checkpoint ckpt("fusion");
  ckpt.PutVector("weights", Eigen::Map<const Eigen::VectorXd>(
                                weights.data(), static_cast<Eigen::Index>(weights.size())));
  ckpt.PutScalar("bias", bias);
  ckpt.PutScalar("effective_prior", effective_prior);
  return ckpt;
}

FusionModel FusionModel::FromCheckpoint(const Checkpoint& ckpt) {
  ckpt.ExpectKind("fusion");
  FusionModel m;
  const Eigen::VectorXd w = ckpt.GetVector("weights");
  m.weights.assign(w.data(), w.data() + w.size());
  m.bias = ckpt.GetScalar("bias");
  m.effective_prior = ckpt.GetScalar("effective_prior");
  return m;
}

void FusionModel::Save(const std::string& path) const { ToCheckpoint().Save(path); }

FusionModel FusionModel::Load(const std::string& path) {
  return FromCheckpoint(Checkpoint::Load(path));
}

AlignedScores AlignSystems(std::span<const ScoreSet> systems) {
  if (systems.empty()) throw ValidationError("fusion needs at least one system");
  const ScoreSet& first = systems.front();
  AlignedScores out;
  out.trials = first.entries();
  out.scores.resize(static_cast<Eigen::Index>(first.size()),
                    static_cast<Eigen::Index>(systems.size()));
  std::unordered_map<std::string, size_t> index;
  for (size_t i = 0; i < first.size(); ++i) {
    if (!index.emplace(Key(first.entries()[i]), i).second) {
      throw ValidationError("duplicate trial in fusion input: " + Key(first.entries()[i]));
    }
  }
  for (size_t s = 0; s < systems.size(); ++s) {
    const ScoreSet& sys = systems[s];
    if (sys.size() != first.size()) {
      throw ValidationError("system " + std::to_string(s + 1) + " has " +
                            std::to_string(sys.size()) + " trials, expected " +
                            std::to_string(first.size()));
    }
    std::vector<bool> seen(first.size(), false);
    for (const ScoreEntry& e : sys.entries()) {
      auto it = index.find(Key(e));
      if (it == index.end() || seen[it->second]) {
        throw ValidationError("system " + std::to_string(s + 1) +
                              " is misaligned at trial (" + e.enroll_id + ", " + e.test_id + ")");
      }
      if (e.label && first.entries()[it->second].label && e.label != first.entries()[it->second].label) {
        throw ValidationError("label disagreement at trial (" + e.enroll_id + ", " +
                              e.test_id + ")");
      }
      seen[it->second] = true;
      out.scores(static_cast<Eigen::Index>(it->second), static_cast<Eigen::Index>(s)) = e.score;
    }
  }
  return out;
}

double FusionObjective(const AlignedScores& data, const FusionModel& model, double l2) {
  const Problem pr = MakeProblem(data, model.effective_prior, l2);
  Eigen::VectorXd theta(pr.n_systems + 1);
  for (Eigen::Index i = 0; i < pr.n_systems; ++i) theta[i] = model.weights[static_cast<size_t>(i)];
  theta[pr.n_systems] = model.bias;
  return pr.Objective(theta);
}

FusionFitResult FitFusion(std::span<const ScoreSet> systems, const DcfParams& params,
                          const FusionOptions& options) {
  params.Validate();
  for (const ScoreSet& s : systems) {
    if (!s.labeled()) throw ValidationError("fusion training scores must be labeled");
  }
  const AlignedScores data = AlignSystems(systems);
  const double prior = params.EffectivePrior();
  const Problem pr = MakeProblem(data, prior, options.l2);
  const Eigen::Index p = pr.n_systems + 1;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  if (options.initial) {
    if (static_cast<Eigen::Index>(options.initial->size()) != p) {
      throw ValidationError("fusion initial point must have n_systems + 1 entries");
    }
    for (Eigen::Index i = 0; i < p; ++i) theta[i] = (*options.initial)[static_cast<size_t>(i)];
  }

  FusionFitResult result;
  double obj = pr.Objective(theta);
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    pr.GradientHessian(theta, &g, &h);
    if (g.norm() < options.gradient_tolerance) break;
    // Minimum-norm Newton step; duplicated systems make the Hessian singular.
    Eigen::VectorXd dir = -h.completeOrthogonalDecomposition().solve(g);
    double slope = g.dot(dir);
    if (!dir.allFinite() || slope >= 0.0) {
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      const Eigen::VectorXd trial = theta + step * dir;
      const double trial_obj = pr.Objective(trial);
      if (trial_obj <= obj + 1e-4 * step * slope) {
        theta = trial;
        obj = trial_obj;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // at the floating-point floor of the objective
    const double wnorm = theta.head(pr.n_systems).norm();
    if (wnorm > options.max_weight_norm) {
      Warn("fusion weights diverge (scores look separable); capping weight norm at " +
           std::to_string(options.max_weight_norm));
      theta *= options.max_weight_norm / wnorm;
      obj = pr.Objective(theta);
      result.weight_norm_capped = true;
      ++iter;
      break;
    }
  }
  pr.GradientHessian(theta, &g, &h);

  result.model.weights.assign(theta.data(), theta.data() + pr.n_systems);
  result.model.bias = theta[pr.n_systems];
  result.model.effective_prior = prior;
  result.objective = obj;
  result.gradient_norm = g.norm();
  result.iterations = iter;
  return result;
}

ScoreSet ApplyFusion(const FusionModel& model, std::span<const ScoreSet> systems) {
  const AlignedScores data = AlignSystems(systems);
  if (static_cast<size_t>(data.scores.cols()) != model.weights.size()) {
    throw ValidationError("fusion model expects " + std::to_string(model.weights.size()) +
                          " systems, got " + std::to_string(data.scores.cols()));
  }
  ScoreSet out;
  std::vector<double> row(model.weights.size());
  for (size_t i = 0; i < data.trials.size(); ++i) {
    for (size_t s = 0; s < row.size(); ++s) {
      row[s] = data.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
    }
    ScoreEntry e = data.trials[i];
    e.score = model.Apply(row);
    out.Add(std::move(e));
  }
  return out;
}

}  // namespace avsr
