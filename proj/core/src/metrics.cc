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

#include "avsr/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <ostream>

#include "avsr/error.h"
#include "avsr/text_io.h"

namespace avsr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void RequireBothClasses(std::span<const double> targets, std::span<const double> nontargets) {
  if (targets.empty() || nontargets.empty()) {
    throw ValidationError("metric needs at least one target and one nontarget score");
  }
}

void RequireLabels(const ScoreSet& scores) {
  if (!scores.labeled()) throw ValidationError("metric needs a labeled score set");
}

std::vector<double> Sorted(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void DcfParams::Validate() const {
  if (!(p_target > 0.0 && p_target < 1.0)) throw ValidationError("p_target must be in (0, 1)");
  if (!(c_miss > 0.0)) throw ValidationError("c_miss must be positive");
  if (!(c_fa > 0.0)) throw ValidationError("c_fa must be positive");
}

double DcfParams::EffectivePrior() const {
  const double a = p_target * c_miss;
  return a / (a + (1.0 - p_target) * c_fa);
}

double DcfParams::BayesThreshold() const {
  const double prior = EffectivePrior();
  return std::log((1.0 - prior) / prior);
}

double DcfParams::NormalizedCost(double p_miss, double p_fa) const {
  const double miss_weight = c_miss * p_target;
  const double fa_weight = c_fa * (1.0 - p_target);
  return (miss_weight * p_miss + fa_weight * p_fa) / std::min(miss_weight, fa_weight);
}

std::vector<RocPoint> RocPoints(std::span<const double> targets,
                                std::span<const double> nontargets) {
  RequireBothClasses(targets, nontargets);
  const std::vector<double> tar = Sorted(targets);
  const std::vector<double> non = Sorted(nontargets);
  const double nt = static_cast<double>(tar.size());
  const double nn = static_cast<double>(non.size());

  std::vector<double> thresholds;
  thresholds.reserve(tar.size() + non.size());
  std::merge(tar.begin(), tar.end(), non.begin(), non.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<RocPoint> points;
  points.reserve(thresholds.size() + 2);
  points.push_back({-kInf, 0.0, 1.0});
  size_t t_below = 0;  // targets with score < threshold
  size_t n_below = 0;
  for (double th : thresholds) {
    while (t_below < tar.size() && tar[t_below] < th) ++t_below;
    while (n_below < non.size() && non[n_below] < th) ++n_below;
    points.push_back({th, static_cast<double>(t_below) / nt,
                      static_cast<double>(non.size() - n_below) / nn});
  }
  points.push_back({kInf, 1.0, 0.0});
  return points;
}

double Eer(std::span<const double> targets, std::span<const double> nontargets) {
  const std::vector<RocPoint> points = RocPoints(targets, nontargets);
  for (size_t i = 1; i < points.size(); ++i) {
    const RocPoint& b = points[i];
    if (b.p_miss < b.p_fa) continue;
    const RocPoint& a = points[i - 1];
    const double denom = (b.p_miss - a.p_miss) - (b.p_fa - a.p_fa);
    const double alpha = (a.p_fa - a.p_miss) / denom;
    return a.p_miss + alpha * (b.p_miss - a.p_miss);
  }
  // Unreachable: the last point has p_miss = 1 > p_fa = 0.
  return 0.5;
}

double Auc(std::span<const double> targets, std::span<const double> nontargets) {
  RequireBothClasses(targets, nontargets);
  const std::vector<double> tar = Sorted(targets);
  const std::vector<double> non = Sorted(nontargets);
  // Count nontargets strictly below and equal to each target, in half units.
  double half_units = 0.0;
  size_t lo = 0, hi = 0;
  for (double t : tar) {
    while (lo < non.size() && non[lo] < t) ++lo;
    if (hi < lo) hi = lo;
    while (hi < non.size() && non[hi] <= t) ++hi;
    half_units += 2.0 * static_cast<double>(lo) + static_cast<double>(hi - lo);
  }
  return half_units / 2.0 / (static_cast<double>(tar.size()) * static_cast<double>(non.size()));
}

MinDcfResult MinDcf(std::span<const double> targets, std::span<const double> nontargets,
                    const DcfParams& params) {
  params.Validate();
  const std::vector<RocPoint> points = RocPoints(targets, nontargets);
  MinDcfResult best{kInf, 0.0};
  for (const RocPoint& p : points) {
    const double cost = params.NormalizedCost(p.p_miss, p.p_fa);
    if (cost < best.value) best = {cost, p.threshold};
  }
  return best;
}

double ActDcf(std::span<const double> targets, std::span<const double> nontargets,
              const DcfParams& params) {
  params.Validate();
  RequireBothClasses(targets, nontargets);
  const double theta = params.BayesThreshold();
  const auto misses = std::count_if(targets.begin(), targets.end(),
                                    [theta](double s) { return s < theta; });
  const auto false_alarms = std::count_if(nontargets.begin(), nontargets.end(),
                                          [theta](double s) { return s >= theta; });
  return params.NormalizedCost(
      static_cast<double>(misses) / static_cast<double>(targets.size()),
      static_cast<double>(false_alarms) / static_cast<double>(nontargets.size()));
}

std::vector<RocPoint> RocPoints(const ScoreSet& scores) {
  RequireLabels(scores);
  return RocPoints(scores.ScoresWithLabel(TrialLabel::kTarget),
                   scores.ScoresWithLabel(TrialLabel::kNontarget));
}

double Eer(const ScoreSet& scores) {
  RequireLabels(scores);
  return Eer(scores.ScoresWithLabel(TrialLabel::kTarget),
             scores.ScoresWithLabel(TrialLabel::kNontarget));
}

double Auc(const ScoreSet& scores) {
  RequireLabels(scores);
  return Auc(scores.ScoresWithLabel(TrialLabel::kTarget),
             scores.ScoresWithLabel(TrialLabel::kNontarget));
}

MinDcfResult MinDcf(const ScoreSet& scores, const DcfParams& params) {
  RequireLabels(scores);
  return MinDcf(scores.ScoresWithLabel(TrialLabel::kTarget),
                scores.ScoresWithLabel(TrialLabel::kNontarget), params);
}

double ActDcf(const ScoreSet& scores, const DcfParams& params) {
  RequireLabels(scores);
  return ActDcf(scores.ScoresWithLabel(TrialLabel::kTarget),
                scores.ScoresWithLabel(TrialLabel::kNontarget), params);
}

MetricReport Evaluate(const ScoreSet& scores, const DcfParams& params) {
  RequireLabels(scores);
  const auto tar = scores.ScoresWithLabel(TrialLabel::kTarget);
  const auto non = scores.ScoresWithLabel(TrialLabel::kNontarget);
  MetricReport r;
  r.eer = Eer(tar, non);
  r.auc = Auc(tar, non);
  const MinDcfResult min_dcf = MinDcf(tar, non, params);
  r.min_dcf = min_dcf.value;
  r.min_dcf_threshold = min_dcf.threshold;
  r.act_dcf = ActDcf(tar, non, params);
  r.act_dcf_threshold = params.BayesThreshold();
  r.n_target = tar.size();
  r.n_nontarget = non.size();
  return r;
}

void WriteMetricReport(const MetricReport& r, std::ostream& out) {
  out << "eer\tauc\tmin_dcf\tact_dcf\tmin_dcf_threshold\tact_dcf_threshold\tn_target\t"
         "n_nontarget\n";
  out << FormatDouble(r.eer) << '\t' << FormatDouble(r.auc) << '\t' << FormatDouble(r.min_dcf)
      << '\t' << FormatDouble(r.act_dcf) << '\t' << FormatDouble(r.min_dcf_threshold) << '\t'
      << FormatDouble(r.act_dcf_threshold) << '\t' << r.n_target << '\t' << r.n_nontarget
      << '\n';
}

void WriteRocPoints(const std::vector<RocPoint>& points, std::ostream& out) {
  out << "threshold\tp_miss\tp_fa\n";
  for (const RocPoint& p : points) {
    out << FormatDouble(p.threshold) << '\t' << FormatDouble(p.p_miss) << '\t'
        << FormatDouble(p.p_fa) << '\n';
  }
}

std::vector<MatchingTriplet> BuildMatchingTriplets(const EmbeddingStore& store, size_t count,
                                                   MatchDirection direction,
                                                   std::uint64_t seed) {
  const Modality probe_modality =
      direction == MatchDirection::kVoiceToFace ? Modality::kVoice : Modality::kFace;
  const Modality candidate_modality =
      direction == MatchDirection::kVoiceToFace ? Modality::kFace : Modality::kVoice;
  std::map<std::string, std::pair<std::vector<const Eigen::VectorXd*>,
                                  std::vector<const Eigen::VectorXd*>>> by_identity;
  for (const auto& r : store.records()) {
    auto& slot = by_identity[r.identity_id];
    (r.modality == probe_modality ? slot.first : slot.second).push_back(&r.vector);
  }
  std::vector<std::string> usable;  // identities with a probe and a candidate
  std::vector<std::string> with_candidates;
  for (const auto& [id, slot] : by_identity) {
    if (!slot.second.empty()) with_candidates.push_back(id);
    if (!slot.first.empty() && !slot.second.empty()) usable.push_back(id);
  }
  if (usable.empty() || with_candidates.size() < 2) {
    throw ValidationError(std::string("matching triplets need 2 identities with ") +
                          std::string(ModalityName(candidate_modality)) + " records");
  }
  std::mt19937_64 rng(seed);
  auto pick = [&rng](size_t n) { return std::uniform_int_distribution<size_t>(0, n - 1)(rng); };
  std::vector<MatchingTriplet> out;
  out.reserve(count);
  while (out.size() < count) {
    const std::string& id = usable[pick(usable.size())];
    const std::string& other = with_candidates[pick(with_candidates.size())];
    if (other == id) continue;
    const auto& mine = by_identity.at(id);
    const auto& theirs = by_identity.at(other).second;
    out.push_back({*mine.first[pick(mine.first.size())], *mine.second[pick(mine.second.size())],
                   *theirs[pick(theirs.size())]});
  }
  return out;
}

double MatchingAccuracy(const VFNetParams& params, std::span<const MatchingTriplet> triplets,
                        MatchDirection direction) {
  if (triplets.empty()) throw ValidationError("matching accuracy needs at least one triplet");
  size_t correct = 0;
  for (const MatchingTriplet& t : triplets) {
    const MatchChoice choice = direction == MatchDirection::kVoiceToFace
                                   ? MatchOneOfTwo(params, t.probe, t.same, t.other)
                                   : MatchOneOfTwoFaceProbe(params, t.probe, t.same, t.other);
    if (choice == MatchChoice::kFirst) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(triplets.size());
}

}  // namespace avsr
