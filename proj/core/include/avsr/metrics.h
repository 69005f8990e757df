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

#ifndef AVSR_METRICS_H_
#define AVSR_METRICS_H_

// Detection and matching metrics. Every detection metric uses the same
// decision rule: accept a trial iff score >= threshold.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "avsr/embedding_store.h"
#include "avsr/vfnet.h"

namespace avsr {

struct DcfParams {
  double p_target = 0.05;
  double c_miss = 1.0;
  double c_fa = 1.0;

  // Throws ValidationError when a field is out of range.
  void Validate() const;
  // p_target * c_miss / (p_target * c_miss + (1 - p_target) * c_fa).
  double EffectivePrior() const;
  // log((1 - prior) / prior) for the effective prior.
  double BayesThreshold() const;
  // Detection cost normalized by the best trivial (accept-all/reject-all) system.
  double NormalizedCost(double p_miss, double p_fa) const;
};

struct RocPoint {
  double threshold = 0.0;
  double p_miss = 0.0;
  double p_fa = 0.0;
};

// The two sets passed to every metric below must each be nonempty;
// ValidationError otherwise.

// (-inf, 0, 1), one point per distinct score in ascending order, (+inf, 1, 0).
std::vector<RocPoint> RocPoints(std::span<const double> targets,
                                std::span<const double> nontargets);

// Miss rate equals false-alarm rate, interpolated linearly between the two
// operating points bracketing the crossing.
double Eer(std::span<const double> targets, std::span<const double> nontargets);

// Probability that a target outscores a nontarget; ties count one half.
double Auc(std::span<const double> targets, std::span<const double> nontargets);

struct MinDcfResult {
  double value = 0.0;
  double threshold = 0.0;  // lowest minimizing threshold; may be +-inf
};

MinDcfResult MinDcf(std::span<const double> targets, std::span<const double> nontargets,
                    const DcfParams& params);

// Normalized cost at the Bayes threshold, reading scores as llrs.
double ActDcf(std::span<const double> targets, std::span<const double> nontargets,
              const DcfParams& params);

struct MetricReport {
  double eer = 0.0;
  double auc = 0.0;
  double min_dcf = 0.0;
  double min_dcf_threshold = 0.0;
  double act_dcf = 0.0;
  double act_dcf_threshold = 0.0;
  size_t n_target = 0;
  size_t n_nontarget = 0;
};

// ScoreSet front ends; throw ValidationError for unlabeled sets.
std::vector<RocPoint> RocPoints(const ScoreSet& scores);
double Eer(const ScoreSet& scores);
double Auc(const ScoreSet& scores);
MinDcfResult MinDcf(const ScoreSet& scores, const DcfParams& params);
double ActDcf(const ScoreSet& scores, const DcfParams& params);
MetricReport Evaluate(const ScoreSet& scores, const DcfParams& params);

// One-line TSV with a header line.
void WriteMetricReport(const MetricReport& report, std::ostream& out);
void WriteRocPoints(const std::vector<RocPoint>& points, std::ostream& out);

// A 1-of-2 matching item: a probe plus the same-identity candidate and a
// different-identity candidate. The same candidate is always passed first, so
// exact ties count as correct.
struct MatchingTriplet {
  Eigen::VectorXd probe;
  Eigen::VectorXd same;
  Eigen::VectorXd other;
};

enum class MatchDirection {
  kVoiceToFace,  // voice probe, two faces
  kFaceToVoice,  // face probe, two voices
};

// Draws `count` triplets from `store`: a random identity supplies the probe
// and the same-identity candidate, another identity the other candidate.
std::vector<MatchingTriplet> BuildMatchingTriplets(const EmbeddingStore& store, size_t count,
                                                   MatchDirection direction,
                                                   std::uint64_t seed);

double MatchingAccuracy(const VFNetParams& params, std::span<const MatchingTriplet> triplets,
                        MatchDirection direction = MatchDirection::kVoiceToFace);

}  // namespace avsr

#endif  // AVSR_METRICS_H_
