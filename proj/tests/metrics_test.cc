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
#include <sstream>

#include "avsr/error.h"
#include "avsr/metrics.h"
#include "avsr/synth.h"
#include "doctest.h"
#include "oracles.h"

namespace avsr {
namespace {

using V = std::vector<double>;

struct Labeled {
  V tar, non;
};

// Random labeled sets with deliberate ties: scores are drawn from a coarse
// grid half of the time.
Labeled RandomSet(std::mt19937_64& rng, int max_size) {
  std::uniform_int_distribution<int> count(1, max_size - 1);
  const int n = count(rng) + 1;
  std::uniform_int_distribution<int> split(1, n - 1);
  const int nt = split(rng);
  const bool coarse = rng() % 2 == 0;
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> grid(-4, 4);
  Labeled s;
  for (int i = 0; i < n; ++i) {
    const bool target = i < nt;
    const double x = coarse ? grid(rng) * 0.5 + (target ? 0.5 : 0.0) : g(rng) + (target ? 1.0 : 0.0);
    (target ? s.tar : s.non).push_back(x);
  }
  return s;
}

TEST_CASE("ROC points of a separable set reach the perfect corner") {
  const auto pts = RocPoints(V{0.9, 0.8}, V{0.1, 0.2});
  CHECK(pts.front().p_miss == 0.0);
  CHECK(pts.front().p_fa == 1.0);
  CHECK(pts.back().p_miss == 1.0);
  CHECK(pts.back().p_fa == 0.0);
  bool corner = false;
  for (const auto& p : pts) corner = corner || (p.p_miss == 0.0 && p.p_fa == 0.0);
  CHECK(corner);
}

TEST_CASE("all-equal scores give only the endpoints and the tie point") {
  const auto pts = RocPoints(V{1.0, 1.0}, V{1.0, 1.0, 1.0});
  REQUIRE(pts.size() == 3);
  CHECK(pts[1].threshold == 1.0);
  CHECK(pts[1].p_miss == 0.0);
  CHECK(pts[1].p_fa == 1.0);
}

TEST_CASE("ROC points are monotone in the threshold") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Labeled s = RandomSet(rng, 60);
    const auto pts = RocPoints(s.tar, s.non);
    for (size_t k = 1; k < pts.size(); ++k) {
      CHECK(pts[k].threshold > pts[k - 1].threshold);
      CHECK(pts[k].p_miss >= pts[k - 1].p_miss);
      CHECK(pts[k].p_fa <= pts[k - 1].p_fa);
    }
  }
}

TEST_CASE("EER reference cases") {
  CHECK(Eer(V{0.9, 0.8}, V{0.1, 0.2}) == 0.0);
  CHECK(Eer(V{0.8, 0.2}, V{0.6, 0.4}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(Eer(V{3, 2, 1}, V{2.5, 0, -1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(Eer(V{1.0, 1.0}, V{1.0}) == 0.5);
}

TEST_CASE("AUC reference cases") {
  CHECK(Auc(V{0.9, 0.8}, V{0.1, 0.2}) == 1.0);
  CHECK(Auc(V{0.5, 0.5, 0.5}, V{0.5, 0.5}) == 0.5);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  V tar, non;
  for (int i = 0; i < 25; ++i) {
    tar.push_back(std::round(4 * g(rng)) / 4 + 0.3);
    non.push_back(std::round(4 * g(rng)) / 4);
  }
  CHECK(Auc(tar, non) == testing::BruteAuc(tar, non));
}

TEST_CASE("minDCF reference cases") {
  const DcfParams p;
  CHECK(MinDcf(V{0.9, 0.8}, V{0.1, 0.2}, p).value == 0.0);
  CHECK(MinDcf(V{1.0, 1.0}, V{1.0, 1.0}, p).value == 1.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  V tar, non;
  for (int i = 0; i < 10; ++i) tar.push_back(g(rng) + 1.5);
  for (int i = 0; i < 20; ++i) non.push_back(g(rng));
  CHECK(std::abs(MinDcf(tar, non, p).value - testing::BruteMinDcf(tar, non, 0.05, 1, 1)) < 1e-12);
}

TEST_CASE("minDCF reports the lowest minimizing threshold") {
  // Thresholds 0.5 and 0.7 (and 0.6) all reach zero cost.
  const auto r = MinDcf(V{0.7, 0.8}, V{0.1, 0.5}, DcfParams{});
  CHECK(r.value == 0.0);
  CHECK(r.threshold == 0.7);
}

TEST_CASE("actDCF uses the Bayes threshold") {
  const DcfParams p;
  CHECK(p.BayesThreshold() == doctest::Approx(std::log(19.0)).epsilon(1e-15));
  CHECK(p.BayesThreshold() == doctest::Approx(2.944439).epsilon(1e-6));
  CHECK(ActDcf(V{3.5, 4.0}, V{-2.0, 2.9}, p) == 0.0);
  // A score exactly at the threshold is accepted.
  CHECK(ActDcf(V{p.BayesThreshold()}, V{-5.0}, p) == 0.0);
  CHECK(ActDcf(V{0.0}, V{p.BayesThreshold()}, p) > 0.0);
}

TEST_CASE("actDCF is never below minDCF") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    Labeled s = RandomSet(rng, 80);
    for (double& x : s.tar) x *= 3.0;
    for (double& x : s.non) x *= 3.0;
    CHECK(ActDcf(s.tar, s.non, {}) >= MinDcf(s.tar, s.non, {}).value);
  }
}

TEST_CASE("metrics agree with the brute-force oracle on random sets") {
  std::mt19937_64 rng(5);
  const DcfParams p{0.01 + 0.5 * 0.3, 2.0, 0.5};
  for (int i = 0; i < 300; ++i) {
    const Labeled s = RandomSet(rng, 100);
    CHECK(std::abs(Eer(s.tar, s.non) - testing::BruteEer(s.tar, s.non)) < 1e-12);
    CHECK(std::abs(Auc(s.tar, s.non) - testing::BruteAuc(s.tar, s.non)) < 1e-12);
    CHECK(std::abs(MinDcf(s.tar, s.non, p).value -
                   testing::BruteMinDcf(s.tar, s.non, p.p_target, p.c_miss, p.c_fa)) < 1e-12);
    CHECK(std::abs(ActDcf(s.tar, s.non, p) -
                   testing::BruteActDcf(s.tar, s.non, p.p_target, p.c_miss, p.c_fa)) < 1e-12);
  }
}

TEST_CASE("EER, AUC and minDCF are invariant under increasing transforms but actDCF is not") {
  std::mt19937_64 rng(6);
  bool act_changed = false;
  for (int i = 0; i < 200; ++i) {
    const Labeled s = RandomSet(rng, 60);
    for (auto f : {+[](double x) { return 2 * x + 1; }, +[](double x) { return std::tanh(x); }}) {
      V t2, n2;
      for (double x : s.tar) t2.push_back(f(x));
      for (double x : s.non) n2.push_back(f(x));
      CHECK(std::abs(Eer(t2, n2) - Eer(s.tar, s.non)) < 1e-12);
      CHECK(Auc(t2, n2) == Auc(s.tar, s.non));
      CHECK(std::abs(MinDcf(t2, n2, {}).value - MinDcf(s.tar, s.non, {}).value) < 1e-12);
      act_changed = act_changed || ActDcf(t2, n2, {}) != ActDcf(s.tar, s.non, {});
    }
  }
  CHECK(act_changed);
}

TEST_CASE("EER lies in [0, 1]") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    const Labeled s = RandomSet(rng, 40);
    const double e = Eer(s.tar, s.non);
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
}

TEST_CASE("metrics reject unlabeled or one-sided input") {
  CHECK_THROWS_AS(Eer(V{}, V{1.0}), ValidationError);
  CHECK_THROWS_AS(Auc(V{1.0}, V{}), ValidationError);
  ScoreSet unlabeled;
  unlabeled.Add({"a", "b", 1.0, std::nullopt});
  CHECK_THROWS_AS(Eer(unlabeled), ValidationError);
  CHECK_THROWS_AS(DcfParams({0.0, 1, 1}).Validate(), ValidationError);
  CHECK_THROWS_AS(DcfParams({0.5, -1, 1}).Validate(), ValidationError);
}

TEST_CASE("metric report is one TSV line with a header") {
  const ScoreSet s = MakeScoreSet({3, 2, 1}, {2.5, 0, -1});
  const MetricReport r = Evaluate(s, {});
  CHECK(r.n_target == 3);
  CHECK(r.n_nontarget == 3);
  CHECK(r.eer == doctest::Approx(1.0 / 3.0));
  std::ostringstream out;
  WriteMetricReport(r, out);
  std::istringstream in(out.str());
  std::string header, line, extra;
  std::getline(in, header);
  std::getline(in, line);
  CHECK_FALSE(std::getline(in, extra));
  CHECK(header ==
        "eer\tauc\tmin_dcf\tact_dcf\tmin_dcf_threshold\tact_dcf_threshold\tn_target\tn_nontarget");
  CHECK(std::count(line.begin(), line.end(), '\t') == 7);
}

TEST_CASE("matching with identical candidates is decided by the tie rule") {
  const VFNetParams p = VFNetParams::GlorotUniform({4, 4, 16, 4}, 1);
  std::mt19937_64 rng(8);
  std::vector<MatchingTriplet> t;
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd f = testing::RandomVector(rng, 4);
    t.push_back({testing::RandomVector(rng, 4), f, f});
  }
  CHECK(MatchingAccuracy(p, t) == 1.0);
}

TEST_CASE("untrained networks match at chance level") {
  GenConfig g;
  const SynthData data = Generate(g);
  const VFNetParams p = VFNetParams::GlorotUniform({64, 64, 256, 128}, 3);
  for (auto dir : {MatchDirection::kVoiceToFace, MatchDirection::kFaceToVoice}) {
    const auto triplets = BuildMatchingTriplets(data.test, 2000, dir, 5);
    REQUIRE(triplets.size() == 2000);
    const double acc = MatchingAccuracy(p, triplets, dir);
    CHECK(acc >= 0.45);
    CHECK(acc <= 0.55);
  }
}

}  // namespace
}  // namespace avsr
