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

#include <map>
#include <sstream>

#include "avsr/embedding_store.h"
#include "avsr/error.h"
#include "avsr/log.h"
#include "doctest.h"
#include "oracles.h"

namespace avsr {
namespace {

EmbeddingRecord Rec(const std::string& id, const std::string& who, Modality m,
                    std::vector<double> v) {
  return {id, who, m, Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))};
}

EmbeddingStore Parse(const std::string& text) {
  std::istringstream in(text);
  return ReadEmbeddings(in, "mem");
}

std::string ErrorOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

EmbeddingStore GridStore(int identities, int voices, int faces) {
  EmbeddingStore s;
  for (int i = 0; i < identities; ++i) {
    const std::string who = "id" + std::to_string(i);
    for (int v = 0; v < voices; ++v) {
      s.Add(Rec(who + "-v" + std::to_string(v), who, Modality::kVoice, {1.0 * i, 1.0 * v}));
    }
    for (int f = 0; f < faces; ++f) {
      s.Add(Rec(who + "-f" + std::to_string(f), who, Modality::kFace, {-1.0 * i, 1.0 * f}));
    }
  }
  return s;
}

TEST_CASE("two well-formed records parse into a 4-d store") {
  const auto s = Parse("a\tp1\tvoice\t1,2,3,4\nb\tp2\tface\t0.5,-1,2e3,0\n");
  CHECK(s.size() == 2);
  CHECK(s.dim() == 4);
  CHECK(s.Get("b").modality == Modality::kFace);
  CHECK(s.Get("b").vector[2] == 2000.0);
}

TEST_CASE("comment and blank lines are skipped") {
  const auto s = Parse("# header\n\na\tp1\tvoice\t1,2\n");
  CHECK(s.size() == 1);
}

TEST_CASE("dimension mismatch names the offending line") {
  const std::string msg = ErrorOf([] {
    Parse("a\tp\tvoice\t1,2,3,4\nb\tp\tface\t1,2,3,4\nc\tp\tface\t1,2,3,4,5\n");
  });
  CHECK(msg.find("mem:3:") != std::string::npos);
  CHECK(msg.find("dimension") != std::string::npos);
}

TEST_CASE("empty file gives an empty store whose dimension query fails") {
  const auto s = Parse("");
  CHECK(s.empty());
  CHECK_FALSE(s.has_dim());
  CHECK_THROWS_AS(s.dim(), ValidationError);
}

TEST_CASE("duplicate ids, bad modality, malformed and non-finite values are rejected") {
  CHECK(ErrorOf([] { Parse("a\tp\tvoice\t1\na\tq\tface\t2\n"); }).find("mem:2:") !=
        std::string::npos);
  CHECK(ErrorOf([] { Parse("a\tp\taudio\t1\n"); }).find("modality") != std::string::npos);
  CHECK(ErrorOf([] { Parse("a\tp\tvoice\t1,x\n"); }).find("malformed") != std::string::npos);
  CHECK(ErrorOf([] { Parse("a\tp\tvoice\t1,nan\n"); }).find("non-finite") != std::string::npos);
  CHECK(ErrorOf([] { Parse("a\tp\tvoice\n"); }).find("mem:1:") != std::string::npos);
  EmbeddingStore s;
  CHECK_THROWS_AS(s.Add(Rec("z", "p", Modality::kVoice, {1.0, INFINITY})), ValidationError);
}

TEST_CASE("embedding store round-trips bit-exactly") {
  EmbeddingStore s;
  s.Add(Rec("r1", "alice", Modality::kVoice, {0.1 + 0.2, -1e-300, 123456789.123456789}));
  s.Add(Rec("r2", "bob", Modality::kFace, {std::nextafter(1.0, 2.0), 0.0, -0.0}));
  std::stringstream ss;
  WriteEmbeddings(s, ss);
  const auto back = ReadEmbeddings(ss, "rt");
  REQUIRE(back.size() == 2);
  for (const auto& r : s.records()) {
    const auto& b = back.Get(r.record_id);
    CHECK(b.identity_id == r.identity_id);
    CHECK(b.modality == r.modality);
    CHECK(b.vector == r.vector);
  }
}

TEST_CASE("trial files parse optional labels and reject mixing and duplicates") {
  std::istringstream ok("e1\tt1\ttarget\ne1\tt2\tnontarget\n");
  const auto t = ReadTrials(ok, "mem");
  CHECK(t.labeled());
  CHECK(t.CountLabel(TrialLabel::kTarget) == 1);

  std::istringstream mixed("e1\tt1\ttarget\ne1\tt2\n");
  CHECK_THROWS_AS(ReadTrials(mixed, "mem"), ValidationError);
  std::istringstream dup("e1\tt1\ne1\tt1\n");
  CHECK_THROWS_AS(ReadTrials(dup, "mem"), ValidationError);

  std::stringstream ss;
  WriteTrials(t, ss);
  CHECK(ReadTrials(ss, "rt") == t);
}

TEST_CASE("score files round-trip bit-exactly and carry labels") {
  ScoreSet s;
  s.Add({"e", "t1", 0.1 + 0.2, TrialLabel::kTarget});
  s.Add({"e", "t2", -7.25e-17, TrialLabel::kNontarget});
  s.Add({"e", "t3", 1.0 / 3.0, TrialLabel::kNontarget});
  std::stringstream ss;
  WriteScores(s, ss);
  const auto back = ReadScores(ss, "rt");
  CHECK(back == s);
  CHECK(back.entries()[0].score == 0.1 + 0.2);
  CHECK(back.labeled());

  std::istringstream bad("e\tt\tinf\n");
  CHECK_THROWS_AS(ReadScores(bad, "mem"), ValidationError);
}

TEST_CASE("two identities with one voice and one face give 2 targets and 2 crossed nontargets") {
  const auto store = GridStore(2, 1, 1);
  const auto trials = BuildCrossmodalTrials(store, {});
  REQUIRE(trials.size() == 4);
  CHECK(trials.CountLabel(TrialLabel::kTarget) == 2);
  CHECK(trials.CountLabel(TrialLabel::kNontarget) == 2);
  for (const auto& t : trials.trials()) {
    const auto& v = store.Get(t.enroll_id);
    const auto& f = store.Get(t.test_id);
    CHECK(v.modality == Modality::kVoice);
    CHECK(f.modality == Modality::kFace);
    CHECK((v.identity_id == f.identity_id) == (*t.label == TrialLabel::kTarget));
  }
}

TEST_CASE("single identity cannot form negatives") {
  CHECK_THROWS_AS(BuildCrossmodalTrials(GridStore(1, 2, 2), {}), ValidationError);
}

TEST_CASE("cross-modal trials respect labels, caps and determinism") {
  const auto store = GridStore(12, 5, 4);
  CrossmodalTrialOptions o;
  o.negatives_per_positive = 3;
  o.max_targets_per_identity = 7;
  o.seed = 42;
  const auto a = BuildCrossmodalTrials(store, o);
  const auto b = BuildCrossmodalTrials(store, o);
  CHECK(a == b);
  CHECK(a.CountLabel(TrialLabel::kTarget) == 12 * 7);
  CHECK(a.CountLabel(TrialLabel::kNontarget) == 3 * 12 * 7);
  std::map<std::string, int> per_identity;
  for (const auto& t : a.trials()) {
    const bool same = store.Get(t.enroll_id).identity_id == store.Get(t.test_id).identity_id;
    CHECK(same == (*t.label == TrialLabel::kTarget));
    if (same) ++per_identity[store.Get(t.enroll_id).identity_id];
  }
  for (const auto& [who, n] : per_identity) CHECK(n <= 7);

  o.seed = 43;
  CHECK_FALSE(BuildCrossmodalTrials(store, o) == a);
}

TEST_CASE("asking for more negatives than exist clamps and warns") {
  std::vector<std::string> warnings;
  auto previous = SetWarningSink([&](const std::string& m) { warnings.push_back(m); });
  CrossmodalTrialOptions o;
  o.negatives_per_positive = 10;
  const auto t = BuildCrossmodalTrials(GridStore(2, 1, 1), o);
  SetWarningSink(previous);
  CHECK(t.CountLabel(TrialLabel::kNontarget) == 2);
  CHECK(warnings.size() == 1);
}

TEST_CASE("identity split is disjoint, sized by ceiling and deterministic") {
  const auto store = GridStore(10, 2, 2);
  const auto split = SplitByIdentity(store, 0.25, 3);
  const auto first = split.first.Identities();
  const auto second = split.second.Identities();
  CHECK(second.size() == 3);
  CHECK(first.size() == 7);
  for (const auto& id : second) {
    CHECK(std::find(first.begin(), first.end(), id) == first.end());
  }
  CHECK(SplitByIdentity(store, 0.25, 3).second.Identities() == second);
  CHECK(split.first.size() + split.second.size() == store.size());
}

}  // namespace
}  // namespace avsr
