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

#include "avsr/embedding_store.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>

#include "avsr/error.h"
#include "avsr/log.h"
#include "avsr/text_io.h"

namespace avsr {
namespace {

[[noreturn]] void FailAt(const std::string& source, size_t line_no,
                         const std::string& what) {
  throw ValidationError(source + ":" + std::to_string(line_no) + ": " + what);
}

bool SkipLine(std::string_view line) {
  std::string_view t = Trim(line);
  return t.empty() || t.front() == '#';
}

std::string StripCr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::string TrialKey(std::string_view enroll, std::string_view test) {
  std::string key(enroll);
  key.push_back('\t');
  key.append(test);
  return key;
}

}  // namespace

std::string_view ModalityName(Modality m) {
  return m == Modality::kVoice ? "voice" : "face";
}

std::optional<Modality> ParseModality(std::string_view s) {
  if (s == "voice") return Modality::kVoice;
  if (s == "face") return Modality::kFace;
  return std::nullopt;
}

std::string_view LabelName(TrialLabel label) {
  return label == TrialLabel::kTarget ? "target" : "nontarget";
}

std::optional<TrialLabel> ParseLabel(std::string_view s) {
  if (s == "target") return TrialLabel::kTarget;
  if (s == "nontarget") return TrialLabel::kNontarget;
  return std::nullopt;
}

EmbeddingStore::EmbeddingStore(int dim) {
  if (dim <= 0) throw ValidationError("embedding dimension must be positive");
  dim_ = dim;
}

void EmbeddingStore::Add(EmbeddingRecord record) {
  if (record.record_id.empty()) throw ValidationError("empty record id");
  const int n = static_cast<int>(record.vector.size());
  if (n == 0) throw ValidationError("record '" + record.record_id + "' has no coordinates");
  if (dim_ && *dim_ != n) {
    throw ValidationError("dimension mismatch for record '" + record.record_id +
                          "': expected " + std::to_string(*dim_) + ", got " +
                          std::to_string(n));
  }
  if (!record.vector.allFinite()) {
    throw ValidationError("non-finite value in record '" + record.record_id + "'");
  }
  if (index_.count(record.record_id)) {
    throw ValidationError("duplicate record id '" + record.record_id + "'");
  }
  dim_ = n;
  index_.emplace(record.record_id, records_.size());
  records_.push_back(std::move(record));
}

int EmbeddingStore::dim() const {
  if (!dim_) throw ValidationError("embedding store has no dimension (empty store)");
  return *dim_;
}

const EmbeddingRecord* EmbeddingStore::Find(std::string_view record_id) const {
  auto it = index_.find(std::string(record_id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

const EmbeddingRecord& EmbeddingStore::Get(std::string_view record_id) const {
  const EmbeddingRecord* r = Find(record_id);
  if (!r) throw ValidationError("unknown record id '" + std::string(record_id) + "'");
  return *r;
}

std::vector<std::string> EmbeddingStore::Identities() const {
  std::set<std::string> ids;
  for (const auto& r : records_) ids.insert(r.identity_id);
  return {ids.begin(), ids.end()};
}

bool EmbeddingStore::HasModality(Modality m) const {
  return std::any_of(records_.begin(), records_.end(),
                     [m](const EmbeddingRecord& r) { return r.modality == m; });
}

EmbeddingStore EmbeddingStore::Filter(Modality m) const {
  EmbeddingStore out;
  if (dim_) out = EmbeddingStore(*dim_);
  for (const auto& r : records_) {
    if (r.modality == m) out.Add(r);
  }
  return out;
}

StoreSplit SplitByIdentity(const EmbeddingStore& store, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ValidationError("identity split fraction must be in [0, 1)");
  }
  std::vector<std::string> ids = store.Identities();
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_second = static_cast<size_t>(std::ceil(fraction * static_cast<double>(ids.size())));
  const std::set<std::string> second(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_second));
  StoreSplit out;
  if (store.has_dim()) out = {EmbeddingStore(store.dim()), EmbeddingStore(store.dim())};
  for (const auto& r : store.records()) {
    (second.count(r.identity_id) ? out.second : out.first).Add(r);
  }
  return out;
}

EmbeddingStore MergeStores(const EmbeddingStore& a, const EmbeddingStore& b) {
  EmbeddingStore out = a;
  for (const auto& r : b.records()) out.Add(r);
  return out;
}

EmbeddingStore ReadEmbeddings(std::istream& in, const std::string& source) {
  EmbeddingStore store;
  std::string raw;
  size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = StripCr(std::move(raw));
    if (SkipLine(line)) continue;
    auto fields = Split(line, '\t');
    if (fields.size() != 4) {
      FailAt(source, line_no, "expected 4 tab-separated fields, got " +
                                  std::to_string(fields.size()));
    }
    auto modality = ParseModality(fields[2]);
    if (!modality) FailAt(source, line_no, "unknown modality '" + std::string(fields[2]) + "'");
    auto coords = Split(fields[3], ',');
    Eigen::VectorXd v(static_cast<Eigen::Index>(coords.size()));
    for (size_t i = 0; i < coords.size(); ++i) {
      auto value = ParseDouble(Trim(coords[i]));
      if (!value) {
        FailAt(source, line_no, "malformed coordinate '" + std::string(coords[i]) + "'");
      }
      if (!std::isfinite(*value)) FailAt(source, line_no, "non-finite coordinate");
      v[static_cast<Eigen::Index>(i)] = *value;
    }
    try {
      store.Add({std::string(fields[0]), std::string(fields[1]), *modality, std::move(v)});
    } catch (const ValidationError& e) {
      FailAt(source, line_no, e.what());
    }
  }
  return store;
}

EmbeddingStore LoadEmbeddings(const std::string& path) {
  auto in = OpenForRead(path);
  return ReadEmbeddings(in, path);
}

void WriteEmbeddings(const EmbeddingStore& store, std::ostream& out) {
  for (const auto& r : store.records()) {
    out << r.record_id << '\t' << r.identity_id << '\t' << ModalityName(r.modality) << '\t';
    for (Eigen::Index i = 0; i < r.vector.size(); ++i) {
      if (i) out << ',';
      out << FormatDouble(r.vector[i]);
    }
    out << '\n';
  }
}

void SaveEmbeddings(const EmbeddingStore& store, const std::string& path) {
  auto out = OpenForWrite(path);
  WriteEmbeddings(store, out);
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

void TrialSet::Add(Trial trial) {
  if (!trials_.empty() && trials_.front().label.has_value() != trial.label.has_value()) {
    throw ValidationError("trial set mixes labeled and unlabeled trials");
  }
  std::string key = TrialKey(trial.enroll_id, trial.test_id);
  if (!keys_.insert(key).second) {
    throw ValidationError("duplicate trial (" + trial.enroll_id + ", " + trial.test_id + ")");
  }
  trials_.push_back(std::move(trial));
}

size_t TrialSet::CountLabel(TrialLabel label) const {
  return static_cast<size_t>(std::count_if(
      trials_.begin(), trials_.end(), [label](const Trial& t) { return t.label == label; }));
}

TrialSet ReadTrials(std::istream& in, const std::string& source) {
  TrialSet trials;
  std::string raw;
  size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = StripCr(std::move(raw));
    if (SkipLine(line)) continue;
    auto fields = Split(line, '\t');
    if (fields.size() != 2 && fields.size() != 3) {
      FailAt(source, line_no, "expected 2 or 3 tab-separated fields");
    }
    Trial t{std::string(fields[0]), std::string(fields[1]), std::nullopt};
    if (fields.size() == 3) {
      t.label = ParseLabel(fields[2]);
      if (!t.label) FailAt(source, line_no, "unknown label '" + std::string(fields[2]) + "'");
    }
    try {
      trials.Add(std::move(t));
    } catch (const ValidationError& e) {
      FailAt(source, line_no, e.what());
    }
  }
  return trials;
}

TrialSet LoadTrials(const std::string& path) {
  auto in = OpenForRead(path);
  return ReadTrials(in, path);
}

void WriteTrials(const TrialSet& trials, std::ostream& out) {
  for (const auto& t : trials.trials()) {
    out << t.enroll_id << '\t' << t.test_id;
    if (t.label) out << '\t' << LabelName(*t.label);
    out << '\n';
  }
}

void SaveTrials(const TrialSet& trials, const std::string& path) {
  auto out = OpenForWrite(path);
  WriteTrials(trials, out);
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

void ScoreSet::Add(ScoreEntry entry) {
  if (!std::isfinite(entry.score)) {
    throw ValidationError("non-finite score for trial (" + entry.enroll_id + ", " +
                          entry.test_id + ")");
  }
  if (!entries_.empty() && entries_.front().label.has_value() != entry.label.has_value()) {
    throw ValidationError("score set mixes labeled and unlabeled entries");
  }
  entries_.push_back(std::move(entry));
}

std::vector<double> ScoreSet::Scores() const {
  std::vector<double> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.score);
  return out;
}

std::vector<double> ScoreSet::ScoresWithLabel(TrialLabel label) const {
  std::vector<double> out;
  for (const auto& e : entries_) {
    if (e.label == label) out.push_back(e.score);
  }
  return out;
}

size_t ScoreSet::CountLabel(TrialLabel label) const {
  return static_cast<size_t>(std::count_if(
      entries_.begin(), entries_.end(), [label](const ScoreEntry& e) { return e.label == label; }));
}

ScoreSet MakeScoreSet(const std::vector<double>& target_scores,
                      const std::vector<double>& nontarget_scores) {
  ScoreSet set;
  for (size_t i = 0; i < target_scores.size(); ++i) {
    set.Add({"t" + std::to_string(i), "t" + std::to_string(i), target_scores[i],
             TrialLabel::kTarget});
  }
  for (size_t i = 0; i < nontarget_scores.size(); ++i) {
    set.Add({"n" + std::to_string(i), "n" + std::to_string(i), nontarget_scores[i],
             TrialLabel::kNontarget});
  }
  return set;
}

ScoreSet ReadScores(std::istream& in, const std::string& source) {
  ScoreSet scores;
  std::string raw;
  size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = StripCr(std::move(raw));
    if (SkipLine(line)) continue;
    auto fields = Split(line, '\t');
    if (fields.size() != 3 && fields.size() != 4) {
      FailAt(source, line_no, "expected 3 or 4 tab-separated fields");
    }
    auto value = ParseDouble(fields[2]);
    if (!value) FailAt(source, line_no, "malformed score '" + std::string(fields[2]) + "'");
    ScoreEntry e{std::string(fields[0]), std::string(fields[1]), *value, std::nullopt};
    if (fields.size() == 4) {
      e.label = ParseLabel(fields[3]);
      if (!e.label) FailAt(source, line_no, "unknown label '" + std::string(fields[3]) + "'");
    }
    try {
      scores.Add(std::move(e));
    } catch (const ValidationError& err) {
      FailAt(source, line_no, err.what());
    }
  }
  return scores;
}

ScoreSet LoadScores(const std::string& path) {
  auto in = OpenForRead(path);
  return ReadScores(in, path);
}

void WriteScores(const ScoreSet& scores, std::ostream& out) {
  for (const auto& e : scores.entries()) {
    out << e.enroll_id << '\t' << e.test_id << '\t' << FormatDouble(e.score);
    if (e.label) out << '\t' << LabelName(*e.label);
    out << '\n';
  }
}

void SaveScores(const ScoreSet& scores, const std::string& path) {
  auto out = OpenForWrite(path);
  WriteScores(scores, out);
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

TrialSet BuildCrossmodalTrials(const EmbeddingStore& store,
                               const CrossmodalTrialOptions& options) {
  if (options.negatives_per_positive < 1) {
    throw ValidationError("negatives_per_positive must be a positive integer");
  }
  if (options.max_targets_per_identity < 1) {
    throw ValidationError("max_targets_per_identity must be positive");
  }
  if (!store.HasModality(Modality::kVoice) || !store.HasModality(Modality::kFace)) {
    throw ValidationError("cross-modal trials need both voice and face records");
  }
  if (store.Identities().size() < 2) {
    throw ValidationError("cross-modal trials need at least 2 identities to form negatives");
  }

  std::vector<const EmbeddingRecord*> voices, faces;
  std::map<std::string, std::pair<std::vector<size_t>, std::vector<size_t>>> by_identity;
  for (const auto& r : store.records()) {
    if (r.modality == Modality::kVoice) {
      by_identity[r.identity_id].first.push_back(voices.size());
      voices.push_back(&r);
    } else {
      by_identity[r.identity_id].second.push_back(faces.size());
      faces.push_back(&r);
    }
  }

  std::mt19937_64 rng(options.seed);
  TrialSet trials;
  size_t n_targets = 0;
  const size_t cap = static_cast<size_t>(options.max_targets_per_identity);
  for (const auto& [identity, members] : by_identity) {
    const auto& [vi, fi] = members;
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t v : vi) {
      for (size_t f : fi) pairs.emplace_back(v, f);
    }
    if (pairs.size() > cap) {
      std::shuffle(pairs.begin(), pairs.end(), rng);
      pairs.resize(cap);
      std::sort(pairs.begin(), pairs.end());
    }
    for (auto [v, f] : pairs) {
      trials.Add({voices[v]->record_id, faces[f]->record_id, TrialLabel::kTarget});
      ++n_targets;
    }
  }

  size_t cross_pairs = 0;
  for (const auto& [identity, members] : by_identity) {
    cross_pairs += members.first.size() * (faces.size() - members.second.size());
  }
  size_t wanted = n_targets * static_cast<size_t>(options.negatives_per_positive);
  if (wanted > cross_pairs) {
    Warn("requested " + std::to_string(wanted) + " nontarget trials but only " +
         std::to_string(cross_pairs) + " cross-identity pairs exist; using all");
    wanted = cross_pairs;
  }

  auto add_nontarget = [&](size_t v, size_t f) {
    trials.Add({voices[v]->record_id, faces[f]->record_id, TrialLabel::kNontarget});
  };
  if (2 * wanted > cross_pairs) {
    // Dense regime: enumerate every cross pair and take a random subset.
    std::vector<std::pair<size_t, size_t>> all;
    all.reserve(cross_pairs);
    for (size_t v = 0; v < voices.size(); ++v) {
      for (size_t f = 0; f < faces.size(); ++f) {
        if (voices[v]->identity_id != faces[f]->identity_id) all.emplace_back(v, f);
      }
    }
    std::shuffle(all.begin(), all.end(), rng);
    for (size_t i = 0; i < wanted; ++i) add_nontarget(all[i].first, all[i].second);
  } else {
    std::uniform_int_distribution<size_t> pick_voice(0, voices.size() - 1);
    std::uniform_int_distribution<size_t> pick_face(0, faces.size() - 1);
    std::set<std::pair<size_t, size_t>> taken;
    while (taken.size() < wanted) {
      size_t v = pick_voice(rng);
      size_t f = pick_face(rng);
      if (voices[v]->identity_id == faces[f]->identity_id) continue;
      if (!taken.emplace(v, f).second) continue;
      add_nontarget(v, f);
    }
  }
  return trials;
}

}  // namespace avsr
