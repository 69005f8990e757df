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

#ifndef AVSR_EMBEDDING_STORE_H_
#define AVSR_EMBEDDING_STORE_H_

// Embeddings, trial lists and score sets, with their tab-separated file
// formats:
//
//   embeddings: record_id <TAB> identity_id <TAB> voice|face <TAB> c1,c2,...,cD
//   trials:     enroll_id <TAB> test_id [<TAB> target|nontarget]
//   scores:     enroll_id <TAB> test_id <TAB> score [<TAB> target|nontarget]
//
// Lines starting with '#' and blank lines are ignored on input.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

namespace avsr {

enum class Modality { kVoice, kFace };

std::string_view ModalityName(Modality m);
std::optional<Modality> ParseModality(std::string_view s);

struct EmbeddingRecord {
  std::string record_id;
  std::string identity_id;
  Modality modality = Modality::kVoice;
  Eigen::VectorXd vector;
};

// An immutable-after-construction collection of embeddings of one dimension.
// The dimension is fixed by the first record added unless declared up front.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(int dim);

  // Throws ValidationError on a dimension mismatch, a duplicate record id or
  // a non-finite coordinate.
  void Add(EmbeddingRecord record);

  size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  bool has_dim() const { return dim_.has_value(); }
  // Throws ValidationError when no dimension has been established.
  int dim() const;

  const std::vector<EmbeddingRecord>& records() const { return records_; }
  const EmbeddingRecord* Find(std::string_view record_id) const;
  // Throws ValidationError for an unknown id.
  const EmbeddingRecord& Get(std::string_view record_id) const;

  // Sorted, unique identity ids.
  std::vector<std::string> Identities() const;
  bool HasModality(Modality m) const;
  EmbeddingStore Filter(Modality m) const;

 private:
  std::optional<int> dim_;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, size_t> index_;
};

struct StoreSplit {
  EmbeddingStore first;
  EmbeddingStore second;
};

// Moves a seeded random ceil(fraction * identities) subset of identities
// into `second`; the rest stay in `first`.
StoreSplit SplitByIdentity(const EmbeddingStore& store, double fraction, std::uint64_t seed);

// Union of two stores; record ids must not collide.
EmbeddingStore MergeStores(const EmbeddingStore& a, const EmbeddingStore& b);

// `source` names the input in error messages ("<path>:<line>: ...").
EmbeddingStore ReadEmbeddings(std::istream& in, const std::string& source);
EmbeddingStore LoadEmbeddings(const std::string& path);
void WriteEmbeddings(const EmbeddingStore& store, std::ostream& out);
void SaveEmbeddings(const EmbeddingStore& store, const std::string& path);

enum class TrialLabel { kTarget, kNontarget };

std::string_view LabelName(TrialLabel label);
std::optional<TrialLabel> ParseLabel(std::string_view s);

struct Trial {
  std::string enroll_id;
  std::string test_id;
  std::optional<TrialLabel> label;

  bool operator==(const Trial&) const = default;
};

// Trials with unique (enroll, test) keys; either every trial is labeled or
// none is.
class TrialSet {
 public:
  void Add(Trial trial);
  size_t size() const { return trials_.size(); }
  bool empty() const { return trials_.empty(); }
  const std::vector<Trial>& trials() const { return trials_; }
  // True when the set is nonempty and carries labels.
  bool labeled() const { return !trials_.empty() && trials_.front().label.has_value(); }
  size_t CountLabel(TrialLabel label) const;

  bool operator==(const TrialSet& other) const { return trials_ == other.trials_; }

 private:
  std::vector<Trial> trials_;
  std::unordered_set<std::string> keys_;
};

TrialSet ReadTrials(std::istream& in, const std::string& source);
TrialSet LoadTrials(const std::string& path);
void WriteTrials(const TrialSet& trials, std::ostream& out);
void SaveTrials(const TrialSet& trials, const std::string& path);

struct ScoreEntry {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
  std::optional<TrialLabel> label;

  bool operator==(const ScoreEntry&) const = default;
};

// Scored trials. Scores are finite; labels are all-or-nothing.
class ScoreSet {
 public:
  void Add(ScoreEntry entry);
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<ScoreEntry>& entries() const { return entries_; }
  bool labeled() const { return !entries_.empty() && entries_.front().label.has_value(); }

  std::vector<double> Scores() const;
  std::vector<double> ScoresWithLabel(TrialLabel label) const;
  size_t CountLabel(TrialLabel label) const;

  bool operator==(const ScoreSet& other) const { return entries_ == other.entries_; }

 private:
  std::vector<ScoreEntry> entries_;
};

// Builds a ScoreSet from parallel target/nontarget score lists with
// synthetic ids; convenient for metric computations.
ScoreSet MakeScoreSet(const std::vector<double>& target_scores,
                      const std::vector<double>& nontarget_scores);

ScoreSet ReadScores(std::istream& in, const std::string& source);
ScoreSet LoadScores(const std::string& path);
void WriteScores(const ScoreSet& scores, std::ostream& out);
void SaveScores(const ScoreSet& scores, const std::string& path);

struct CrossmodalTrialOptions {
  int negatives_per_positive = 1;
  // Same-identity (voice, face) pairs kept per identity.
  int max_targets_per_identity = 50;
  std::uint64_t seed = 0;
};

// Labeled voice-versus-face trials: enroll_id is a voice record, test_id a
// face record. Targets pair records of one identity; nontargets are drawn
// uniformly without replacement from cross-identity pairs.
TrialSet BuildCrossmodalTrials(const EmbeddingStore& store,
                               const CrossmodalTrialOptions& options);

}  // namespace avsr

#endif  // AVSR_EMBEDDING_STORE_H_
