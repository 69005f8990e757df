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

#ifndef AVSR_PIPELINE_H_
#define AVSR_PIPELINE_H_

// End-to-end audio-visual experiment: audio (LDA + PLDA), visual (cosine,
// pooled) and VFNet (enrollment voice vs test faces, pooled) systems, fused
// by logistic regression fitted on a development split and evaluated on an
// evaluation split.
//
// Audio-visual stores group records into segments by record id: the part
// before the first '/' names the segment ("tst-00017/f2" belongs to segment
// "tst-00017"). Trial lists pair segment ids.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avsr/backend.h"
#include "avsr/embedding_store.h"
#include "avsr/kv_config.h"
#include "avsr/metrics.h"
#include "avsr/trainer.h"
#include "avsr/vfnet.h"

namespace avsr {

enum class SystemKind { kAudio, kVisual, kVfnet };

std::string_view SystemName(SystemKind kind);
std::optional<SystemKind> ParseSystem(std::string_view name);

std::string SegmentOf(std::string_view record_id);

struct Segment {
  std::vector<const EmbeddingRecord*> voices;
  std::vector<const EmbeddingRecord*> faces;
};

std::map<std::string, Segment> GroupSegments(const EmbeddingStore& store);

struct AvScoringModels {
  const AudioBackend* audio = nullptr;
  const VFNetParams* vfnet = nullptr;
  PoolingRule pooling;
};

// Scores segment-level trials with one system. A segment with several voices
// uses their mean embedding. Throws ValidationError for unknown segments or a
// segment lacking the modality the system needs.
ScoreSet ScoreAvTrials(SystemKind system, const EmbeddingStore& store, const TrialSet& trials,
                       const AvScoringModels& models);

struct PipelineConfig {
  std::string train_embeddings;
  std::string dev_embeddings;
  std::string dev_trials;
  std::string eval_embeddings;
  std::string eval_trials;
  std::string work_dir = ".";
  std::string report;  // defaults to <work_dir>/report.tsv

  std::vector<SystemKind> systems = {SystemKind::kAudio, SystemKind::kVisual,
                                     SystemKind::kVfnet};
  TrainConfig train;
  CrossmodalTrialOptions crossmodal;
  double valid_fraction = 0.1;
  AudioBackendOptions audio;
  DcfParams dcf;
  PoolingRule pooling;

  // Throws ValidationError for missing paths or out-of-range values.
  void Validate() const;
  static PipelineConfig FromKv(const KvConfig& kv);
  static const std::vector<std::string>& KvKeys();
  std::string ReportPath() const;
};

struct ReportRow {
  std::string system;
  double eer = 0.0;
  double min_dcf = 0.0;
  double act_dcf = 0.0;

  bool operator==(const ReportRow&) const = default;
};

struct PipelineReport {
  std::vector<ReportRow> rows;

  void WriteTsv(std::ostream& out) const;
  void WriteMarkdown(std::ostream& out) const;
  const ReportRow* Find(std::string_view system) const;
};

// Fusion combinations reported for a system list, in report order: each
// single-modality system alone and with VFNet, then audio+visual alone and
// with VFNet.
std::vector<std::vector<SystemKind>> ReportCombinations(const std::vector<SystemKind>& systems);
std::string CombinationName(const std::vector<SystemKind>& combination);

// Runs every stage, writing intermediates into work_dir and the report TSV.
// A failing stage is reported as "stage '<name>': <error>".
PipelineReport RunPipeline(const PipelineConfig& config);

}  // namespace avsr

#endif  // AVSR_PIPELINE_H_
