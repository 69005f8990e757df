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

#include "avsr/pipeline.h"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <unordered_map>

#include "avsr/error.h"
#include "avsr/fusion.h"
#include "avsr/text_io.h"

namespace avsr {
namespace {

template <typename F>
auto RunStage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const ValidationError& e) {
    throw ValidationError("stage '" + name + "': " + e.what());
  } catch (const std::exception& e) {
    throw RuntimeFailure("stage '" + name + "': " + e.what());
  }
}

const Segment& FindSegment(const std::map<std::string, Segment>& segments,
                           const std::string& id) {
  auto it = segments.find(id);
  if (it == segments.end()) throw ValidationError("unknown segment '" + id + "'");
  return it->second;
}

Eigen::VectorXd MeanVoice(const Segment& s, const std::string& id) {
  if (s.voices.empty()) throw ValidationError("segment '" + id + "' has no voice record");
  Eigen::VectorXd m = s.voices.front()->vector;
  for (size_t i = 1; i < s.voices.size(); ++i) m += s.voices[i]->vector;
  if (s.voices.size() > 1) m /= static_cast<double>(s.voices.size());
  return m;
}

std::vector<Eigen::VectorXd> Faces(const Segment& s, const std::string& id) {
  if (s.faces.empty()) throw ValidationError("segment '" + id + "' has no face record");
  std::vector<Eigen::VectorXd> out;
  out.reserve(s.faces.size());
  for (const auto* r : s.faces) out.push_back(r->vector);
  return out;
}

// Memoizes a per-segment computation.
template <typename T>
class SegmentCache {
 public:
  template <typename F>
  const T& Get(const std::string& id, F&& compute) {
    auto it = cache_.find(id);
    if (it == cache_.end()) it = cache_.emplace(id, compute()).first;
    return it->second;
  }

 private:
  std::unordered_map<std::string, T> cache_;
};

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : Split(s, ',')) {
    auto t = Trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

}  // namespace

std::string_view SystemName(SystemKind kind) {
  switch (kind) {
    case SystemKind::kAudio:
      return "audio";
    case SystemKind::kVisual:
      return "visual";
    case SystemKind::kVfnet:
      return "vfnet";
  }
  return "?";
}

std::optional<SystemKind> ParseSystem(std::string_view name) {
  if (name == "audio") return SystemKind::kAudio;
  if (name == "visual") return SystemKind::kVisual;
  if (name == "vfnet") return SystemKind::kVfnet;
  return std::nullopt;
}

std::string SegmentOf(std::string_view record_id) {
  return std::string(record_id.substr(0, record_id.find('/')));
}

std::map<std::string, Segment> GroupSegments(const EmbeddingStore& store) {
  std::map<std::string, Segment> out;
  for (const auto& r : store.records()) {
    Segment& s = out[SegmentOf(r.record_id)];
    (r.modality == Modality::kVoice ? s.voices : s.faces).push_back(&r);
  }
  return out;
}

ScoreSet ScoreAvTrials(SystemKind system, const EmbeddingStore& store, const TrialSet& trials,
                       const AvScoringModels& models) {
  if (system == SystemKind::kAudio && !models.audio) {
    throw ValidationError("audio scoring needs an audio back-end");
  }
  if (system == SystemKind::kVfnet && !models.vfnet) {
    throw ValidationError("vfnet scoring needs VFNet parameters");
  }
  const auto segments = GroupSegments(store);
  std::optional<PldaScorer> plda;
  if (system == SystemKind::kAudio) plda.emplace(models.audio->plda);

  SegmentCache<Eigen::VectorXd> enroll_cache;
  SegmentCache<Eigen::VectorXd> test_voice_cache;
  SegmentCache<std::vector<Eigen::VectorXd>> enroll_faces_cache;
  SegmentCache<std::vector<Eigen::VectorXd>> test_faces_cache;

  ScoreSet out;
  for (const Trial& t : trials.trials()) {
    const Segment& enroll = FindSegment(segments, t.enroll_id);
    const Segment& test = FindSegment(segments, t.test_id);
    double score = 0.0;
    switch (system) {
      case SystemKind::kAudio: {
        const auto& a = enroll_cache.Get(t.enroll_id, [&] {
          return models.audio->Project(MeanVoice(enroll, t.enroll_id));
        });
        const auto& b = test_voice_cache.Get(t.test_id, [&] {
          return models.audio->Project(MeanVoice(test, t.test_id));
        });
        score = plda->Llr(a, b);
        break;
      }
      case SystemKind::kVisual: {
        const auto& ef = enroll_faces_cache.Get(t.enroll_id, [&] { return Faces(enroll, t.enroll_id); });
        const auto& tf = test_faces_cache.Get(t.test_id, [&] { return Faces(test, t.test_id); });
        score = ScoreFaceTrial(ef, tf, models.pooling);
        break;
      }
      case SystemKind::kVfnet: {
        const auto& tv = enroll_cache.Get(t.enroll_id, [&] {
          return TransformVoice(*models.vfnet, MeanVoice(enroll, t.enroll_id));
        });
        const auto& tf = test_faces_cache.Get(t.test_id, [&] {
          std::vector<Eigen::VectorXd> out;
          for (const auto& f : Faces(test, t.test_id)) out.push_back(TransformFace(*models.vfnet, f));
          return out;
        });
        std::vector<double> probs;
        probs.reserve(tf.size());
        for (const auto& f : tf) probs.push_back(PairProbability(CosineSimilarity(tv, f)).p_same);
        score = PoolTopFraction(probs, models.pooling);
        break;
      }
    }
    out.Add({t.enroll_id, t.test_id, score, t.label});
  }
  return out;
}

const std::vector<std::string>& PipelineConfig::KvKeys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k = {"train_embeddings", "dev_embeddings", "dev_trials",
                                  "eval_embeddings",  "eval_trials",    "work_dir",
                                  "report",           "systems",        "valid_fraction",
                                  "negatives_per_positive", "max_targets_per_identity",
                                  "trial_seed",       "lda_dim",        "length_normalize",
                                  "plda_max_iterations", "plda_tolerance", "p_target",
                                  "c_miss",           "c_fa",           "pool_fraction"};
    for (const auto& t : TrainConfig::KvKeys()) k.push_back(t);
    return k;
  }();
  return keys;
}

PipelineConfig PipelineConfig::FromKv(const KvConfig& kv) {
  kv.CheckKnownKeys(KvKeys());
  PipelineConfig c;
  c.train_embeddings = kv.GetString("train_embeddings", "");
  c.dev_embeddings = kv.GetString("dev_embeddings", "");
  c.dev_trials = kv.GetString("dev_trials", "");
  c.eval_embeddings = kv.GetString("eval_embeddings", "");
  c.eval_trials = kv.GetString("eval_trials", "");
  c.work_dir = kv.GetString("work_dir", c.work_dir);
  c.report = kv.GetString("report", "");
  if (auto s = kv.Get("systems")) {
    c.systems.clear();
    for (const auto& name : SplitList(*s)) {
      auto kind = ParseSystem(name);
      if (!kind) throw ValidationError("unknown system '" + name + "'");
      c.systems.push_back(*kind);
    }
  }
  c.train = TrainConfig::FromKv(kv);
  c.valid_fraction = kv.GetDouble("valid_fraction", c.valid_fraction);
  c.crossmodal.negatives_per_positive =
      static_cast<int>(kv.GetInt("negatives_per_positive", c.crossmodal.negatives_per_positive));
  c.crossmodal.max_targets_per_identity = static_cast<int>(
      kv.GetInt("max_targets_per_identity", c.crossmodal.max_targets_per_identity));
  c.crossmodal.seed = static_cast<std::uint64_t>(
      kv.GetInt("trial_seed", static_cast<long long>(c.crossmodal.seed)));
  c.audio.lda_dim = static_cast<int>(kv.GetInt("lda_dim", c.audio.lda_dim));
  c.audio.length_normalize = kv.GetBool("length_normalize", c.audio.length_normalize);
  c.audio.plda.max_iterations =
      static_cast<int>(kv.GetInt("plda_max_iterations", c.audio.plda.max_iterations));
  c.audio.plda.tolerance = kv.GetDouble("plda_tolerance", c.audio.plda.tolerance);
  c.dcf.p_target = kv.GetDouble("p_target", c.dcf.p_target);
  c.dcf.c_miss = kv.GetDouble("c_miss", c.dcf.c_miss);
  c.dcf.c_fa = kv.GetDouble("c_fa", c.dcf.c_fa);
  c.pooling.fraction = kv.GetDouble("pool_fraction", c.pooling.fraction);
  return c;
}

void PipelineConfig::Validate() const {
  for (const auto* path : {&train_embeddings, &dev_embeddings, &dev_trials, &eval_embeddings,
                           &eval_trials}) {
    if (path->empty()) throw ValidationError("pipeline config is missing an input path");
    if (!std::filesystem::exists(*path)) {
      throw ValidationError("input file '" + *path + "' does not exist");
    }
  }
  if (systems.empty()) throw ValidationError("pipeline needs at least one system to fuse");
  train.Validate();
  dcf.Validate();
  pooling.Validate();
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
    throw ValidationError("valid_fraction must be in (0, 1)");
  }
}

std::string PipelineConfig::ReportPath() const {
  return report.empty() ? (std::filesystem::path(work_dir) / "report.tsv").string() : report;
}

void PipelineReport::WriteTsv(std::ostream& out) const {
  out << "system\teer\tmin_dcf\tact_dcf\n";
  for (const auto& r : rows) {
    out << r.system << '\t' << FormatDouble(r.eer) << '\t' << FormatDouble(r.min_dcf) << '\t'
        << FormatDouble(r.act_dcf) << '\n';
  }
}

void PipelineReport::WriteMarkdown(std::ostream& out) const {
  out << "| System | EER (%) | minDCF | actDCF |\n|---|---:|---:|---:|\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "| %s | %.2f | %.3f | %.3f |\n", r.system.c_str(),
                  100.0 * r.eer, r.min_dcf, r.act_dcf);
    out << buf;
  }
}

const ReportRow* PipelineReport::Find(std::string_view system) const {
  for (const auto& r : rows) {
    if (r.system == system) return &r;
  }
  return nullptr;
}

std::vector<std::vector<SystemKind>> ReportCombinations(const std::vector<SystemKind>& systems) {
  auto has = [&](SystemKind k) { return std::find(systems.begin(), systems.end(), k) != systems.end(); };
  const bool audio = has(SystemKind::kAudio);
  const bool visual = has(SystemKind::kVisual);
  const bool vfnet = has(SystemKind::kVfnet);
  std::vector<std::vector<SystemKind>> out;
  for (SystemKind base : {SystemKind::kAudio, SystemKind::kVisual}) {
    if (!has(base)) continue;
    out.push_back({base});
    if (vfnet) out.push_back({base, SystemKind::kVfnet});
  }
  if (audio && visual) {
    out.push_back({SystemKind::kAudio, SystemKind::kVisual});
    if (vfnet) out.push_back({SystemKind::kAudio, SystemKind::kVisual, SystemKind::kVfnet});
  }
  if (out.empty() && vfnet) out.push_back({SystemKind::kVfnet});
  return out;
}

std::string CombinationName(const std::vector<SystemKind>& combination) {
  std::string name;
  for (SystemKind k : combination) {
    if (!name.empty()) name += '+';
    name += SystemName(k);
  }
  return name;
}

PipelineReport RunPipeline(const PipelineConfig& config) {
  RunStage("config", [&] { config.Validate(); });
  const std::filesystem::path work(config.work_dir);
  RunStage("config", [&] { std::filesystem::create_directories(work); });

  const EmbeddingStore train = RunStage("load", [&] { return LoadEmbeddings(config.train_embeddings); });
  const EmbeddingStore dev = RunStage("load", [&] { return LoadEmbeddings(config.dev_embeddings); });
  const EmbeddingStore eval = RunStage("load", [&] { return LoadEmbeddings(config.eval_embeddings); });
  const TrialSet dev_trials = RunStage("load", [&] { return LoadTrials(config.dev_trials); });
  const TrialSet eval_trials = RunStage("load", [&] { return LoadTrials(config.eval_trials); });

  auto uses = [&](SystemKind k) {
    return std::find(config.systems.begin(), config.systems.end(), k) != config.systems.end();
  };

  AvScoringModels models;
  models.pooling = config.pooling;
  AudioBackend audio;
  if (uses(SystemKind::kAudio)) {
    audio = RunStage("fit-backend", [&] { return FitAudioBackend(train, config.audio); });
    RunStage("fit-backend", [&] { audio.Save((work / "audio_backend.ckpt").string()); });
    models.audio = &audio;
  }
  VFNetParams vfnet;
  if (uses(SystemKind::kVfnet)) {
    const TrainReport report = RunStage("train-vfnet", [&] {
      return TrainOnStore(train, config.train, config.crossmodal, config.valid_fraction);
    });
    vfnet = report.final_params;
    RunStage("train-vfnet", [&] {
      vfnet.Save((work / "vfnet.ckpt").string());
      report.SaveTsv((work / "vfnet_train.tsv").string());
    });
    models.vfnet = &vfnet;
  }

  std::map<SystemKind, ScoreSet> dev_scores, eval_scores;
  for (SystemKind k : config.systems) {
    const std::string name(SystemName(k));
    RunStage("score", [&] {
      dev_scores[k] = ScoreAvTrials(k, dev, dev_trials, models);
      eval_scores[k] = ScoreAvTrials(k, eval, eval_trials, models);
      SaveScores(dev_scores[k], (work / ("dev_" + name + ".scores")).string());
      SaveScores(eval_scores[k], (work / ("eval_" + name + ".scores")).string());
    });
  }

  PipelineReport report;
  for (const auto& combo : ReportCombinations(config.systems)) {
    const std::string name = CombinationName(combo);
    RunStage("fuse", [&] {
      std::vector<ScoreSet> dev_sys, eval_sys;
      for (SystemKind k : combo) {
        dev_sys.push_back(dev_scores.at(k));
        eval_sys.push_back(eval_scores.at(k));
      }
      const FusionModel model = FitFusion(dev_sys, config.dcf).model;
      model.Save((work / ("fusion_" + name + ".ckpt")).string());
      const ScoreSet fused = ApplyFusion(model, eval_sys);
      SaveScores(fused, (work / ("eval_fused_" + name + ".scores")).string());
      const MetricReport m = Evaluate(fused, config.dcf);
      report.rows.push_back({name, m.eer, m.min_dcf, m.act_dcf});
    });
  }

  RunStage("report", [&] {
    auto out = OpenForWrite(config.ReportPath());
    report.WriteTsv(out);
    if (!out) throw RuntimeFailure("write failed for '" + config.ReportPath() + "'");
  });
  return report;
}

}  // namespace avsr
