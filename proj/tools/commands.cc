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

#include "commands.h"

#include <filesystem>
#include <iostream>
#include <optional>

#include "avsr/backend.h"
#include "avsr/embedding_store.h"
#include "avsr/error.h"
#include "avsr/fusion.h"
#include "avsr/metrics.h"
#include "avsr/pipeline.h"
#include "avsr/synth.h"
#include "avsr/text_io.h"
#include "avsr/trainer.h"

namespace avsr::cli {
namespace {

std::string FlagName(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

std::string RequirePath(const KvConfig& kv, const std::string& key) {
  auto v = kv.Get(key);
  if (!v || v->empty()) throw ValidationError("missing required option " + FlagName(key));
  return *v;
}

std::string RequireFile(const KvConfig& kv, const std::string& key) {
  std::string path = RequirePath(kv, key);
  if (!std::filesystem::is_regular_file(path)) {
    throw ValidationError(FlagName(key) + ": file '" + path + "' does not exist");
  }
  return path;
}

std::vector<std::string> PathList(const KvConfig& kv, const std::string& key) {
  std::vector<std::string> out;
  if (auto v = kv.Get(key)) {
    for (auto part : Split(*v, ',')) {
      auto p = std::string(Trim(part));
      if (p.empty()) continue;
      if (!std::filesystem::is_regular_file(p)) {
        throw ValidationError(FlagName(key) + ": file '" + p + "' does not exist");
      }
      out.push_back(p);
    }
  }
  return out;
}

DcfParams DcfFromKv(const KvConfig& kv) {
  DcfParams p;
  p.p_target = kv.GetDouble("p_target", p.p_target);
  p.c_miss = kv.GetDouble("c_miss", p.c_miss);
  p.c_fa = kv.GetDouble("c_fa", p.c_fa);
  p.Validate();
  return p;
}

CrossmodalTrialOptions TrialOptionsFromKv(const KvConfig& kv) {
  CrossmodalTrialOptions o;
  o.negatives_per_positive =
      static_cast<int>(kv.GetInt("negatives_per_positive", o.negatives_per_positive));
  o.max_targets_per_identity =
      static_cast<int>(kv.GetInt("max_targets_per_identity", o.max_targets_per_identity));
  o.seed = static_cast<std::uint64_t>(kv.GetInt("trial_seed", static_cast<long long>(o.seed)));
  return o;
}

std::string Absolute(const std::filesystem::path& p) {
  return std::filesystem::absolute(p).lexically_normal().string();
}

}  // namespace

Command::Command(CLI::App& parent, const std::string& name, const std::string& description)
    : app_(parent.add_subcommand(name, description)) {
  app_->add_option("--config", config_path_, "flat key = value file; explicit flags override it")
      ->check(CLI::ExistingFile);
}

void Command::Key(const std::string& key, const std::string& help) {
  keys_.push_back(key);
  app_->add_option(FlagName(key), values_[key], help + " [config key: " + key + "]");
}

void Command::Keys(const std::vector<std::string>& keys, const std::string& help) {
  for (const auto& k : keys) Key(k, help);
}

KvConfig Command::Resolve() const {
  KvConfig kv;
  if (!config_path_.empty()) kv = KvConfig::Load(config_path_);
  kv.CheckKnownKeys(keys_);
  for (const auto& key : keys_) {
    if (app_->count(FlagName(key)) > 0) kv.Set(key, values_.at(key));
  }
  return kv;
}

int RunSynth(const KvConfig& kv) {
  const GenConfig gen = GenConfig::FromKv(kv);
  const AvBenchConfig av = AvBenchConfig::FromKv(kv);
  gen.Validate();
  av.Validate();
  const std::filesystem::path dir = RequirePath(kv, "out_dir");
  std::filesystem::create_directories(dir);

  const SynthData data = Generate(gen);
  SaveEmbeddings(data.train, (dir / "train.emb").string());
  SaveEmbeddings(data.test, (dir / "test.emb").string());
  gen.ToKv().Save((dir / "ground_truth.cfg").string());

  CrossmodalTrialOptions trial_options;
  trial_options.seed = gen.seed;
  SaveTrials(BuildCrossmodalTrials(data.test, trial_options), (dir / "test.trials").string());

  const AvBench bench = GenerateAvBench(gen, av);
  SaveEmbeddings(bench.dev.store, (dir / "dev.emb").string());
  SaveTrials(bench.dev.trials, (dir / "dev.trials").string());
  SaveEmbeddings(bench.eval.store, (dir / "eval.emb").string());
  SaveTrials(bench.eval.trials, (dir / "eval.trials").string());

  KvConfig pipeline;
  pipeline.Set("train_embeddings", Absolute(dir / "train.emb"));
  pipeline.Set("dev_embeddings", Absolute(dir / "dev.emb"));
  pipeline.Set("dev_trials", Absolute(dir / "dev.trials"));
  pipeline.Set("eval_embeddings", Absolute(dir / "eval.emb"));
  pipeline.Set("eval_trials", Absolute(dir / "eval.trials"));
  pipeline.Set("work_dir", Absolute(dir / "work"));
  pipeline.Set("lda_dim", std::to_string(gen.d_id));
  pipeline.Save((dir / "pipeline.cfg").string());
  return 0;
}

int RunTrainVfnet(const KvConfig& kv) {
  TrainConfig config = TrainConfig::FromKv(kv);
  config.Validate();
  const EmbeddingStore store = LoadEmbeddings(RequireFile(kv, "embeddings"));
  const std::string out = RequirePath(kv, "out");

  TrainReport report;
  if (kv.Has("trials")) {
    const TrialSet train = LoadTrials(RequireFile(kv, "trials"));
    TrialSet valid;
    if (kv.Has("valid_trials")) valid = LoadTrials(RequireFile(kv, "valid_trials"));
    if (kv.Has("init")) {
      report = Train(store, train, valid, config, VFNetParams::Load(RequireFile(kv, "init")));
    } else {
      report = Train(store, train, valid, config);
    }
  } else {
    if (kv.Has("init")) throw ValidationError("--init requires --trials");
    report = TrainOnStore(store, config, TrialOptionsFromKv(kv),
                          kv.GetDouble("valid_fraction", 0.1));
  }
  report.final_params.Save(out);
  if (auto path = kv.Get("report")) {
    report.SaveTsv(*path);
  } else {
    report.WriteTsv(std::cout);
  }
  return 0;
}

int RunFitBackend(const KvConfig& kv) {
  AudioBackendOptions options;
  options.lda_dim = static_cast<int>(kv.GetInt("lda_dim", options.lda_dim));
  options.length_normalize = kv.GetBool("length_normalize", options.length_normalize);
  options.plda.max_iterations =
      static_cast<int>(kv.GetInt("plda_max_iterations", options.plda.max_iterations));
  options.plda.tolerance = kv.GetDouble("plda_tolerance", options.plda.tolerance);
  const EmbeddingStore store = LoadEmbeddings(RequireFile(kv, "embeddings"));
  const std::string out = RequirePath(kv, "out");
  FitAudioBackend(store, options).Save(out);
  return 0;
}

int RunScore(const KvConfig& kv) {
  const std::string system = RequirePath(kv, "system");
  const EmbeddingStore store = LoadEmbeddings(RequireFile(kv, "embeddings"));
  const TrialSet trials = LoadTrials(RequireFile(kv, "trials"));

  ScoreSet scores;
  if (system == "oracle") {
    const GenConfig gen = GenConfig::FromKv(KvConfig::Load(RequireFile(kv, "model")));
    gen.Validate();
    const OracleScorer oracle(gen);
    for (const Trial& t : trials.trials()) {
      const auto& v = store.Get(t.enroll_id);
      const auto& f = store.Get(t.test_id);
      if (v.modality != Modality::kVoice || f.modality != Modality::kFace) {
        throw ValidationError("oracle trials must pair a voice with a face: " + t.enroll_id +
                              " / " + t.test_id);
      }
      scores.Add({t.enroll_id, t.test_id, oracle.Score(v.vector, f.vector), t.label});
    }
  } else {
    auto kind = ParseSystem(system);
    if (!kind) throw ValidationError("--system: unknown system '" + system + "'");
    AvScoringModels models;
    models.pooling.fraction = kv.GetDouble("pool_fraction", models.pooling.fraction);
    models.pooling.Validate();
    std::optional<AudioBackend> audio;
    std::optional<VFNetParams> vfnet;
    if (*kind == SystemKind::kAudio) {
      audio = AudioBackend::Load(RequireFile(kv, "model"));
      models.audio = &*audio;
    } else if (*kind == SystemKind::kVfnet) {
      vfnet = VFNetParams::Load(RequireFile(kv, "model"));
      models.vfnet = &*vfnet;
    }
    scores = ScoreAvTrials(*kind, store, trials, models);
  }
  if (auto out = kv.Get("out")) {
    SaveScores(scores, *out);
  } else {
    WriteScores(scores, std::cout);
  }
  return 0;
}

int RunFuse(const KvConfig& kv) {
  const DcfParams dcf = DcfFromKv(kv);
  const auto dev_paths = PathList(kv, "dev");
  const auto eval_paths = PathList(kv, "eval");

  FusionModel model;
  if (!dev_paths.empty()) {
    std::vector<ScoreSet> dev;
    for (const auto& p : dev_paths) dev.push_back(LoadScores(p));
    FusionOptions options;
    options.l2 = kv.GetDouble("l2", options.l2);
    options.max_weight_norm = kv.GetDouble("max_weight_norm", options.max_weight_norm);
    model = FitFusion(dev, dcf, options).model;
    if (auto path = kv.Get("model_out")) model.Save(*path);
  } else if (kv.Has("model")) {
    model = FusionModel::Load(RequireFile(kv, "model"));
  } else {
    throw ValidationError("fuse needs --dev score files to fit or a --model to apply");
  }

  if (eval_paths.empty()) {
    if (!kv.Has("model_out")) model.ToCheckpoint().Write(std::cout);
    return 0;
  }
  if (eval_paths.size() != model.weights.size()) {
    throw ValidationError("--eval: expected " + std::to_string(model.weights.size()) +
                          " score files, got " + std::to_string(eval_paths.size()));
  }
  std::vector<ScoreSet> eval;
  for (const auto& p : eval_paths) eval.push_back(LoadScores(p));
  const ScoreSet fused = ApplyFusion(model, eval);
  if (auto out = kv.Get("out")) {
    SaveScores(fused, *out);
  } else {
    WriteScores(fused, std::cout);
  }
  return 0;
}

int RunEval(const KvConfig& kv) {
  const DcfParams dcf = DcfFromKv(kv);
  const ScoreSet scores = LoadScores(RequireFile(kv, "scores"));
  const MetricReport report = Evaluate(scores, dcf);
  if (auto out = kv.Get("out")) {
    auto f = OpenForWrite(*out);
    WriteMetricReport(report, f);
  } else {
    WriteMetricReport(report, std::cout);
  }
  if (auto det = kv.Get("det")) {
    auto f = OpenForWrite(*det);
    WriteRocPoints(RocPoints(scores), f);
  }
  return 0;
}

int RunPipelineCommand(const KvConfig& kv, bool markdown) {
  const PipelineReport report = RunPipeline(PipelineConfig::FromKv(kv));
  if (markdown) report.WriteMarkdown(std::cout);
  return 0;
}

}  // namespace avsr::cli
