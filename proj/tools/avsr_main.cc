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

// avsr: command-line front end for the audio-visual speaker recognition
// back-end. Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "avsr/error.h"
#include "avsr/pipeline.h"
#include "avsr/synth.h"
#include "avsr/trainer.h"
#include "commands.h"

namespace {

using avsr::cli::Command;

void AddTrainKeys(Command& c) {
  c.Key("lr", "learning rate (default 1e-3)");
  c.Key("batch_size", "pairs per mini-batch, half target (default 256)");
  c.Key("max_epochs", "epoch limit (default 50)");
  c.Key("patience", "epochs without validation improvement before stopping (default 5)");
  c.Key("seed", "initialization and shuffling seed (default 0)");
  c.Key("optimizer", "sgd, adam or adam(b1,b2,eps) (default adam)");
  c.Key("hidden_dim", "width of the first layer of each branch (default 256)");
  c.Key("output_dim", "width of the shared output space (default 128)");
}

void AddTrialKeys(Command& c) {
  c.Key("negatives_per_positive", "nontarget trials per target trial (default 1)");
  c.Key("max_targets_per_identity", "cap on target trials per identity (default 50)");
  c.Key("trial_seed", "seed for trial sampling and the validation split (default 0)");
}

void AddDcfKeys(Command& c) {
  c.Key("p_target", "target prior (default 0.05)");
  c.Key("c_miss", "miss cost (default 1)");
  c.Key("c_fa", "false-alarm cost (default 1)");
}

void AddBackendKeys(Command& c) {
  c.Key("lda_dim", "LDA output dimension, capped by classes-1 and input dim (default 150)");
  c.Key("length_normalize", "length-normalize after LDA: true/false (default true)");
  c.Key("plda_max_iterations", "EM iteration limit (default 100)");
  c.Key("plda_tolerance", "EM stop when the per-sample log-likelihood gain is below (default 1e-6)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-visual speaker recognition back-end: embeddings in, scores and reports out."};
  app.require_subcommand(1);

  Command synth(app, "synth", "Generate synthetic voice/face embeddings and audio-visual trials");
  synth.Key("out_dir", "output directory");
  synth.Key("d_id", "identity space dimension (default 16)");
  synth.Key("d_voice", "voice embedding dimension (default 64)");
  synth.Key("d_face", "face embedding dimension; must equal d_voice (default 64)");
  synth.Key("n_identities_train", "training identities (default 500)");
  synth.Key("n_identities_test", "held-out identities (default 100)");
  synth.Key("voice_sessions", "voice sessions per identity (default 4)");
  synth.Key("face_sessions", "face sessions per identity (default 4)");
  synth.Key("session_noise_sigma", "session noise standard deviation (default 0.5)");
  synth.Key("seed", "generator seed (default 1)");
  synth.Key("n_identities_dev", "identities in the audio-visual dev split (default 200)");
  synth.Key("n_identities_eval", "identities in the audio-visual eval split (default 300)");
  synth.Key("test_segments_per_identity", "test segments per identity (default 2)");
  synth.Key("enroll_faces", "faces per enrollment segment (default 3)");
  synth.Key("test_faces", "faces of the speaker per test segment (default 3)");
  synth.Key("distractor_faces", "unrelated faces per test segment (default 2)");

  Command train(app, "train-vfnet", "Train the voice/face cross-modal network");
  train.Key("embeddings", "embedding file holding voice and face records");
  train.Key("trials", "labeled voice/face training trials; built from the store when absent");
  train.Key("valid_trials", "labeled validation trials (with --trials)");
  train.Key("valid_fraction", "identity fraction held out for validation without --trials (default 0.1)");
  train.Key("init", "checkpoint to continue from (with --trials)");
  train.Key("out", "output checkpoint");
  train.Key("report", "per-epoch TSV report; stdout when absent");
  AddTrainKeys(train);
  AddTrialKeys(train);

  Command backend(app, "fit-backend", "Fit the LDA + PLDA audio back-end on voice embeddings");
  backend.Key("embeddings", "training embedding file; face records are ignored");
  backend.Key("out", "output checkpoint");
  AddBackendKeys(backend);

  Command score(app, "score", "Score a trial list with one system");
  score.Key("system", "audio, visual, vfnet or oracle");
  score.Key("embeddings", "embedding file; segment records are named <segment>/<part>");
  score.Key("trials", "trial file");
  score.Key("model", "audio back-end or VFNet checkpoint; ground-truth config for oracle");
  score.Key("out", "output score file; stdout when absent");
  score.Key("pool_fraction", "fraction of top per-face scores averaged (default 0.2)");

  Command fuse(app, "fuse", "Fit linear fusion on dev scores and apply it to eval scores");
  fuse.Key("dev", "comma-separated labeled dev score files, one per system");
  fuse.Key("eval", "comma-separated eval score files in the same system order");
  fuse.Key("model", "existing fusion model to apply when --dev is absent");
  fuse.Key("model_out", "where to save the fitted fusion model");
  fuse.Key("out", "fused eval score file; stdout when absent");
  fuse.Key("l2", "L2 penalty on the weights (default 0)");
  fuse.Key("max_weight_norm", "weight-norm cap for separable data (default 1000)");
  AddDcfKeys(fuse);

  Command eval(app, "eval", "Compute EER, AUC, minDCF and actDCF of a labeled score file");
  eval.Key("scores", "labeled score file");
  eval.Key("out", "one-line TSV report; stdout when absent");
  eval.Key("det", "optional TSV of every operating point (threshold, p_miss, p_fa)");
  AddDcfKeys(eval);

  Command pipeline(app, "pipeline", "Run back-end, VFNet training, scoring, fusion and evaluation");
  for (const auto& key : avsr::PipelineConfig::KvKeys()) {
    pipeline.Key(key, "pipeline setting");
  }
  bool markdown = false;
  pipeline.app()->add_flag("--markdown", markdown, "also print the report as a Markdown table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth.parsed()) return avsr::cli::RunSynth(synth.Resolve());
    if (train.parsed()) return avsr::cli::RunTrainVfnet(train.Resolve());
    if (backend.parsed()) return avsr::cli::RunFitBackend(backend.Resolve());
    if (score.parsed()) return avsr::cli::RunScore(score.Resolve());
    if (fuse.parsed()) return avsr::cli::RunFuse(fuse.Resolve());
    if (eval.parsed()) return avsr::cli::RunEval(eval.Resolve());
    if (pipeline.parsed()) return avsr::cli::RunPipelineCommand(pipeline.Resolve(), markdown);
  } catch (const avsr::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
