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

#ifndef AVSR_TOOLS_COMMANDS_H_
#define AVSR_TOOLS_COMMANDS_H_

#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avsr/kv_config.h"

namespace avsr::cli {

// A subcommand whose options double as config-file keys: `--lda-dim 40` on
// the command line overrides `lda_dim = 40` from `--config`.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description);

  void Key(const std::string& key, const std::string& help);
  void Keys(const std::vector<std::string>& keys, const std::string& help);
  CLI::App* app() const { return app_; }
  bool parsed() const { return app_->parsed(); }

  // Config file merged with the flags given explicitly.
  KvConfig Resolve() const;

 private:
  CLI::App* app_;
  std::string config_path_;
  std::vector<std::string> keys_;
  std::map<std::string, std::string> values_;
};

int RunSynth(const KvConfig& kv);
int RunTrainVfnet(const KvConfig& kv);
int RunFitBackend(const KvConfig& kv);
int RunScore(const KvConfig& kv);
int RunFuse(const KvConfig& kv);
int RunEval(const KvConfig& kv);
int RunPipelineCommand(const KvConfig& kv, bool markdown);

}  // namespace avsr::cli

#endif  // AVSR_TOOLS_COMMANDS_H_
