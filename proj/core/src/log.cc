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

#include "avsr/log.h"

#include <iostream>
#include <mutex>
#include <utility>

namespace avsr {
namespace {

std::mutex sink_mutex;

void StderrSink(const std::string& message) {
  std::cerr << "WARNING: " << message << '\n';
}

WarningSink& CurrentSink() {
  static WarningSink sink = StderrSink;
  return sink;
}

}  // namespace

void Warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(sink_mutex);
  CurrentSink()(message);
}

WarningSink SetWarningSink(WarningSink sink) {
  std::lock_guard<std::mutex> lock(sink_mutex);
  if (!sink) sink = StderrSink;
  return std::exchange(CurrentSink(), std::move(sink));
}

}  // namespace avsr
