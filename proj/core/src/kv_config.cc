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

#include "avsr/kv_config.h"

#include <algorithm>
#include <istream>
#include <ostream>

#include "avsr/error.h"
#include "avsr/text_io.h"

namespace avsr {

KvConfig KvConfig::Read(std::istream& in, const std::string& source) {
  KvConfig cfg;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(Trim(t.substr(0, eq)));
    if (key.empty()) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": empty key");
    }
    cfg.values_[key] = std::string(Trim(t.substr(eq + 1)));
  }
  return cfg;
}

KvConfig KvConfig::Load(const std::string& path) {
  auto in = OpenForRead(path);
  return Read(in, path);
}

std::optional<std::string> KvConfig::Get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KvConfig::GetString(const std::string& key, const std::string& fallback) const {
  return Get(key).value_or(fallback);
}

double KvConfig::GetDouble(const std::string& key, double fallback) const {
  auto v = Get(key);
  if (!v) return fallback;
  auto d = ParseDouble(*v);
  if (!d) throw ValidationError("config key '" + key + "': expected a number, got '" + *v + "'");
  return *d;
}

long long KvConfig::GetInt(const std::string& key, long long fallback) const {
  auto v = Get(key);
  if (!v) return fallback;
  auto i = ParseInt(*v);
  if (!i) throw ValidationError("config key '" + key + "': expected an integer, got '" + *v + "'");
  return *i;
}

bool KvConfig::GetBool(const std::string& key, bool fallback) const {
  auto v = Get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ValidationError("config key '" + key + "': expected a boolean, got '" + *v + "'");
}

void KvConfig::CheckKnownKeys(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
}

void KvConfig::Write(std::ostream& out) const {
  for (const auto& [key, value] : values_) out << key << " = " << value << '\n';
}

void KvConfig::Save(const std::string& path) const {
  auto out = OpenForWrite(path);
  Write(out);
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

}  // namespace avsr
