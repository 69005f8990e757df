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

#ifndef AVSR_KV_CONFIG_H_
#define AVSR_KV_CONFIG_H_

// Flat `key = value` configuration files. '#' starts a comment line.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace avsr {

class KvConfig {
 public:
  static KvConfig Read(std::istream& in, const std::string& source);
  static KvConfig Load(const std::string& path);

  void Set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool Has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> Get(const std::string& key) const;

  // Typed getters throw ValidationError naming the key on a parse failure.
  std::string GetString(const std::string& key, const std::string& fallback) const;
  double GetDouble(const std::string& key, double fallback) const;
  long long GetInt(const std::string& key, long long fallback) const;
  bool GetBool(const std::string& key, bool fallback) const;

  // Throws ValidationError on the first key not in `known`.
  void CheckKnownKeys(const std::vector<std::string>& known) const;

  void Write(std::ostream& out) const;
  void Save(const std::string& path) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace avsr

#endif  // AVSR_KV_CONFIG_H_
