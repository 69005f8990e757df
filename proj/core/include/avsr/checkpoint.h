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

#ifndef AVSR_CHECKPOINT_H_
#define AVSR_CHECKPOINT_H_

// Versioned text container for model parameters. Layout:
//
//   avsr-checkpoint 1
//   kind <model-kind>
//   scalar <name> <value>
//   matrix <name> <rows> <cols>
//   <rows lines of <cols> tab-separated values, row-major>
//   ...
//   end
//
// Values use the shortest round-trip decimal form, so a save/load cycle is
// bit-exact.

#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace avsr {

inline constexpr const char* kCheckpointMagic = "avsr-checkpoint";
inline constexpr int kCheckpointVersion = 1;

class Checkpoint {
 public:
  explicit Checkpoint(std::string kind) : kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

  void PutScalar(const std::string& name, double value);
  void PutMatrix(const std::string& name, const Eigen::MatrixXd& value);
  // Stored as a column matrix.
  void PutVector(const std::string& name, const Eigen::VectorXd& value);

  // Lookups throw ValidationError on a missing name or wrong entry type.
  double GetScalar(const std::string& name) const;
  const Eigen::MatrixXd& GetMatrix(const std::string& name) const;
  Eigen::VectorXd GetVector(const std::string& name) const;
  bool Has(const std::string& name) const;

  // Throws ValidationError if kind() differs from `expected`.
  void ExpectKind(const std::string& expected) const;

  void Write(std::ostream& out) const;
  static Checkpoint Read(std::istream& in, const std::string& source);
  void Save(const std::string& path) const;
  static Checkpoint Load(const std::string& path);

 private:
  using Value = std::variant<double, Eigen::MatrixXd>;
  const Value* FindEntry(const std::string& name) const;
  void Put(const std::string& name, Value value);

  std::string kind_;
  std::vector<std::pair<std::string, Value>> entries_;
};

}  // namespace avsr

#endif  // AVSR_CHECKPOINT_H_
