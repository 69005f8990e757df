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

#include "avsr/checkpoint.h"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "avsr/error.h"
#include "avsr/text_io.h"

namespace avsr {

void Checkpoint::Put(const std::string& name, Value value) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
    throw ValidationError("invalid checkpoint entry name '" + name + "'");
  }
  for (auto& [n, v] : entries_) {
    if (n == name) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(name, std::move(value));
}

void Checkpoint::PutScalar(const std::string& name, double value) { Put(name, value); }

void Checkpoint::PutMatrix(const std::string& name, const Eigen::MatrixXd& value) {
  Put(name, value);
}

void Checkpoint::PutVector(const std::string& name, const Eigen::VectorXd& value) {
  Put(name, Eigen::MatrixXd(value));
}

const Checkpoint::Value* Checkpoint::FindEntry(const std::string& name) const {
  for (const auto& [n, v] : entries_) {
    if (n == name) return &v;
  }
  return nullptr;
}

bool Checkpoint::Has(const std::string& name) const { return FindEntry(name) != nullptr; }

double Checkpoint::GetScalar(const std::string& name) const {
  const Value* v = FindEntry(name);
  if (!v) throw ValidationError("checkpoint has no entry '" + name + "'");
  const double* d = std::get_if<double>(v);
  if (!d) throw ValidationError("checkpoint entry '" + name + "' is not a scalar");
  return *d;
}

const Eigen::MatrixXd& Checkpoint::GetMatrix(const std::string& name) const {
  const Value* v = FindEntry(name);
  if (!v) throw ValidationError("checkpoint has no entry '" + name + "'");
  const auto* m = std::get_if<Eigen::MatrixXd>(v);
  if (!m) throw ValidationError("checkpoint entry '" + name + "' is not a matrix");
  return *m;
}

Eigen::VectorXd Checkpoint::GetVector(const std::string& name) const {
  const Eigen::MatrixXd& m = GetMatrix(name);
  if (m.cols() != 1) throw ValidationError("checkpoint entry '" + name + "' is not a vector");
  return m.col(0);
}

void Checkpoint::ExpectKind(const std::string& expected) const {
  if (kind_ != expected) {
    throw ValidationError("checkpoint kind is '" + kind_ + "', expected '" + expected + "'");
  }
}

void Checkpoint::Write(std::ostream& out) const {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "kind " << kind_ << '\n';
  for (const auto& [name, value] : entries_) {
    if (const double* d = std::get_if<double>(&value)) {
      out << "scalar " << name << ' ' << FormatDouble(*d) << '\n';
      continue;
    }
    const auto& m = std::get<Eigen::MatrixXd>(value);
    out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out << '\t';
        out << FormatDouble(m(r, c));
      }
      out << '\n';
    }
  }
  out << "end\n";
}

Checkpoint Checkpoint::Read(std::istream& in, const std::string& source) {
  size_t line_no = 0;
  std::string line;
  auto fail = [&](const std::string& what) -> ValidationError {
    return ValidationError(source + ":" + std::to_string(line_no) + ": " + what);
  };
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next()) throw fail("empty checkpoint");
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != kCheckpointMagic) throw fail("not an avsr checkpoint");
    if (version != kCheckpointVersion) {
      throw fail("unsupported checkpoint version " + std::to_string(version));
    }
  }
  if (!next() || line.rfind("kind ", 0) != 0) throw fail("missing 'kind' line");
  Checkpoint ckpt(line.substr(5));

  while (true) {
    if (!next()) throw fail("unexpected end of checkpoint (missing 'end')");
    if (line == "end") break;
    auto parts = Split(line, ' ');
    if (parts.size() == 3 && parts[0] == "scalar") {
      auto v = ParseDouble(parts[2]);
      if (!v) throw fail("malformed scalar");
      ckpt.PutScalar(std::string(parts[1]), *v);
    } else if (parts.size() == 4 && parts[0] == "matrix") {
      const std::string name(parts[1]);
      auto rows = ParseInt(parts[2]);
      auto cols = ParseInt(parts[3]);
      if (!rows || !cols || *rows < 0 || *cols < 0) throw fail("malformed matrix shape");
      Eigen::MatrixXd m(*rows, *cols);
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (!next()) throw fail("truncated matrix '" + name + "'");
        auto cells = Split(line, '\t');
        if (static_cast<Eigen::Index>(cells.size()) != m.cols()) {
          throw fail("expected " + std::to_string(m.cols()) + " values");
        }
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          auto v = ParseDouble(cells[static_cast<size_t>(c)]);
          if (!v || !std::isfinite(*v)) throw fail("malformed matrix value");
          m(r, c) = *v;
        }
      }
      ckpt.PutMatrix(name, m);
    } else {
      throw fail("unrecognized checkpoint line");
    }
  }
  return ckpt;
}

void Checkpoint::Save(const std::string& path) const {
  auto out = OpenForWrite(path);
  Write(out);
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

Checkpoint Checkpoint::Load(const std::string& path) {
  auto in = OpenForRead(path);
  return Read(in, path);
}

}  // namespace avsr
