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

#ifndef AVSR_TEXT_IO_H_
#define AVSR_TEXT_IO_H_

// Small helpers shared by every text format in the library.

#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace avsr {

// Shortest decimal representation that parses back to the same binary64.
std::string FormatDouble(double value);

// Parses a full token as a double. Rejects trailing garbage and empty input;
// accepts "inf"/"nan" spellings (callers check finiteness themselves).
std::optional<double> ParseDouble(std::string_view token);

std::optional<long long> ParseInt(std::string_view token);

std::vector<std::string_view> Split(std::string_view line, char sep);

std::string_view Trim(std::string_view s);

// Open helpers that throw RuntimeFailure naming the path on failure.
std::ifstream OpenForRead(const std::string& path);
std::ofstream OpenForWrite(const std::string& path);

}  // namespace avsr

#endif  // AVSR_TEXT_IO_H_
