// Copyright 2026 The mbrlkit Authors
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mbrl::csv {

// Shortest representation that parses back to the identical double.
std::string format_double(double v);

// Strict double parse of the whole field; throws std::invalid_argument.
double parse_double(const std::string& field);

std::int64_t parse_int(const std::string& field);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

// Reads a whole CSV file; transparently inflates when the path ends in .gz.
// Throws std::runtime_error with a line number on malformed content and on
// empty files.
Table read_file(const std::filesystem::path& path);

// Writes header + rows with '\n' line endings; gzip-compresses when the path
// ends in .gz. Creates parent directories.
void write_file(const std::filesystem::path& path, const Table& table);

std::string to_string(const Table& table);

}  // namespace mbrl::csv
