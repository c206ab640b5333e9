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

#include <filesystem>
#include <string>
#include <vector>

#include "mbrl/csv.hpp"

namespace mbrl::svg {

enum class PlotKind { Scatter, Line, Heatmap };

struct PlotSpec {
  PlotKind kind = PlotKind::Scatter;
  std::string x_column;
  std::vector<std::string> y_columns;  // heatmap: y_columns[0] = y, value_column = cells
  std::string value_column;            // heatmap only
  std::string title;
  int width = 640;
  int height = 480;
};

// Renders the table to a standalone SVG file. Rows with unparsable fields in
// the referenced columns are skipped.
void render(const csv::Table& table, const PlotSpec& spec, const std::filesystem::path& out);

}  // namespace mbrl::svg
