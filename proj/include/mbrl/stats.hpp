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
#include <span>
#include <vector>

namespace mbrl::stats {

double mean(std::span<const double> v);

// Midpoint-of-two convention for even sizes.
double median(std::vector<double> v);

// Two-pass sample Pearson correlation. Throws std::invalid_argument when
// n < 3 ("need >= 3 points") or either variance is zero ("degenerate
// sample").
double pearson(std::span<const double> x, std::span<const double> y);

struct Histogram {
  double lo = 0.0;
  double bin_width = 0.1;
  std::vector<std::int64_t> counts;
  std::int64_t below = 0;  // values < lo
  std::int64_t above = 0;  // values >= lo + counts.size() * bin_width
  std::int64_t total = 0;

  // Fraction of all values with |value - center| < radius.
  double fraction_within(double center, double radius) const;
};

Histogram histogram(std::span<const double> values, double lo, double hi, double bin_width);

}  // namespace mbrl::stats
