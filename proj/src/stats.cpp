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

#include "mbrl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbrl::stats {

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of empty sample");
  double acc = 0.0;
  for (const double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson size mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("pearson needs >= 3 points");

  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("degenerate sample");
  return sxy / std::sqrt(sxx * syy);
}

double Histogram::fraction_within(double center, double radius) const {
  if (total == 0) return 0.0;
  const double tol = 1e-9 * bin_width;
  std::int64_t inside = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const double left = lo + b * bin_width;
    const double right = left + bin_width;
    if (left >= center - radius - tol && right <= center + radius + tol) inside += counts[b];
  }
  return static_cast<double>(inside) / static_cast<double>(total);
}

Histogram histogram(std::span<const double> values, double lo, double hi, double bin_width) {
  if (!(hi > lo) || !(bin_width > 0.0)) throw std::invalid_argument("bad histogram spec");
  Histogram h;
  h.lo = lo;
  h.bin_width = bin_width;
  const int n_bins = static_cast<int>(std::ceil((hi - lo) / bin_width - 1e-12));
  h.counts.assign(n_bins, 0);
  for (const double v : values) {
    ++h.total;
    if (v < lo) {
      ++h.below;
    } else {
      const int b = static_cast<int>((v - lo) / bin_width);
      if (b >= n_bins)
        ++h.above;
      else
        ++h.counts[b];
    }
  }
  return h;
}

}  // namespace mbrl::stats
