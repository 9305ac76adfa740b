// Copyright 2026 The kdtest Authors.
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

// Integrated Tukey depth of fields with respect to an ensemble.
//
// The pointwise depth of a value x against reference values r_1..r_n is
// 1 - |1 - 2 F(x)| with F(x) = #{i : r_i <= x} / n (weak inequality, no
// continuity correction). The integrated depth of a field is the
// quadrature-weighted sum of its pointwise depths over the grid, summed in
// ascending point order so results are bit-reproducible.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kdtest/core/ensemble.hpp"

namespace kdtest {

/// Tukey depth given how many of `n` reference values are <= the query.
inline double tukey_depth_from_count(std::size_t count_le, std::size_t n) {
  const double p = static_cast<double>(count_le) / static_cast<double>(n);
  return 1.0 - std::fabs(1.0 - 2.0 * p);
}

double pointwise_tukey_depth(double value, std::span<const double> reference);

struct DepthProfile {
  std::vector<double> values;
  std::string reference_label;
};

/// Per-point sorted copy of a reference ensemble.
///
/// Building costs O(G n log n); each depth query then costs O(G log n).
/// Immutable after construction, so one instance can serve many samples
/// (and many threads) against the same reference.
class SortedReference {
 public:
  explicit SortedReference(const Ensemble& reference);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t members() const { return members_; }
  const std::string& label() const { return label_; }

  /// #{reference members with value <= `value` at `point`}.
  std::size_t count_le(std::size_t point, double value) const;

  double depth_of(std::span<const double> field) const;

  /// One integrated depth per member of `sample`, in member order.
  DepthProfile profile(const Ensemble& sample, std::size_t threads = 1) const;

 private:
  GridPtr grid_;
  std::size_t members_ = 0;
  std::string label_;
  std::vector<double> sorted_;  // point-major, members_ values per point
};

double integrated_depth(std::span<const double> member, const Ensemble& reference);

/// Integrated depth of every member of `sample` relative to `reference`.
/// `sample` may be `reference` itself.
DepthProfile depth_profile(const Ensemble& sample, const Ensemble& reference,
                           std::size_t threads = 1);

}  // namespace kdtest
