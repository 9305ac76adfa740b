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

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kdtest/core/grid.hpp"

namespace kdtest {

/// An ordered collection of fields sampled on a common grid.
///
/// Values are stored member-major: member i occupies
/// `values[i * points, (i + 1) * points)`. Every value is finite and there
/// are at least two members.
class Ensemble {
 public:
  Ensemble(GridPtr grid, std::vector<double> values, std::string label = {});

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t members() const { return members_; }
  std::size_t points() const { return grid_->size(); }
  const std::string& label() const { return label_; }

  std::span<const double> member(std::size_t i) const {
    return {values_.data() + i * points(), points()};
  }
  std::span<const double> values() const { return values_; }

  /// New ensemble holding the listed members, in the listed order.
  Ensemble select(std::span<const std::size_t> indices,
                  std::string label = {}) const;
  /// Same values on a different (but same-sized) grid.
  Ensemble with_grid(GridPtr grid) const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
  std::size_t members_ = 0;
  std::string label_;
};

/// Succeeds iff both ensembles live on identical grids (dims, coordinates
/// and weights). Throws InputError naming the first difference.
void validate_pair(const Ensemble& a, const Ensemble& b);

}  // namespace kdtest
