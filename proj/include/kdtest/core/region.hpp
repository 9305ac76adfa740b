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

#include <cstdint>
#include <set>
#include <vector>

#include "kdtest/core/ensemble.hpp"
#include "kdtest/core/grid.hpp"

namespace kdtest {

/// Per-point integer region labels on a grid; 0 means unassigned.
class RegionMask {
 public:
  RegionMask(GridPtr grid, std::vector<std::int32_t> region_ids);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const std::int32_t> ids() const { return ids_; }
  std::set<std::int32_t> regions() const;
  std::vector<std::size_t> points_in(std::int32_t region) const;

 private:
  GridPtr grid_;
  std::vector<std::int32_t> ids_;
};

/// Grid restricted to the points of one region.
///
/// The result is one-dimensional. Its coordinates identify the retained
/// points: flat indices of the parent when the parent is
/// multi-dimensional, or the parent's own coordinates when the parent is
/// already one-dimensional, so repeated subsetting is stable. Weights are
/// renormalized over the retained points; a region covering every point
/// returns the parent grid unchanged.
GridPtr subset_grid(const GridPtr& grid, const RegionMask& mask,
                    std::int32_t region);

Ensemble subset_region(const Ensemble& ens, const RegionMask& mask,
                       std::int32_t region);

/// The mask restricted to one region, living on `subset_grid(...)`.
RegionMask subset_mask(const RegionMask& mask, std::int32_t region);

}  // namespace kdtest
