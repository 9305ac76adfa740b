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

#include "kdtest/core/region.hpp"

#include "kdtest/core/error.hpp"

namespace kdtest {

RegionMask::RegionMask(GridPtr grid, std::vector<std::int32_t> region_ids)
    : grid_(std::move(grid)), ids_(std::move(region_ids)) {
  if (!grid_) throw InputError("region mask: null grid");
  if (ids_.size() != grid_->size()) {
    throw InputError("region mask: " + std::to_string(ids_.size()) +
                     " labels for " + std::to_string(grid_->size()) +
                     " grid points");
  }
  for (auto id : ids_) {
    if (id < 0) throw InputError("region mask: negative region id");
  }
}

std::set<std::int32_t> RegionMask::regions() const {
  std::set<std::int32_t> out;
  for (auto id : ids_) {
    if (id != 0) out.insert(id);
  }
  return out;
}

std::vector<std::size_t> RegionMask::points_in(std::int32_t region) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == region) out.push_back(i);
  }
  return out;
}

namespace {

std::vector<std::size_t> region_points(const GridPtr& grid,
                                       const RegionMask& mask,
                                       std::int32_t region) {
  if (auto diff = grid->difference(mask.grid())) {
    throw InputError("region mask " + *diff);
  }
  auto pts = mask.points_in(region);
  if (region == 0 || pts.empty()) {
    throw InputError("empty region " + std::to_string(region));
  }
  return pts;
}

}  // namespace

GridPtr subset_grid(const GridPtr& grid, const RegionMask& mask,
                    std::int32_t region) {
  const auto pts = region_points(grid, mask, region);
  if (pts.size() == grid->size()) return grid;

  std::vector<double> ids(pts.size());
  std::vector<double> w(pts.size());
  long double sum = 0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    ids[k] = grid->dimension() == 1 ? grid->axis(0)[pts[k]]
                                    : static_cast<double>(pts[k]);
    sum += grid->weights()[pts[k]];
  }
  if (sum <= 0) {
    throw InputError("region " + std::to_string(region) +
                     " has zero total quadrature weight");
  }
  for (std::size_t k = 0; k < pts.size(); ++k) {
    w[k] = static_cast<double>(grid->weights()[pts[k]] / sum);
  }
  return make_grid(Grid({pts.size()}, {std::move(ids)}, std::move(w)));
}

Ensemble subset_region(const Ensemble& ens, const RegionMask& mask,
                       std::int32_t region) {
  auto sub = subset_grid(ens.grid_ptr(), mask, region);
  if (sub == ens.grid_ptr()) return ens;
  const auto pts = mask.points_in(region);
  std::vector<double> out;
  out.reserve(ens.members() * pts.size());
  for (std::size_t i = 0; i < ens.members(); ++i) {
    auto m = ens.member(i);
    for (std::size_t p : pts) out.push_back(m[p]);
  }
  return Ensemble(std::move(sub), std::move(out), ens.label());
}

RegionMask subset_mask(const RegionMask& mask, std::int32_t region) {
  auto sub = subset_grid(mask.grid_ptr(), mask, region);
  return RegionMask(sub, std::vector<std::int32_t>(sub->size(), region));
}

}  // namespace kdtest
