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

#include "kdtest/core/ensemble.hpp"

#include <cmath>

#include "kdtest/core/error.hpp"

namespace kdtest {

Ensemble::Ensemble(GridPtr grid, std::vector<double> values, std::string label)
    : grid_(std::move(grid)), values_(std::move(values)), label_(std::move(label)) {
  if (!grid_) throw InputError("ensemble: null grid");
  const std::size_t g = grid_->size();
  if (values_.size() % g != 0) {
    throw InputError("ensemble: " + std::to_string(values_.size()) +
                     " values is not a multiple of " + std::to_string(g) +
                     " grid points");
  }
  members_ = values_.size() / g;
  if (members_ < 2) {
    throw InputError("ensemble: at least 2 members required, got " +
                     std::to_string(members_));
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw InputError("ensemble: non-finite value at member " +
                       std::to_string(k / g) + ", point " +
                       std::to_string(k % g));
    }
  }
}

Ensemble Ensemble::select(std::span<const std::size_t> indices,
                          std::string label) const {
  const std::size_t g = points();
  std::vector<double> out;
  out.reserve(indices.size() * g);
  for (std::size_t i : indices) {
    if (i >= members_) throw InputError("ensemble: member index out of range");
    auto m = member(i);
    out.insert(out.end(), m.begin(), m.end());
  }
  return Ensemble(grid_, std::move(out), label.empty() ? label_ : std::move(label));
}

Ensemble Ensemble::with_grid(GridPtr grid) const {
  if (!grid || grid->size() != points()) {
    throw InputError("ensemble: replacement grid has a different point count");
  }
  return Ensemble(std::move(grid), values_, label_);
}

void validate_pair(const Ensemble& a, const Ensemble& b) {
  if (a.grid_ptr() == b.grid_ptr()) return;
  if (auto diff = a.grid().difference(b.grid())) throw InputError(*diff);
}

}  // namespace kdtest
