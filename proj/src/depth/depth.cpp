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

#include "kdtest/depth.hpp"

#include <algorithm>

#include "kdtest/core/error.hpp"
#include "kdtest/util/parallel.hpp"

namespace kdtest {

double pointwise_tukey_depth(double value, std::span<const double> reference) {
  if (reference.empty()) {
    throw InputError("pointwise depth: empty reference list");
  }
  std::size_t count = 0;
  for (double r : reference) {
    if (!std::isfinite(r)) throw InputError("pointwise depth: non-finite reference");
    if (r <= value) ++count;
  }
  return tukey_depth_from_count(count, reference.size());
}

SortedReference::SortedReference(const Ensemble& reference)
    : grid_(reference.grid_ptr()),
      members_(reference.members()),
      label_(reference.label()) {
  const std::size_t g = grid_->size();
  sorted_.resize(g * members_);
  for (std::size_t i = 0; i < members_; ++i) {
    auto m = reference.member(i);
    for (std::size_t p = 0; p < g; ++p) sorted_[p * members_ + i] = m[p];
  }
  for (std::size_t p = 0; p < g; ++p) {
    auto first = sorted_.begin() + static_cast<std::ptrdiff_t>(p * members_);
    std::sort(first, first + static_cast<std::ptrdiff_t>(members_));
  }
}

std::size_t SortedReference::count_le(std::size_t point, double value) const {
  const double* col = sorted_.data() + point * members_;
  return static_cast<std::size_t>(std::upper_bound(col, col + members_, value) - col);
}

double SortedReference::depth_of(std::span<const double> field) const {
  const std::size_t g = grid_->size();
  if (field.size() != g) {
    throw InputError("integrated depth: field has " + std::to_string(field.size()) +
                     " points, reference grid has " + std::to_string(g));
  }
  const auto w = grid_->weights();
  double acc = 0.0;
  for (std::size_t p = 0; p < g; ++p) {
    acc += w[p] * tukey_depth_from_count(count_le(p, field[p]), members_);
  }
  return acc;
}

DepthProfile SortedReference::profile(const Ensemble& sample,
                                      std::size_t threads) const {
  if (sample.grid_ptr() != grid_) {
    if (auto diff = sample.grid().difference(*grid_)) throw InputError(*diff);
  }
  DepthProfile out;
  out.reference_label = label_;
  out.values.resize(sample.members());
  parallel_for(sample.members(), threads,
               [&](std::size_t i) { out.values[i] = depth_of(sample.member(i)); });
  return out;
}

double integrated_depth(std::span<const double> member, const Ensemble& reference) {
  return SortedReference(reference).depth_of(member);
}

DepthProfile depth_profile(const Ensemble& sample, const Ensemble& reference,
                           std::size_t threads) {
  validate_pair(sample, reference);
  return SortedReference(reference).profile(sample, threads);
}

}  // namespace kdtest
