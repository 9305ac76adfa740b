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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kdtest {

enum class WeightMode {
  kUniform,   // 1 / point count
  kCosLat,    // proportional to cos(axis-0 coordinate in degrees)
  kExplicit,  // caller supplied (e.g. after region subsetting)
};

std::string_view to_string(WeightMode mode);
WeightMode parse_weight_mode(std::string_view text);

/// A tensor-product discretization of the spatial domain together with
/// per-point quadrature weights.
///
/// Points are flattened row-major over `dims` (the last axis varies
/// fastest). Weights are nonnegative and sum to one. A Grid is immutable
/// once built and is normally shared through `GridPtr`.
class Grid {
 public:
  /// Validates every invariant; throws InputError on violation.
  Grid(std::vector<std::size_t> dims, std::vector<std::vector<double>> coords,
       WeightMode mode = WeightMode::kUniform);
  Grid(std::vector<std::size_t> dims, std::vector<std::vector<double>> coords,
       std::vector<double> weights);

  /// nx by ny grid of equally spaced points spanning [0,1] on each axis.
  static Grid unit_square(std::size_t nx, std::size_t ny);
  /// nlat by nlon cell-centred latitude/longitude grid in degrees.
  static Grid lat_lon(std::size_t nlat, std::size_t nlon,
                      WeightMode mode = WeightMode::kUniform);

  std::size_t dimension() const { return dims_.size(); }
  std::size_t size() const { return weights_.size(); }
  std::span<const std::size_t> dims() const { return dims_; }
  std::span<const double> axis(std::size_t a) const { return coords_.at(a); }
  const std::vector<std::vector<double>>& coords() const { return coords_; }
  std::span<const double> weights() const { return weights_; }
  WeightMode weight_mode() const { return mode_; }

  /// Coordinates of flat point `index`, one entry per axis.
  std::vector<double> point(std::size_t index) const;

  /// Same axes, weights recomputed under `mode` (uniform or coslat).
  Grid reweighted(WeightMode mode) const;

  /// Empty if identical, else a message naming the first difference.
  std::optional<std::string> difference(const Grid& other) const;
  bool operator==(const Grid& other) const { return !difference(other); }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::vector<double>> coords_;
  std::vector<double> weights_;
  WeightMode mode_ = WeightMode::kUniform;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(Grid grid) {
  return std::make_shared<const Grid>(std::move(grid));
}

}  // namespace kdtest
