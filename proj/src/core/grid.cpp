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

#include "kdtest/core/grid.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "kdtest/core/error.hpp"

namespace kdtest {

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  std::size_t total = 1;
  for (std::size_t d : dims) total *= d;
  return total;
}

void check_axes(const std::vector<std::size_t>& dims,
                const std::vector<std::vector<double>>& coords) {
  if (dims.empty()) throw InputError("grid: at least one axis is required");
  if (coords.size() != dims.size()) {
    throw InputError("grid: " + std::to_string(dims.size()) + " dims but " +
                     std::to_string(coords.size()) + " coordinate arrays");
  }
  for (std::size_t a = 0; a < dims.size(); ++a) {
    if (dims[a] == 0) {
      throw InputError("grid: axis " + std::to_string(a) + " is empty");
    }
    if (coords[a].size() != dims[a]) {
      throw InputError("grid: axis " + std::to_string(a) + " has " +
                       std::to_string(coords[a].size()) +
                       " coordinates, expected " + std::to_string(dims[a]));
    }
    for (std::size_t i = 0; i < coords[a].size(); ++i) {
      if (!std::isfinite(coords[a][i])) {
        throw InputError("grid: non-finite coordinate on axis " +
                         std::to_string(a));
      }
      if (i > 0 && !(coords[a][i] > coords[a][i - 1])) {
        throw InputError("grid: coordinates on axis " + std::to_string(a) +
                         " are not strictly increasing");
      }
    }
  }
}

std::vector<double> make_weights(const std::vector<std::size_t>& dims,
                                 const std::vector<std::vector<double>>& coords,
                                 WeightMode mode) {
  const std::size_t total = product(dims);
  if (mode == WeightMode::kUniform) {
    return std::vector<double>(total, 1.0 / static_cast<double>(total));
  }
  if (mode != WeightMode::kCosLat) {
    throw InputError("grid: explicit weight mode needs a weight array");
  }
  // Latitude is axis 0; every other axis shares its row weight.
  const std::size_t row = total / dims[0];
  std::vector<double> lat_w(dims[0]);
  long double sum = 0;
  for (std::size_t i = 0; i < dims[0]; ++i) {
    lat_w[i] = std::max(0.0, std::cos(coords[0][i] * std::numbers::pi / 180.0));
    sum += static_cast<long double>(lat_w[i]) * row;
  }
  if (sum <= 0) throw InputError("grid: cos-latitude weights sum to zero");
  std::vector<double> w(total);
  for (std::size_t i = 0; i < dims[0]; ++i) {
    const double wi = static_cast<double>(lat_w[i] / sum);
    std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(i * row), row, wi);
  }
  return w;
}

void check_weights(const std::vector<double>& w, std::size_t expected) {
  if (w.size() != expected) {
    throw InputError("grid: " + std::to_string(w.size()) +
                     " weights for " + std::to_string(expected) + " points");
  }
  long double sum = 0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw InputError("grid: weights must be finite and nonnegative");
    }
    sum += x;
  }
  if (std::fabs(static_cast<double>(sum - 1.0L)) >= 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "grid: weights sum to " << static_cast<double>(sum)
        << ", expected 1";
    throw InputError(msg.str());
  }
}

}  // namespace

std::string_view to_string(WeightMode mode) {
  switch (mode) {
    case WeightMode::kUniform:
      return "uniform";
    case WeightMode::kCosLat:
      return "coslat";
    case WeightMode::kExplicit:
      return "explicit";
  }
  return "uniform";
}

WeightMode parse_weight_mode(std::string_view text) {
  if (text == "uniform") return WeightMode::kUniform;
  if (text == "coslat") return WeightMode::kCosLat;
  if (text == "explicit") return WeightMode::kExplicit;
  throw InputError("unknown weight mode '" + std::string(text) +
                   "' (expected uniform, coslat or explicit)");
}

Grid::Grid(std::vector<std::size_t> dims,
           std::vector<std::vector<double>> coords, WeightMode mode)
    : dims_(std::move(dims)), coords_(std::move(coords)), mode_(mode) {
  check_axes(dims_, coords_);
  weights_ = make_weights(dims_, coords_, mode_);
  check_weights(weights_, product(dims_));
}

Grid::Grid(std::vector<std::size_t> dims,
           std::vector<std::vector<double>> coords, std::vector<double> weights)
    : dims_(std::move(dims)),
      coords_(std::move(coords)),
      weights_(std::move(weights)),
      mode_(WeightMode::kExplicit) {
  check_axes(dims_, coords_);
  check_weights(weights_, product(dims_));
}

Grid Grid::unit_square(std::size_t nx, std::size_t ny) {
  auto axis = [](std::size_t n) {
    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n && n > 1; ++i) {
      c[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return c;
  };
  return Grid({nx, ny}, {axis(nx), axis(ny)});
}

Grid Grid::lat_lon(std::size_t nlat, std::size_t nlon, WeightMode mode) {
  if (nlat == 0 || nlon == 0) throw InputError("grid: empty lat-lon grid");
  std::vector<double> lat(nlat), lon(nlon);
  const double dlat = 180.0 / static_cast<double>(nlat);
  const double dlon = 360.0 / static_cast<double>(nlon);
  for (std::size_t i = 0; i < nlat; ++i) {
    lat[i] = -90.0 + (static_cast<double>(i) + 0.5) * dlat;
  }
  for (std::size_t j = 0; j < nlon; ++j) {
    lon[j] = (static_cast<double>(j) + 0.5) * dlon;
  }
  return Grid({nlat, nlon}, {std::move(lat), std::move(lon)}, mode);
}

std::vector<double> Grid::point(std::size_t index) const {
  std::vector<double> p(dims_.size());
  for (std::size_t a = dims_.size(); a-- > 0;) {
    p[a] = coords_[a][index % dims_[a]];
    index /= dims_[a];
  }
  return p;
}

Grid Grid::reweighted(WeightMode mode) const {
  return Grid(dims_, coords_, mode);
}

std::optional<std::string> Grid::difference(const Grid& other) const {
  if (dims_.size() != other.dims_.size()) {
    return "grid mismatch: dimension " + std::to_string(dims_.size()) +
           " vs " + std::to_string(other.dims_.size());
  }
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    if (dims_[a] != other.dims_[a]) {
      return "grid mismatch on axis " + std::to_string(a) + ": " +
             std::to_string(dims_[a]) + " vs " +
             std::to_string(other.dims_[a]) + " points";
    }
  }
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    if (coords_[a] != other.coords_[a]) {
      return "grid coordinate mismatch on axis " + std::to_string(a);
    }
  }
  if (weights_ != other.weights_) return std::string("grid weight mismatch");
  return std::nullopt;
}

}  // namespace kdtest
