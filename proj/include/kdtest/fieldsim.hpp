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

// Seeded samplers for stationary Matérn Gaussian fields and t-processes.

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "kdtest/core/ensemble.hpp"
#include "kdtest/core/grid.hpp"

namespace kdtest {

/// sigma is the marginal standard deviation; range and smoothness are in
/// grid-coordinate units.
struct MaternParams {
  double sigma = 1.0;
  double range = 0.4;
  double smoothness = 1.0;

  void validate() const;
};

enum class Family { kGaussian, kStudentT };
std::string_view to_string(Family family);
Family parse_family(std::string_view text);

/// Everything needed to draw an ensemble: members are
///   mean_field + sd_field * (L z) [/ sqrt(w / df) for the t family]
/// with L L^T the Matérn covariance, z standard normal, w ~ chi^2(df).
struct FieldSpec {
  GridPtr grid;
  std::vector<double> mean_field;
  std::vector<double> sd_field;
  MaternParams matern;
  Family family = Family::kGaussian;
  double df = 0.0;
  std::uint64_t seed = 0;

  /// Constant mean `mu`, unit sd field, marginal sd from `matern.sigma`.
  static FieldSpec stationary(GridPtr grid, MaternParams matern, double mu = 0.0,
                              std::uint64_t seed = 0);
  void validate() const;
};

/// 2^(1-nu) / Gamma(nu) * (d/r)^nu * K_nu(d/r), and 1 at d = 0.
double matern_correlation(double d, double range, double smoothness);

/// Lower Cholesky factor of a covariance matrix on a grid.
struct CovarianceFactor {
  Eigen::MatrixXd lower;
  bool jittered = false;
};

constexpr std::size_t kMaxCovariancePoints = 20000;

/// Dense Matérn covariance (sigma^2 * correlation over Euclidean distances
/// between grid points) and its Cholesky factor. Retries once with
/// 1e-10 * sigma^2 added to the diagonal if the bare factorization fails.
CovarianceFactor build_covariance(const Grid& grid, const MaternParams& params);

/// Process-wide cache of unit-variance correlation factors keyed on grid
/// coordinates and (range, smoothness). Thread-safe.
class CorrelationCache {
 public:
  std::shared_ptr<const CovarianceFactor> get(const Grid& grid, double range,
                                              double smoothness);
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const CovarianceFactor>> entries_;
};

CorrelationCache& correlation_cache();

/// Draws `count` members from `spec`, seeded by spec.seed. Identical
/// (spec, count) always yields a bitwise identical ensemble.
Ensemble sample_fields(const FieldSpec& spec, std::size_t count);

/// f(u) = (kappa/2) sin(4 pi u - pi/2) + 1 evaluated on both axes of a
/// two-dimensional grid: mean = f(s1) f(s2) - 1, sd = f(s1) f(s2).
std::vector<double> sine_mean_field(const Grid& grid, double kappa);
std::vector<double> sine_sd_field(const Grid& grid, double kappa);

}  // namespace kdtest
