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

// Monte-Carlo size, power and convergence studies for the KD and QI tests.
//
// Study configs are JSON objects. Keys (defaults in brackets):
//
//   study            "size" | "power_homogeneous" | "power_heterogeneous" |
//                    "convergence"                                 (required)
//   seed             unsigned 64-bit integer                       (required)
//   grid             axis sizes of a unit-square grid              [[32, 32]]
//   family           "gaussian" | "student_t"                      ["gaussian"]
//   df               t-process degrees of freedom, > 2             [3]
//   sims_per_cell    simulations per cell, >= 100                  [2000]
//   alpha            test level in (0, 1)                          [0.05]
//   methods          subset of ["kd", "qi"]                        [["kd", "qi"]]
//   kd_method        "asymptotic" | "permutation"                  ["asymptotic"]
//   permutations     relabelings per permutation test              [500]
//   qi_sided         "lower" | "two"                               ["lower"]
//   threads          worker cap, 0 = default                       [0]
//
// size / convergence lattices (cross product, in this nesting order):
//   r, nu            Matérn range and smoothness lists             [[0.4], [1.0]]
//   n, m             sample size lists; or
//   pairs            explicit [[n, m], ...] list instead of n and m
//   replicates       convergence only, >= 10                       [100]
//
// power studies:
//   baseline         {r, nu, mu, sigma, n, m}       [{0.4, 1.0, 0, 1, 100, 50}]
//   vary             power_homogeneous: {mu: [...], sigma: [...],
//                    r: [...], nu: [...]}, each list a one-parameter sweep
//                    of the Y process away from the baseline
//   kappa            power_heterogeneous: sine amplitudes in [0, 1]
//   components       power_heterogeneous: subset of ["mean", "sd", "both"]
//                                                                  [["mean", "sd"]]
//
// Replicate s of cell c draws X from substream (seed, c, s, 0), Y from
// (seed, c, s, 1) and permutations from (seed, c, s, 2), so results do not
// depend on the thread count.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kdtest/fieldsim.hpp"
#include "kdtest/twosample.hpp"

namespace kdtest {

enum class StudyKind { kSize, kPowerHomogeneous, kPowerHeterogeneous, kConvergence };
std::string_view to_string(StudyKind kind);
StudyKind parse_study_kind(std::string_view text);

struct ProcessParams {
  double r = 0.4;
  double nu = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
};

struct StudyConfig {
  StudyKind study = StudyKind::kSize;
  std::uint64_t seed = 0;
  std::vector<std::size_t> grid{32, 32};
  Family family = Family::kGaussian;
  double df = 3.0;
  std::size_t sims_per_cell = 2000;
  double alpha = 0.05;
  bool run_kd = true;
  bool run_qi = true;
  TestMethod kd_method = TestMethod::kKdAsymptotic;
  std::size_t permutations = 500;
  QiSided qi_sided = QiSided::kLower;
  std::size_t threads = 0;

  std::vector<double> r_values{0.4};
  std::vector<double> nu_values{1.0};
  std::vector<std::array<std::size_t, 2>> sizes{{100, 100}};
  std::size_t replicates = 100;

  ProcessParams baseline;
  std::size_t baseline_n = 100;
  std::size_t baseline_m = 50;
  std::vector<double> vary_mu, vary_sigma, vary_r, vary_nu;
  std::vector<double> kappas;
  std::vector<std::string> components{"mean", "sd"};

  nlohmann::json source;  // the parsed config, echoed into manifests

  void validate() const;
};

/// Throws InputError naming the offending key.
StudyConfig parse_study_config(const nlohmann::json& j);
StudyConfig load_study_config(const std::string& path);

/// One simulation cell: the X and Y generating processes and sample sizes.
struct Cell {
  std::size_t index = 0;
  std::size_t n = 0, m = 0;
  ProcessParams x, y;
  std::string varied;  // "none", "mu", "sigma", "r", "nu", "kappa"
  double value = 0.0;  // the varied parameter's value
  double kappa = 0.0;
  std::string component;  // heterogeneous studies only
};

std::vector<Cell> study_cells(const StudyConfig& cfg);

struct RateRow {
  Cell cell;
  std::string method;  // kd_asymptotic, kd_permutation, qi_normal
  std::size_t sims = 0;
  std::size_t rejections = 0;
  double estimate = 0.0;
  double se = 0.0;
};

struct ConvergenceRow {
  Cell cell;
  std::size_t replicates = 0;
  std::size_t permutations = 0;
  std::vector<double> l2;                   // per replicate
  std::array<std::vector<double>, 3> gaps;  // per level, per replicate
  double l2_median = 0.0;
  std::array<double, 3> gap_median{};
};

inline constexpr std::array<double, 3> kConvergenceLevels{0.90, 0.95, 0.99};

struct StudyResult {
  StudyKind study = StudyKind::kSize;
  std::vector<RateRow> rates;
  std::vector<ConvergenceRow> convergence;
  double wall_seconds = 0.0;

  std::string to_csv() const;
  /// Per-replicate convergence values; empty for other studies.
  std::string replicates_csv() const;
};

StudyResult run_size_study(const StudyConfig& cfg);
StudyResult run_power_study(const StudyConfig& cfg);
StudyResult run_convergence_study(const StudyConfig& cfg);
StudyResult run_study(const StudyConfig& cfg);

nlohmann::json study_manifest(const StudyConfig& cfg, const StudyResult& result);

/// Integral over [0, 3] of (F_hat(t) - kolmogorov_cdf(t))^2, trapezoid on a
/// 600-point grid, where F_hat is the empirical CDF of `values`.
double l2_to_kolmogorov(std::span<const double> values);
/// Same functional between two empirical distributions.
double l2_between(std::span<const double> a, std::span<const double> b);

/// Type-7 sample quantile of sorted data.
double sample_quantile(std::span<const double> sorted, double level);

/// Largest drop of `values` below its running maximum: 0 for a
/// nondecreasing sequence.
double isotonic_violation(std::span<const double> values);

std::string commit_id();

}  // namespace kdtest
