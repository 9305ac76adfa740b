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

// Depth-based two-sample tests for ensembles of fields.
//
// The Kolmogorov depth (KD) statistic compares two ensembles X (n members)
// and Y (m members) through the ranks of their integrated depths:
//
//   With X as the depth reference, for every x_k in X
//     F(x_k) = #{i : D(x_i, X) <= D(x_k, X)} / n
//     G(x_k) = #{j : D(y_j, X) <= D(x_k, X)} / m
//   and K_X = max_k |F(x_k) - G(x_k)|. K_Y is the same with the roles of
//   X and Y swapped (Y as reference, maximum over y_k in Y).
//
//   KD = max(K_X, K_Y), a value in [0, 1].
//
// Under equality of distributions sqrt(nm / (n + m)) * KD is compared with
// the Kolmogorov law, or with a permutation null built by relabeling the
// pooled members.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kdtest/core/ensemble.hpp"
#include "kdtest/depth.hpp"

namespace kdtest {

enum class TestMethod { kKdAsymptotic, kKdPermutation, kQiNormal };
enum class QiSided { kLower, kTwo };

std::string_view to_string(TestMethod method);
std::string_view to_string(QiSided sided);
TestMethod parse_test_method(std::string_view text);
QiSided parse_qi_sided(std::string_view text);

struct TestResult {
  double statistic = 0.0;  // KD, or QI
  double scaled = 0.0;     // sqrt(nm/(n+m)) * KD, or the QI z-score
  double p_value = 1.0;
  TestMethod method = TestMethod::kKdAsymptotic;
  std::size_t n = 0;
  std::size_t m = 0;
  std::optional<std::size_t> permutations;
};

/// Sorted scaled KD values of a permutation null.
struct NullDistribution {
  std::vector<double> values;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
};

/// The two one-sided distances that make up KD.
struct KdParts {
  double k_x = 0.0;  // X as depth reference
  double k_y = 0.0;  // Y as depth reference
  double kd() const { return k_x > k_y ? k_x : k_y; }
};

/// Depths of both samples against both references.
struct CrossDepths {
  std::vector<double> x_wrt_x, y_wrt_x;
  std::vector<double> x_wrt_y, y_wrt_y;
};

/// max over the reference members of |F - G| (see file comment), given
/// the reference sample's own depths and the other sample's depths, both
/// measured against the reference.
double rank_distance(std::span<const double> reference_depths,
                     std::span<const double> other_depths);

KdParts kd_parts(const CrossDepths& depths);
CrossDepths cross_depths(const Ensemble& x, const Ensemble& y,
                         std::size_t threads = 1);

/// K with X as the depth reference.
double k_pn_distance(const Ensemble& x, const Ensemble& y);
double kd_statistic(const Ensemble& x, const Ensemble& y);

double kd_scale(std::size_t n, std::size_t m);

/// Kolmogorov distribution function P(K < t); 0 for t < 1e-8.
double kolmogorov_cdf(double t);
/// Upper tail P(K >= t), accurate far into the tail.
double kolmogorov_sf(double t);
/// Smallest t with kolmogorov_cdf(t) >= level.
double kolmogorov_quantile(double level);

/// Evaluates KD under arbitrary relabelings of a pooled ensemble.
///
/// Each grid column of the pooled members is sorted once. A relabeling is
/// then scored by one linear sweep per column, which reproduces the depths
/// of the direct route bit for bit.
class PooledRanks {
 public:
  PooledRanks(const Ensemble& x, const Ensemble& y);

  std::size_t pooled() const { return n_ + m_; }
  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }

  /// in_x[i] != 0 marks pooled member i (X first, then Y) as an X member;
  /// exactly n entries must be set.
  KdParts evaluate(std::span<const std::uint8_t> in_x) const;

 private:
  std::size_t n_ = 0, m_ = 0, points_ = 0;
  std::vector<double> weights_;
  std::vector<std::uint32_t> order_;  // point-major pooled sort order
  std::vector<std::uint8_t> tie_next_;  // sorted value equals its successor
};

struct KdTestOptions {
  TestMethod method = TestMethod::kKdAsymptotic;
  std::size_t permutations = 500;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

TestResult kd_test(const Ensemble& x, const Ensemble& y,
                   const KdTestOptions& options = {});

/// The scaled KD statistic under `permutations` random relabelings. Each
/// relabeling b draws from the substream (seed, b).
NullDistribution kd_permutation_null(const Ensemble& x, const Ensemble& y,
                                     std::size_t permutations, std::uint64_t seed,
                                     std::size_t threads = 1);

/// Quality index of Y relative to X: mean over y_j of
/// #{i : D(x_i, X) <= D(y_j, X)} / n, with a normal approximation
/// N(1/2, (1/n + 1/m) / 12) for the p-value. Lower tail by default.
TestResult qi_test(const Ensemble& x, const Ensemble& y,
                   QiSided sided = QiSided::kLower);
/// Same, from precomputed depths against X.
TestResult qi_from_depths(std::span<const double> x_wrt_x,
                          std::span<const double> y_wrt_x, QiSided sided);

/// Benjamini-Yekutieli adjusted p-values, in input order.
std::vector<double> by_fdr_adjust(std::span<const double> p_values);

/// Asymptotic KD result from already-computed depths.
TestResult kd_asymptotic_from_depths(const CrossDepths& depths);

}  // namespace kdtest
