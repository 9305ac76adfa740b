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

#include "kdtest/twosample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kdtest/core/error.hpp"
#include "kdtest/util/parallel.hpp"
#include "kdtest/util/random.hpp"

namespace kdtest {

namespace {

constexpr double kMinPValue = 1e-300;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Uniform integer in [0, bound) by rejection; portable across standard
// libraries, unlike std::uniform_int_distribution.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound) - 1;
  std::uint64_t v;
  do {
    v = rng();
  } while (v > limit);
  return v % bound;
}

}  // namespace

std::string_view to_string(TestMethod method) {
  switch (method) {
    case TestMethod::kKdAsymptotic:
      return "kd_asymptotic";
    case TestMethod::kKdPermutation:
      return "kd_permutation";
    case TestMethod::kQiNormal:
      return "qi_normal";
  }
  return "kd_asymptotic";
}

std::string_view to_string(QiSided sided) {
  return sided == QiSided::kLower ? "lower" : "two";
}

TestMethod parse_test_method(std::string_view text) {
  if (text == "asymptotic" || text == "kd_asymptotic") return TestMethod::kKdAsymptotic;
  if (text == "permutation" || text == "kd_permutation") return TestMethod::kKdPermutation;
  if (text == "qi" || text == "qi_normal") return TestMethod::kQiNormal;
  throw InputError("unknown test method '" + std::string(text) + "'");
}

QiSided parse_qi_sided(std::string_view text) {
  if (text == "lower") return QiSided::kLower;
  if (text == "two") return QiSided::kTwo;
  throw InputError("unknown QI sidedness '" + std::string(text) + "' (lower or two)");
}

double rank_distance(std::span<const double> reference_depths,
                     std::span<const double> other_depths) {
  const std::size_t n = reference_depths.size();
  const std::size_t m = other_depths.size();
  if (n == 0 || m == 0) throw InputError("rank distance: empty sample");
  std::vector<double> ref(reference_depths.begin(), reference_depths.end());
  std::vector<double> oth(other_depths.begin(), other_depths.end());
  std::sort(ref.begin(), ref.end());
  std::sort(oth.begin(), oth.end());
  // Sweep the sorted reference depths; each distinct value d_k contributes
  // |#{ref <= d_k}/n - #{other <= d_k}/m|, kept as an integer numerator
  // over n*m so equal distances always round to the same double.
  std::uint64_t best = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 < n && ref[i + 1] == ref[i]) continue;
    while (j < m && oth[j] <= ref[i]) ++j;
    const std::uint64_t a = (i + 1) * m, b = j * n;
    best = std::max(best, a > b ? a - b : b - a);
  }
  return static_cast<double>(best) / (static_cast<double>(n) * static_cast<double>(m));
}

KdParts kd_parts(const CrossDepths& d) {
  return {rank_distance(d.x_wrt_x, d.y_wrt_x), rank_distance(d.y_wrt_y, d.x_wrt_y)};
}

CrossDepths cross_depths(const Ensemble& x, const Ensemble& y, std::size_t threads) {
  validate_pair(x, y);
  const SortedReference rx(x);
  const SortedReference ry(y);
  CrossDepths d;
  d.x_wrt_x = rx.profile(x, threads).values;
  d.y_wrt_x = rx.profile(y, threads).values;
  d.x_wrt_y = ry.profile(x, threads).values;
  d.y_wrt_y = ry.profile(y, threads).values;
  return d;
}

double k_pn_distance(const Ensemble& x, const Ensemble& y) {
  validate_pair(x, y);
  const SortedReference rx(x);
  return rank_distance(rx.profile(x).values, rx.profile(y).values);
}

double kd_statistic(const Ensemble& x, const Ensemble& y) {
  return kd_parts(cross_depths(x, y)).kd();
}

double kd_scale(std::size_t n, std::size_t m) {
  const double nd = static_cast<double>(n), md = static_cast<double>(m);
  return std::sqrt(nd * md / (nd + md));
}

PooledRanks::PooledRanks(const Ensemble& x, const Ensemble& y)
    : n_(x.members()), m_(y.members()), points_(x.points()) {
  validate_pair(x, y);
  const auto w = x.grid().weights();
  weights_.assign(w.begin(), w.end());
  const std::size_t total = n_ + m_;
  order_.resize(points_ * total);
  tie_next_.assign(points_ * total, 0);
  std::vector<double> column(total);
  std::vector<std::uint32_t> idx(total);
  for (std::size_t p = 0; p < points_; ++p) {
    for (std::size_t i = 0; i < n_; ++i) column[i] = x.member(i)[p];
    for (std::size_t j = 0; j < m_; ++j) column[n_ + j] = y.member(j)[p];
    std::iota(idx.begin(), idx.end(), 0u);
    std::sort(idx.begin(), idx.end(),
              [&](std::uint32_t a, std::uint32_t b) { return column[a] < column[b]; });
    std::copy(idx.begin(), idx.end(), order_.begin() + static_cast<std::ptrdiff_t>(p * total));
    for (std::size_t k = 0; k + 1 < total; ++k) {
      tie_next_[p * total + k] = column[idx[k]] == column[idx[k + 1]] ? 1 : 0;
    }
  }
}

KdParts PooledRanks::evaluate(std::span<const std::uint8_t> in_x) const {
  const std::size_t total = n_ + m_;
  if (in_x.size() != total) throw InputError("pooled ranks: label count mismatch");
  std::vector<double> depth_x(total, 0.0), depth_y(total, 0.0);
  for (std::size_t p = 0; p < points_; ++p) {
    const std::uint32_t* ord = order_.data() + p * total;
    const std::uint8_t* tie = tie_next_.data() + p * total;
    const double w = weights_[p];
    std::size_t cx = 0, cy = 0;
    std::size_t k = 0;
    while (k < total) {
      // Tie group [k, end): all members in it share both counts.
      std::size_t end = k + 1;
      while (end < total && tie[end - 1]) ++end;
      for (std::size_t q = k; q < end; ++q) {
        if (in_x[ord[q]]) {
          ++cx;
        } else {
          ++cy;
        }
      }
      const double dx = w * tukey_depth_from_count(cx, n_);
      const double dy = w * tukey_depth_from_count(cy, m_);
      for (std::size_t q = k; q < end; ++q) {
        depth_x[ord[q]] += dx;
        depth_y[ord[q]] += dy;
      }
      k = end;
    }
  }
  std::vector<double> xx, yx, xy, yy;
  xx.reserve(n_);
  xy.reserve(n_);
  yx.reserve(m_);
  yy.reserve(m_);
  for (std::size_t i = 0; i < total; ++i) {
    if (in_x[i]) {
      xx.push_back(depth_x[i]);
      xy.push_back(depth_y[i]);
    } else {
      yx.push_back(depth_x[i]);
      yy.push_back(depth_y[i]);
    }
  }
  if (xx.size() != n_) throw InputError("pooled ranks: wrong number of X labels");
  return {rank_distance(xx, yx), rank_distance(yy, xy)};
}

NullDistribution kd_permutation_null(const Ensemble& x, const Ensemble& y,
                                     std::size_t permutations, std::uint64_t seed,
                                     std::size_t threads) {
  const PooledRanks pooled(x, y);
  const std::size_t n = x.members(), total = pooled.pooled();
  const double scale = kd_scale(n, y.members());
  NullDistribution out;
  out.permutations = permutations;
  out.seed = seed;
  out.values.resize(permutations);
  parallel_for(permutations, threads, [&](std::size_t b) {
    Rng rng = make_rng(seed, {b});
    std::vector<std::uint32_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0u);
    // Partial Fisher-Yates: the first n slots form a uniform n-subset.
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = i + uniform_below(rng, total - i);
      std::swap(idx[i], idx[j]);
    }
    std::vector<std::uint8_t> in_x(total, 0);
    for (std::size_t i = 0; i < n; ++i) in_x[idx[i]] = 1;
    out.values[b] = scale * pooled.evaluate(in_x).kd();
  });
  std::sort(out.values.begin(), out.values.end());
  return out;
}

TestResult kd_asymptotic_from_depths(const CrossDepths& depths) {
  TestResult r;
  r.method = TestMethod::kKdAsymptotic;
  r.n = depths.x_wrt_x.size();
  r.m = depths.y_wrt_y.size();
  r.statistic = kd_parts(depths).kd();
  r.scaled = kd_scale(r.n, r.m) * r.statistic;
  r.p_value = std::max(kolmogorov_sf(r.scaled), kMinPValue);
  return r;
}

TestResult kd_test(const Ensemble& x, const Ensemble& y, const KdTestOptions& options) {
  validate_pair(x, y);
  switch (options.method) {
    case TestMethod::kKdAsymptotic:
      return kd_asymptotic_from_depths(cross_depths(x, y, options.threads));
    case TestMethod::kKdPermutation: {
      if (options.permutations < 99) {
        throw InputError("permutation test needs permutations >= 99, got " +
                         std::to_string(options.permutations));
      }
      TestResult r;
      r.method = TestMethod::kKdPermutation;
      r.n = x.members();
      r.m = y.members();
      r.permutations = options.permutations;
      const PooledRanks pooled(x, y);
      std::vector<std::uint8_t> identity(r.n + r.m, 0);
      std::fill_n(identity.begin(), r.n, 1);
      r.statistic = pooled.evaluate(identity).kd();
      r.scaled = kd_scale(r.n, r.m) * r.statistic;
      const auto null = kd_permutation_null(x, y, options.permutations, options.seed,
                                            options.threads);
      // Scaled values share one scale factor, so comparing them is
      // equivalent to comparing the raw statistics.
      const auto exceed = static_cast<std::size_t>(
          null.values.end() -
          std::lower_bound(null.values.begin(), null.values.end(), r.scaled));
      r.p_value = static_cast<double>(1 + exceed) /
                  static_cast<double>(options.permutations + 1);
      return r;
    }
    case TestMethod::kQiNormal:
      return qi_test(x, y);
  }
  throw InputError("unknown test method");
}

TestResult qi_from_depths(std::span<const double> x_wrt_x,
                          std::span<const double> y_wrt_x, QiSided sided) {
  const std::size_t n = x_wrt_x.size(), m = y_wrt_x.size();
  if (n == 0 || m == 0) throw InputError("quality index: empty sample");
  std::vector<double> ref(x_wrt_x.begin(), x_wrt_x.end());
  std::sort(ref.begin(), ref.end());
  double sum = 0.0;
  for (double d : y_wrt_x) {
    const auto rank = std::upper_bound(ref.begin(), ref.end(), d) - ref.begin();
    sum += static_cast<double>(rank) / static_cast<double>(n);
  }
  TestResult r;
  r.method = TestMethod::kQiNormal;
  r.n = n;
  r.m = m;
  r.statistic = sum / static_cast<double>(m);
  const double sd = std::sqrt((1.0 / static_cast<double>(n) + 1.0 / static_cast<double>(m)) / 12.0);
  r.scaled = (r.statistic - 0.5) / sd;
  const double lower = normal_cdf(r.scaled);
  const double p = sided == QiSided::kLower
                       ? lower
                       : std::min(1.0, 2.0 * std::min(lower, normal_cdf(-r.scaled)));
  r.p_value = std::clamp(p, kMinPValue, 1.0);
  return r;
}

TestResult qi_test(const Ensemble& x, const Ensemble& y, QiSided sided) {
  validate_pair(x, y);
  const SortedReference rx(x);
  return qi_from_depths(rx.profile(x).values, rx.profile(y).values, sided);
}

std::vector<double> by_fdr_adjust(std::span<const double> p_values) {
  const std::size_t total = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InputError("FDR adjustment: p-value outside [0, 1]");
    }
  }
  std::vector<double> out(total);
  if (total == 0) return out;
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  double harmonic = 0.0;
  for (std::size_t k = 1; k <= total; ++k) harmonic += 1.0 / static_cast<double>(k);
  const double factor = static_cast<double>(total) * harmonic;
  double running = 1.0;
  for (std::size_t r = total; r-- > 0;) {
    const double adj = p_values[order[r]] * factor / static_cast<double>(r + 1);
    running = std::min(running, adj);
    out[order[r]] = running;
  }
  return out;
}

}  // namespace kdtest
