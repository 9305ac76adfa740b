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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "kdtest/core/error.hpp"
#include "kdtest/depth.hpp"

using namespace kdtest;

namespace {

Ensemble constant_fields(const GridPtr& g, const std::vector<double>& levels) {
  std::vector<double> v;
  for (double c : levels) v.insert(v.end(), g->size(), c);
  return Ensemble(g, std::move(v));
}

Ensemble normal_ensemble(const GridPtr& g, std::size_t members, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> v(members * g->size());
  for (double& x : v) x = normal(rng);
  return Ensemble(g, std::move(v));
}

// Brute-force oracle: count the reference values <= x at every point.
double naive_depth(std::span<const double> field, const Ensemble& ref) {
  const auto w = ref.grid().weights();
  double acc = 0.0;
  for (std::size_t p = 0; p < ref.points(); ++p) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < ref.members(); ++i) c += ref.member(i)[p] <= field[p];
    const double prop = static_cast<double>(c) / static_cast<double>(ref.members());
    acc += w[p] * (1.0 - std::fabs(1.0 - 2.0 * prop));
  }
  return acc;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("pointwise Tukey depth") {
  const std::vector<double> five{1, 2, 3, 4, 5}, four{1, 2, 3, 4}, three{1, 2, 3};
  CHECK(pointwise_tukey_depth(3, five) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(pointwise_tukey_depth(2, four) == 1.0);
  CHECK(pointwise_tukey_depth(10, three) == 0.0);
  CHECK(pointwise_tukey_depth(-10, three) == 0.0);
  CHECK_THROWS_AS(pointwise_tukey_depth(1, std::vector<double>{}), InputError);
  // Order of the reference does not matter.
  CHECK(pointwise_tukey_depth(3, std::vector<double>{5, 1, 4, 3, 2}) ==
        pointwise_tukey_depth(3, five));
}

TEST_CASE("degenerate reference column follows the formula") {
  const std::vector<double> flat{2, 2, 2};
  CHECK(pointwise_tukey_depth(2, flat) == 0.0);
  CHECK(pointwise_tukey_depth(1, flat) == 0.0);
  CHECK(pointwise_tukey_depth(3, flat) == 0.0);
}

TEST_CASE("integrated depth") {
  SUBCASE("weighted sum") {
    const GridPtr g = make_grid(Grid({2}, {{0.0, 1.0}}, std::vector<double>{0.25, 0.75}));
    // Point 0 holds {1..5}, point 1 holds {1..5}; the query sits at 3 and 1,
    // with pointwise depths 0.8 and 0.4.
    std::vector<double> v;
    for (int i = 1; i <= 5; ++i) v.insert(v.end(), {double(i), double(i)});
    const Ensemble ref(g, v);
    const std::vector<double> q{3, 1};
    CHECK(integrated_depth(q, ref) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("pointwise median of an odd ensemble") {
    // Under the <= convention the odd-n median has P = (n+1)/(2n), so its
    // depth is 1 - 1/n rather than 1.
    const GridPtr g = make_grid(Grid::unit_square(4, 4));
    for (std::size_t n : {3u, 5u, 11u}) {
      std::vector<double> levels(n);
      std::iota(levels.begin(), levels.end(), 0.0);
      const Ensemble ref = constant_fields(g, levels);
      const std::vector<double> med(g->size(), static_cast<double>(n / 2));
      CHECK(integrated_depth(med, ref) == doctest::Approx(1.0 - 1.0 / n).epsilon(1e-14));
    }
  }
  SUBCASE("lower median of an even ensemble has depth one") {
    const GridPtr g = make_grid(Grid::unit_square(3, 3));
    const Ensemble ref = constant_fields(g, {0, 1, 2, 3});
    const std::vector<double> lower(g->size(), 1.0);
    CHECK(integrated_depth(lower, ref) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("above the maximum") {
    const GridPtr g = make_grid(Grid::unit_square(5, 5));
    const Ensemble ref = normal_ensemble(g, 10, 1);
    std::vector<double> above(g->size(), -INFINITY);
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t p = 0; p < g->size(); ++p) above[p] = std::max(above[p], ref.member(i)[p]);
    }
    for (double& a : above) a += 1.0;
    CHECK(integrated_depth(above, ref) == 0.0);
  }
  SUBCASE("length mismatch") {
    const GridPtr g = make_grid(Grid::unit_square(2, 2));
    const Ensemble ref = constant_fields(g, {0, 1});
    CHECK_THROWS_AS(integrated_depth(std::vector<double>{1.0, 2.0}, ref), InputError);
  }
}

TEST_CASE("depth profile of three constant fields") {
  // Depths under <=: level 0 has P = 1/3, level 1 has P = 2/3, level 2 has
  // P = 1, giving (2/3, 2/3, 0). The two lower members tie for the maximum.
  const GridPtr g = make_grid(Grid::unit_square(3, 2));
  const Ensemble x = constant_fields(g, {0, 1, 2});
  const auto d = depth_profile(x, x).values;
  REQUIRE(d.size() == 3);
  CHECK(d[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(d[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(d[2] == 0.0);
  CHECK(d[1] >= d[0]);
  CHECK(d[1] > d[2]);
}

TEST_CASE("sorted reference agrees with brute force bit for bit") {
  const GridPtr g = make_grid(Grid::lat_lon(6, 9, WeightMode::kCosLat));
  const Ensemble ref = normal_ensemble(g, 17, 2);
  const Ensemble sample = normal_ensemble(g, 9, 3);
  const auto prof = depth_profile(sample, ref).values;
  for (std::size_t i = 0; i < sample.members(); ++i) {
    CHECK(prof[i] == naive_depth(sample.member(i), ref));
  }
}

TEST_CASE("depth profile properties") {
  const GridPtr g = make_grid(Grid::unit_square(8, 8));
  const Ensemble ref = normal_ensemble(g, 25, 4);
  const Ensemble sample = normal_ensemble(g, 12, 5);
  const auto base = depth_profile(sample, ref).values;

  SUBCASE("range") {
    for (double d : base) {
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
    }
  }
  SUBCASE("affine map") {
    auto affine = [](const Ensemble& e) {
      std::vector<double> v(e.values().begin(), e.values().end());
      for (double& x : v) x = 2.0 * x + 5.0;
      return Ensemble(e.grid_ptr(), v);
    };
    CHECK(same_bits(depth_profile(affine(sample), affine(ref)).values, base));
  }
  SUBCASE("different increasing map at every point") {
    auto warp = [](const Ensemble& e) {
      std::vector<double> v(e.values().begin(), e.values().end());
      for (std::size_t k = 0; k < v.size(); ++k) {
        const std::size_t p = k % e.points();
        switch (p % 4) {
          case 0: v[k] = std::exp(v[k]); break;
          case 1: v[k] = v[k] * v[k] * v[k]; break;
          case 2: v[k] = std::atan(v[k]) * 3.0 - 7.0; break;
          default: v[k] = 1e6 * v[k] + static_cast<double>(p); break;
        }
      }
      return Ensemble(e.grid_ptr(), v);
    };
    CHECK(same_bits(depth_profile(warp(sample), warp(ref)).values, base));
  }
  SUBCASE("reference member order") {
    std::vector<std::size_t> order(ref.members());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 rng(9);
    std::shuffle(order.begin(), order.end(), rng);
    CHECK(same_bits(depth_profile(sample, ref.select(order)).values, base));
  }
  SUBCASE("worker count") {
    CHECK(same_bits(depth_profile(sample, ref, 4).values, base));
  }
}

TEST_CASE("deepest member concentrates at the median") {
  // n i.i.d. standard normal constant fields: the deepest member sits at the
  // sample median, and the member closest to 0 has depth near 1.
  const GridPtr g = make_grid(Grid({1}, {{0.0}}));
  const std::size_t n = 1001, reps = 200;
  std::size_t near_zero = 0, deep_closest = 0;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  for (std::size_t r = 0; r < reps; ++r) {
    std::vector<double> v(n);
    for (double& x : v) x = normal(rng);
    const Ensemble e(g, v);
    const auto d = depth_profile(e, e).values;
    const auto deepest = std::max_element(d.begin(), d.end()) - d.begin();
    near_zero += std::fabs(v[deepest]) < 0.15;
    const auto closest = std::min_element(v.begin(), v.end(), [](double a, double b) {
                           return std::fabs(a) < std::fabs(b);
                         }) - v.begin();
    deep_closest += d[closest] >= 0.9;
  }
  CHECK(near_zero >= 198);
  CHECK(deep_closest >= 190);
}
