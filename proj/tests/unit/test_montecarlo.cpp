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

// Monte-Carlo properties that need thousands of simulated fields.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <iostream>

#include "kdtest/experiments.hpp"
#include "kdtest/util/parallel.hpp"
#include "kdtest/util/random.hpp"

using namespace kdtest;
using nlohmann::json;

namespace {

const RateRow& row_for(const StudyResult& r, std::size_t cell, const std::string& method) {
  for (const RateRow& row : r.rates) {
    if (row.cell.index == cell && row.method == method) return row;
  }
  throw std::runtime_error("missing row");
}

}  // namespace

TEST_CASE("nested samples are detected by KD") {
  const json cfg{{"study", "power_homogeneous"},
                 {"seed", 41},
                 {"grid", {32, 32}},
                 {"sims_per_cell", 2000},
                 {"methods", {"kd"}},
                 {"baseline", {{"n", 100}, {"m", 100}}},
                 {"vary", {{"sigma", {0.1}}}}};
  const RateRow& kd = row_for(run_study(parse_study_config(cfg)), 0, "kd_asymptotic");
  MESSAGE("nested KD power " << kd.estimate);
  CHECK(kd.estimate >= 0.9);
}

TEST_CASE("doubling the spread is caught by both statistics") {
  const json cfg{{"study", "power_homogeneous"},
                 {"seed", 42},
                 {"grid", {32, 32}},
                 {"sims_per_cell", 500},
                 {"vary", {{"sigma", {2.0}}}}};
  const StudyResult r = run_study(parse_study_config(cfg));
  const double kd = row_for(r, 0, "kd_asymptotic").estimate;
  const double qi = row_for(r, 0, "qi_normal").estimate;
  MESSAGE("sigma x2: KD " << kd << ", QI " << qi);
  CHECK(kd >= 0.9);
  CHECK(qi >= 0.9);
}

TEST_CASE("power grows with the mean shift") {
  const json cfg{{"study", "power_homogeneous"},
                 {"seed", 43},
                 {"grid", {16, 16}},
                 {"sims_per_cell", 300},
                 {"methods", {"kd"}},
                 {"vary", {{"mu", {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}}}}};
  const StudyResult r = run_study(parse_study_config(cfg));
  std::vector<double> power;
  double max_se = 0.0;
  for (const RateRow& row : r.rates) {
    power.push_back(row.estimate);
    max_se = std::max(max_se, row.se);
  }
  MESSAGE("power at mu 0..1: " << json(power).dump());
  CHECK(power.front() < 0.1);
  CHECK(power.back() > 0.9);
  CHECK(isotonic_violation(power) <= 3.0 * max_se);
}

TEST_CASE("permutation and asymptotic p-values agree for smooth fields") {
  // 100 pairs at r = 0.5, nu = 1.5, n = m = 75, each tested both ways.
  const std::size_t pairs = 100, n = 75;
  const GridPtr grid = make_grid(Grid::unit_square(32, 32));
  std::vector<double> diff(pairs);
  parallel_for(pairs, 0, [&](std::size_t s) {
    FieldSpec spec = FieldSpec::stationary(grid, {1.0, 0.5, 1.5}, 0.0, derive_seed(44, {s, 0}));
    const Ensemble x = sample_fields(spec, n);
    spec.seed = derive_seed(44, {s, 1});
    const Ensemble y = sample_fields(spec, n);
    const TestResult a = kd_test(x, y);
    const TestResult p =
        kd_test(x, y, {TestMethod::kKdPermutation, 999, derive_seed(44, {s, 2}), 1});
    diff[s] = std::fabs(a.p_value - p.p_value);
  });
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= pairs;
  std::sort(diff.begin(), diff.end());
  MESSAGE("mean |p_asym - p_perm| " << mean << ", median " << diff[pairs / 2] << ", max "
                                    << diff.back());
  CHECK(mean <= 0.02);
}
