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

#include <cmath>
#include <cstring>

#include "kdtest/core/error.hpp"
#include "kdtest/fieldsim.hpp"

using namespace kdtest;

namespace {

double distance(const Grid& g, std::size_t a, std::size_t b) {
  const auto pa = g.point(a), pb = g.point(b);
  double s = 0.0;
  for (std::size_t k = 0; k < pa.size(); ++k) s += (pa[k] - pb[k]) * (pa[k] - pb[k]);
  return std::sqrt(s);
}

struct Moments {
  double mean, var, kurt;
};

Moments column_moments(const Ensemble& e, std::size_t p) {
  const double n = static_cast<double>(e.members());
  double m = 0.0;
  for (std::size_t i = 0; i < e.members(); ++i) m += e.member(i)[p];
  m /= n;
  double m2 = 0.0, m4 = 0.0;
  for (std::size_t i = 0; i < e.members(); ++i) {
    const double d = e.member(i)[p] - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  return {m, m2 * n / (n - 1.0), m4 / (m2 * m2) - 3.0};
}

}  // namespace

TEST_CASE("Matern correlation") {
  CHECK(matern_correlation(0.0, 0.4, 1.0) == 1.0);
  CHECK(matern_correlation(0.3, 0.3, 0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  for (double r : {0.05, 0.4, 1.0}) {
    for (double d = 0.01; d < 3.0; d += 0.07) {
      const double x = d / r;
      CHECK(std::fabs(matern_correlation(d, r, 0.5) - std::exp(-x)) < 1e-12);
      CHECK(std::fabs(matern_correlation(d, r, 1.5) - (1.0 + x) * std::exp(-x)) < 1e-12);
    }
  }
  for (double nu : {0.1, 0.5, 1.0, 1.7, 2.0}) {
    double prev = 1.0;
    for (double d = 1e-4; d < 2.0; d *= 1.3) {
      const double c = matern_correlation(d, 0.4, nu);
      CHECK(c < prev);
      CHECK(c > 0.0);
      prev = c;
    }
    // Near zero the correlation behaves like 1 - c (d/r)^(2 nu), up to a log at integer nu.
    const double d = std::pow(1e-6, 1.0 / (2.0 * nu)) * 0.4;
    CHECK(matern_correlation(d, 0.4, nu) == doctest::Approx(1.0).epsilon(1e-3));
  }
  CHECK_THROWS_AS(matern_correlation(0.1, 0.0, 1.0), InputError);
  CHECK_THROWS_AS(matern_correlation(0.1, 0.4, -1.0), InputError);
  CHECK_THROWS_AS(matern_correlation(-0.1, 0.4, 1.0), InputError);
}

TEST_CASE("covariance factor") {
  SUBCASE("single point") {
    const Grid g({1}, {{0.5}});
    const auto f = build_covariance(g, {2.5, 0.4, 1.0});
    REQUIRE(f.lower.rows() == 1);
    CHECK(f.lower(0, 0) == doctest::Approx(2.5).epsilon(1e-15));
  }
  SUBCASE("reconstruction") {
    const Grid g = Grid::unit_square(9, 7);
    for (const MaternParams p : {MaternParams{1.0, 0.4, 1.0}, MaternParams{1.7, 0.1, 0.5},
                                 MaternParams{0.3, 0.8, 1.5}}) {
      const auto f = build_covariance(g, p);
      Eigen::MatrixXd cov(g.size(), g.size());
      for (std::size_t a = 0; a < g.size(); ++a) {
        for (std::size_t b = 0; b < g.size(); ++b) {
          cov(a, b) = p.sigma * p.sigma * matern_correlation(distance(g, a, b), p.range,
                                                             p.smoothness);
        }
      }
      const Eigen::MatrixXd rebuilt = f.lower * f.lower.transpose();
      CHECK((rebuilt - cov).norm() / cov.norm() < 1e-8);
    }
  }
  SUBCASE("32 by 32 without jitter") {
    const auto f = build_covariance(Grid::unit_square(32, 32), {1.0, 0.4, 1.0});
    CHECK(!f.jittered);
    CHECK(f.lower.rows() == 1024);
  }
  SUBCASE("size guard") {
    CHECK_THROWS_AS(build_covariance(Grid::unit_square(150, 150), {}), InputError);
  }
}

TEST_CASE("sampler") {
  const GridPtr g = make_grid(Grid::unit_square(6, 5));

  SUBCASE("determinism") {
    FieldSpec spec = FieldSpec::stationary(g, {1.0, 0.4, 1.0}, 0.0, 77);
    const Ensemble a = sample_fields(spec, 20), b = sample_fields(spec, 20);
    CHECK(std::memcmp(a.values().data(), b.values().data(), a.values().size() * 8) == 0);
    spec.seed = 78;
    const Ensemble c = sample_fields(spec, 20);
    CHECK(std::memcmp(a.values().data(), c.values().data(), a.values().size() * 8) != 0);
    spec.family = Family::kStudentT;
    spec.df = 3;
    const Ensemble t1 = sample_fields(spec, 20), t2 = sample_fields(spec, 20);
    CHECK(std::memcmp(t1.values().data(), t2.values().data(), t1.values().size() * 8) == 0);
  }
  SUBCASE("degenerate scale") {
    FieldSpec spec = FieldSpec::stationary(g, {}, 0.0, 3);
    for (std::size_t p = 0; p < g->size(); ++p) spec.mean_field[p] = std::sin(double(p));
    spec.sd_field.assign(g->size(), 1e-12);
    const Ensemble e = sample_fields(spec, 10);
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t p = 0; p < g->size(); ++p) {
        CHECK(std::fabs(e.member(i)[p] - spec.mean_field[p]) < 1e-10);
      }
    }
  }
  SUBCASE("invalid specs") {
    FieldSpec spec = FieldSpec::stationary(g, {});
    CHECK_THROWS_AS(sample_fields(spec, 1), InputError);
    spec.sd_field[3] = 0.0;
    CHECK_THROWS_AS(sample_fields(spec, 5), InputError);
    spec = FieldSpec::stationary(g, {});
    spec.family = Family::kStudentT;
    spec.df = 2.0;
    CHECK_THROWS_AS(sample_fields(spec, 5), InputError);
    CHECK_THROWS_AS(sample_fields(FieldSpec::stationary(g, {1.0, -0.4, 1.0}), 5), InputError);
  }
  CHECK(parse_family("student_t") == Family::kStudentT);
  CHECK(to_string(Family::kGaussian) == "gaussian");
  CHECK_THROWS_AS(parse_family("cauchy"), InputError);
}

TEST_CASE("pointwise moments at n = 2000") {
  const GridPtr g = make_grid(Grid::unit_square(8, 8));
  const Ensemble e = sample_fields(FieldSpec::stationary(g, {1.0, 0.4, 1.0}, 0.0, 2000), 2000);
  for (std::size_t p = 0; p < g->size(); ++p) {
    const Moments m = column_moments(e, p);
    CHECK(m.mean > -0.08);
    CHECK(m.mean < 0.08);
    CHECK(std::sqrt(m.var) > 0.93);
    CHECK(std::sqrt(m.var) < 1.07);
  }
}

TEST_CASE("sample covariance matches the kernel") {
  const GridPtr g = make_grid(Grid::unit_square(7, 7));
  const MaternParams par{1.3, 0.3, 1.0};
  const Ensemble e = sample_fields(FieldSpec::stationary(g, par, 0.0, 5000), 5000);
  const std::size_t pairs[][2] = {{0, 1}, {0, 8}, {10, 30}, {3, 45}};
  for (const auto& pr : pairs) {
    const std::size_t a = pr[0], b = pr[1];
    const double s11 = par.sigma * par.sigma;
    const double s12 = s11 * matern_correlation(distance(*g, a, b), par.range, par.smoothness);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < 5000; ++i) {
      ma += e.member(i)[a];
      mb += e.member(i)[b];
    }
    ma /= 5000;
    mb /= 5000;
    double c = 0;
    for (std::size_t i = 0; i < 5000; ++i) c += (e.member(i)[a] - ma) * (e.member(i)[b] - mb);
    c /= 4999;
    const double se = std::sqrt((s11 * s11 + s12 * s12) / 5000.0);
    CHECK(std::fabs(c - s12) < 3.0 * se);
  }
}

TEST_CASE("t process has heavier tails") {
  const GridPtr g = make_grid(Grid::unit_square(4, 4));
  FieldSpec spec = FieldSpec::stationary(g, {}, 0.0, 31);
  const Ensemble gauss = sample_fields(spec, 5000);
  spec.family = Family::kStudentT;
  spec.df = 3;
  const Ensemble heavy = sample_fields(spec, 5000);
  for (std::size_t p : {0u, 5u, 15u}) {
    CHECK(column_moments(heavy, p).kurt > 1.0);
    CHECK(std::fabs(column_moments(gauss, p).kurt) < 0.3);
  }
}

TEST_CASE("sine fields") {
  const Grid g = Grid::unit_square(9, 9);  // spacing 1/8
  const auto mu0 = sine_mean_field(g, 0.0), sd0 = sine_sd_field(g, 0.0);
  for (std::size_t p = 0; p < g.size(); ++p) {
    CHECK(mu0[p] == 0.0);
    CHECK(sd0[p] == 1.0);
  }
  const auto mu = sine_mean_field(g, 1.0), sd = sine_sd_field(g, 1.0);
  CHECK(mu[0] == doctest::Approx(-0.75).epsilon(1e-14));
  CHECK(sd[0] == doctest::Approx(0.25).epsilon(1e-14));
  const std::size_t at = 1 * 9 + 1;
  CHECK(g.point(at) == std::vector<double>{0.125, 0.125});
  CHECK(std::fabs(mu[at]) < 1e-14);
  CHECK(sd[at] == doctest::Approx(1.0).epsilon(1e-14));
  // The two axes use their own coordinate: (0, 1/8) gives f(0) * f(1/8).
  const std::size_t mixed = 1;
  CHECK(sd[mixed] == doctest::Approx(0.5).epsilon(1e-14));
  for (double v : sd) CHECK(v > 0.0);

  CHECK_THROWS_AS(sine_mean_field(Grid({3}, {{0, 0.5, 1}}), 0.5), InputError);
  CHECK_THROWS_AS(sine_sd_field(g, 1.5), InputError);
  CHECK_THROWS_AS(sine_sd_field(g, -0.1), InputError);
}
