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

#include "kdtest/fieldsim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "kdtest/core/error.hpp"
#include "kdtest/util/random.hpp"

namespace kdtest {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void append_bytes(std::string& key, double v) {
  char b[sizeof v];
  std::memcpy(b, &v, sizeof v);
  key.append(b, sizeof v);
}

Eigen::MatrixXd correlation_matrix(const Grid& grid, double range, double smoothness) {
  const std::size_t g = grid.size();
  std::vector<std::vector<double>> pts(g);
  for (std::size_t i = 0; i < g; ++i) pts[i] = grid.point(i);
  Eigen::MatrixXd c(g, g);
  for (std::size_t j = 0; j < g; ++j) {
    c(j, j) = 1.0;
    for (std::size_t i = j + 1; i < g; ++i) {
      double d2 = 0.0;
      for (std::size_t a = 0; a < pts[i].size(); ++a) {
        const double diff = pts[i][a] - pts[j][a];
        d2 += diff * diff;
      }
      c(i, j) = matern_correlation(std::sqrt(d2), range, smoothness);
      c(j, i) = c(i, j);
    }
  }
  return c;
}

// Index of the first leading minor that is not positive definite.
std::size_t failing_minor(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double s = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(s > 0.0)) return static_cast<std::size_t>(j);
    l(j, j) = std::sqrt(s);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return static_cast<std::size_t>(n);
}

CovarianceFactor factorize(Eigen::MatrixXd cov, double jitter) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), false};
  cov.diagonal().array() += jitter;
  llt.compute(cov);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), true};
  throw NumericalError("covariance factorization failed after jitter at leading minor " +
                       std::to_string(failing_minor(cov)));
}

void check_size(const Grid& grid) {
  if (grid.size() > kMaxCovariancePoints) {
    throw InputError("dense covariance limited to " + std::to_string(kMaxCovariancePoints) +
                     " grid points, got " + std::to_string(grid.size()));
  }
}

}  // namespace

void MaternParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("matern: sigma must be > 0");
  if (!(range > 0.0) || !std::isfinite(range)) throw InputError("matern: range must be > 0");
  if (!(smoothness > 0.0) || !std::isfinite(smoothness)) {
    throw InputError("matern: smoothness must be > 0");
  }
}

std::string_view to_string(Family family) {
  return family == Family::kGaussian ? "gaussian" : "student_t";
}

Family parse_family(std::string_view text) {
  if (text == "gaussian") return Family::kGaussian;
  if (text == "student_t" || text == "t") return Family::kStudentT;
  throw InputError("unknown process family '" + std::string(text) + "'");
}

FieldSpec FieldSpec::stationary(GridPtr grid, MaternParams matern, double mu,
                                std::uint64_t seed) {
  FieldSpec s;
  const std::size_t g = grid->size();
  s.grid = std::move(grid);
  s.mean_field.assign(g, mu);
  s.sd_field.assign(g, 1.0);
  s.matern = matern;
  s.seed = seed;
  return s;
}

void FieldSpec::validate() const {
  if (!grid) throw InputError("field spec: null grid");
  matern.validate();
  if (mean_field.size() != grid->size() || sd_field.size() != grid->size()) {
    throw InputError("field spec: mean/sd fields do not match the grid");
  }
  for (double v : mean_field) {
    if (!std::isfinite(v)) throw InputError("field spec: non-finite mean");
  }
  for (double v : sd_field) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InputError("field spec: sd field must be strictly positive");
    }
  }
  if (family == Family::kStudentT && !(df > 2.0)) {
    throw InputError("field spec: t-process needs df > 2");
  }
}

double matern_correlation(double d, double range, double smoothness) {
  if (!(range > 0.0)) throw InputError("matern: range must be > 0");
  if (!(smoothness > 0.0)) throw InputError("matern: smoothness must be > 0");
  if (!(d >= 0.0)) throw InputError("matern: distance must be >= 0");
  if (d == 0.0) return 1.0;
  const double x = d / range;
  // K_nu underflows to 0 long before x^nu overflows for any sane nu.
  if (x > 700.0) return 0.0;
  return std::pow(2.0, 1.0 - smoothness) / std::tgamma(smoothness) *
         std::pow(x, smoothness) * std::cyl_bessel_k(smoothness, x);
}

CovarianceFactor build_covariance(const Grid& grid, const MaternParams& params) {
  params.validate();
  check_size(grid);
  const double var = params.sigma * params.sigma;
  Eigen::MatrixXd cov = correlation_matrix(grid, params.range, params.smoothness) * var;
  return factorize(std::move(cov), 1e-10 * var);
}

std::shared_ptr<const CovarianceFactor> CorrelationCache::get(const Grid& grid, double range,
                                                              double smoothness) {
  std::string key;
  append_bytes(key, range);
  append_bytes(key, smoothness);
  for (const auto& axis : grid.coords()) {
    append_bytes(key, static_cast<double>(axis.size()));
    for (double c : axis) append_bytes(key, c);
  }
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  // Factor outside the lock; a concurrent duplicate is harmless.
  auto factor = std::make_shared<const CovarianceFactor>(
      build_covariance(grid, MaternParams{1.0, range, smoothness}));
  std::lock_guard lock(mutex_);
  return entries_.emplace(std::move(key), std::move(factor)).first->second;
}

std::size_t CorrelationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void CorrelationCache::clear() {
  std::lock_guard lock(mutex_);
  entries_.clear();
}

CorrelationCache& correlation_cache() {
  static CorrelationCache cache;
  return cache;
}

Ensemble sample_fields(const FieldSpec& spec, std::size_t count) {
  spec.validate();
  if (count < 2) throw InputError("sample_fields: count must be >= 2");
  const auto factor =
      correlation_cache().get(*spec.grid, spec.matern.range, spec.matern.smoothness);
  const std::size_t g = spec.grid->size();

  Rng rng = make_rng(spec.seed);
  std::normal_distribution<double> normal;
  RowMatrix z(count, g);
  std::vector<double> t_scale(count, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    double* row = z.data() + i * g;
    for (std::size_t p = 0; p < g; ++p) row[p] = normal(rng);
    if (spec.family == Family::kStudentT) {
      std::chi_squared_distribution<double> chi2(spec.df);
      t_scale[i] = 1.0 / std::sqrt(chi2(rng) / spec.df);
    }
  }
  RowMatrix fields(count, g);
  fields.noalias() = z * factor->lower.transpose().triangularView<Eigen::Upper>();

  std::vector<double> values(count * g);
  for (std::size_t i = 0; i < count; ++i) {
    const double s = spec.matern.sigma * t_scale[i];
    const double* f = fields.data() + i * g;
    double* out = values.data() + i * g;
    for (std::size_t p = 0; p < g; ++p) {
      out[p] = spec.mean_field[p] + spec.sd_field[p] * (s * f[p]);
    }
  }
  return Ensemble(spec.grid, std::move(values));
}

namespace {

double sine_factor(double u, double kappa) {
  return 0.5 * kappa * std::sin(4.0 * std::numbers::pi * u - 0.5 * std::numbers::pi) + 1.0;
}

std::vector<double> sine_product(const Grid& grid, double kappa) {
  if (grid.dimension() != 2) throw InputError("sine fields need a two-dimensional grid");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw InputError("sine fields need 0 <= kappa <= 1");
  const auto s1 = grid.axis(0), s2 = grid.axis(1);
  std::vector<double> out;
  out.reserve(grid.size());
  for (double a : s1) {
    const double fa = sine_factor(a, kappa);
    for (double b : s2) out.push_back(fa * sine_factor(b, kappa));
  }
  return out;
}

}  // namespace

std::vector<double> sine_mean_field(const Grid& grid, double kappa) {
  auto f = sine_product(grid, kappa);
  for (double& v : f) v -= 1.0;
  return f;
}

std::vector<double> sine_sd_field(const Grid& grid, double kappa) {
  return sine_product(grid, kappa);
}

}  // namespace kdtest
