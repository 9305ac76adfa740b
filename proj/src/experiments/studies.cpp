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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "kdtest/core/error.hpp"
#include "kdtest/core/io.hpp"
#include "kdtest/experiments.hpp"
#include "kdtest/util/parallel.hpp"
#include "kdtest/util/random.hpp"

namespace kdtest {

namespace {

constexpr double kL2Upper = 3.0;
constexpr std::size_t kL2Points = 600;

GridPtr study_grid(const std::vector<std::size_t>& dims) {
  if (dims.size() == 2) return make_grid(Grid::unit_square(dims[0], dims[1]));
  std::vector<std::vector<double>> coords;
  for (auto d : dims) {
    std::vector<double> axis(d, 0.0);
    for (std::size_t i = 0; i < d && d > 1; ++i) {
      axis[i] = static_cast<double>(i) / static_cast<double>(d - 1);
    }
    coords.push_back(std::move(axis));
  }
  return make_grid(Grid(dims, std::move(coords)));
}

FieldSpec process_spec(const StudyConfig& cfg, const GridPtr& grid, const ProcessParams& p,
                       std::uint64_t seed) {
  FieldSpec spec = FieldSpec::stationary(grid, MaternParams{p.sigma, p.r, p.nu}, p.mu, seed);
  spec.family = cfg.family;
  spec.df = cfg.df;
  return spec;
}

FieldSpec y_spec(const StudyConfig& cfg, const GridPtr& grid, const Cell& cell,
                 std::uint64_t seed) {
  FieldSpec spec = process_spec(cfg, grid, cell.y, seed);
  if (cfg.study != StudyKind::kPowerHeterogeneous) return spec;
  if (cell.component == "mean" || cell.component == "both") {
    spec.mean_field = sine_mean_field(*grid, cell.kappa);
    for (double& v : spec.mean_field) v += cell.y.mu;
  }
  if (cell.component == "sd" || cell.component == "both") {
    spec.sd_field = sine_sd_field(*grid, cell.kappa);
  }
  return spec;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::size_t worker_count(const StudyConfig& cfg) {
  return cfg.threads == 0 ? default_threads() : cfg.threads;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// Shared by size and power studies: rejection counts per method.
StudyResult run_rates(const StudyConfig& cfg) {
  Timer timer;
  const GridPtr grid = study_grid(cfg.grid);
  const auto cells = study_cells(cfg);
  const std::size_t sims = cfg.sims_per_cell;
  const std::size_t threads = worker_count(cfg);
  StudyResult result;
  result.study = cfg.study;

  for (const Cell& cell : cells) {
    std::vector<std::uint8_t> kd_reject(sims, 0), qi_reject(sims, 0);
    parallel_for(sims, threads, [&](std::size_t s) {
      const Ensemble x = sample_fields(
          process_spec(cfg, grid, cell.x, derive_seed(cfg.seed, {cell.index, s, 0})), cell.n);
      const Ensemble y =
          sample_fields(y_spec(cfg, grid, cell, derive_seed(cfg.seed, {cell.index, s, 1})), cell.m);
      std::vector<double> x_wrt_x, y_wrt_x;
      if (cfg.run_kd && cfg.kd_method == TestMethod::kKdAsymptotic) {
        CrossDepths d = cross_depths(x, y);
        kd_reject[s] = kd_asymptotic_from_depths(d).p_value <= cfg.alpha;
        x_wrt_x = std::move(d.x_wrt_x);
        y_wrt_x = std::move(d.y_wrt_x);
      } else if (cfg.run_kd) {
        KdTestOptions opt;
        opt.method = TestMethod::kKdPermutation;
        opt.permutations = cfg.permutations;
        opt.seed = derive_seed(cfg.seed, {cell.index, s, 2});
        kd_reject[s] = kd_test(x, y, opt).p_value <= cfg.alpha;
      }
      if (cfg.run_qi) {
        if (x_wrt_x.empty()) {
          const SortedReference rx(x);
          x_wrt_x = rx.profile(x).values;
          y_wrt_x = rx.profile(y).values;
        }
        qi_reject[s] = qi_from_depths(x_wrt_x, y_wrt_x, cfg.qi_sided).p_value <= cfg.alpha;
      }
    });
    auto add = [&](TestMethod method, const std::vector<std::uint8_t>& rejected) {
      RateRow row;
      row.cell = cell;
      row.method = std::string(to_string(method));
      row.sims = sims;
      for (auto r : rejected) row.rejections += r;
      row.estimate = static_cast<double>(row.rejections) / static_cast<double>(sims);
      row.se = std::sqrt(row.estimate * (1.0 - row.estimate) / static_cast<double>(sims));
      result.rates.push_back(std::move(row));
    };
    if (cfg.run_kd) add(cfg.kd_method, kd_reject);
    if (cfg.run_qi) add(TestMethod::kQiNormal, qi_reject);
  }
  result.wall_seconds = timer.seconds();
  return result;
}

void put(std::ostringstream& out, double v) { out << format_double(v); }

}  // namespace

double sample_quantile(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw InputError("quantile level outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

template <class Cdf>
double l2_against(std::span<const double> values, Cdf other) {
  if (values.empty()) throw InputError("L2 distance of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = kL2Upper / static_cast<double>(kL2Points - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < kL2Points; ++i) {
    const double t = h * static_cast<double>(i);
    const double f = static_cast<double>(std::upper_bound(v.begin(), v.end(), t) - v.begin()) /
                     static_cast<double>(v.size());
    const double d = f - other(t);
    const double w = (i == 0 || i + 1 == kL2Points) ? 0.5 : 1.0;
    sum += w * d * d;
  }
  return h * sum;
}

}  // namespace

double l2_to_kolmogorov(std::span<const double> values) {
  return l2_against(values, [](double t) { return kolmogorov_cdf(t); });
}

double l2_between(std::span<const double> a, std::span<const double> b) {
  if (b.empty()) throw InputError("L2 distance of an empty sample");
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sb.begin(), sb.end());
  return l2_against(a, [&](double t) {
    return static_cast<double>(std::upper_bound(sb.begin(), sb.end(), t) - sb.begin()) /
           static_cast<double>(sb.size());
  });
}

double isotonic_violation(std::span<const double> values) {
  double worst = 0.0;
  double running = -INFINITY;
  for (double v : values) {
    running = std::max(running, v);
    worst = std::max(worst, running - v);
  }
  return worst;
}

StudyResult run_size_study(const StudyConfig& cfg) {
  if (cfg.study != StudyKind::kSize) throw InputError("run_size_study: study must be size");
  return run_rates(cfg);
}

StudyResult run_power_study(const StudyConfig& cfg) {
  if (cfg.study != StudyKind::kPowerHomogeneous && cfg.study != StudyKind::kPowerHeterogeneous) {
    throw InputError("run_power_study: study must be a power study");
  }
  return run_rates(cfg);
}

StudyResult run_convergence_study(const StudyConfig& cfg) {
  if (cfg.study != StudyKind::kConvergence) {
    throw InputError("run_convergence_study: study must be convergence");
  }
  Timer timer;
  const GridPtr grid = study_grid(cfg.grid);
  std::array<double, 3> kolm_q{};
  for (std::size_t k = 0; k < 3; ++k) kolm_q[k] = kolmogorov_quantile(kConvergenceLevels[k]);
  const std::size_t threads = worker_count(cfg);

  StudyResult result;
  result.study = cfg.study;
  for (const Cell& cell : study_cells(cfg)) {
    ConvergenceRow row;
    row.cell = cell;
    row.replicates = cfg.replicates;
    row.permutations = cfg.permutations;
    row.l2.assign(cfg.replicates, 0.0);
    for (auto& g : row.gaps) g.assign(cfg.replicates, 0.0);
    parallel_for(cfg.replicates, threads, [&](std::size_t s) {
      const Ensemble x = sample_fields(
          process_spec(cfg, grid, cell.x, derive_seed(cfg.seed, {cell.index, s, 0})), cell.n);
      const Ensemble y = sample_fields(
          process_spec(cfg, grid, cell.y, derive_seed(cfg.seed, {cell.index, s, 1})), cell.m);
      const NullDistribution null = kd_permutation_null(
          x, y, cfg.permutations, derive_seed(cfg.seed, {cell.index, s, 2}));
      row.l2[s] = l2_to_kolmogorov(null.values);
      for (std::size_t k = 0; k < 3; ++k) {
        row.gaps[k][s] = kolm_q[k] - sample_quantile(null.values, kConvergenceLevels[k]);
      }
    });
    row.l2_median = median(row.l2);
    for (std::size_t k = 0; k < 3; ++k) row.gap_median[k] = median(row.gaps[k]);
    result.convergence.push_back(std::move(row));
  }
  result.wall_seconds = timer.seconds();
  return result;
}

StudyResult run_study(const StudyConfig& cfg) {
  switch (cfg.study) {
    case StudyKind::kSize: return run_size_study(cfg);
    case StudyKind::kPowerHomogeneous:
    case StudyKind::kPowerHeterogeneous: return run_power_study(cfg);
    case StudyKind::kConvergence: return run_convergence_study(cfg);
  }
  throw InputError("unknown study");
}

std::string StudyResult::to_csv() const {
  std::ostringstream out;
  if (study == StudyKind::kConvergence) {
    out << "study,cell,n,m,r,nu,replicates,permutations,l2_median,l2_max,"
           "gap_90_median,gap_95_median,gap_99_median\n";
    for (const auto& row : convergence) {
      out << to_string(study) << ',' << row.cell.index << ',' << row.cell.n << ','
          << row.cell.m << ',';
      put(out, row.cell.x.r);
      out << ',';
      put(out, row.cell.x.nu);
      out << ',' << row.replicates << ',' << row.permutations << ',';
      put(out, row.l2_median);
      out << ',';
      put(out, *std::max_element(row.l2.begin(), row.l2.end()));
      for (double g : row.gap_median) {
        out << ',';
        put(out, g);
      }
      out << '\n';
    }
    return out.str();
  }
  out << "study,cell,n,m,r_x,nu_x,r_y,nu_y,mu_y,sigma_y,varied,value,component,"
         "method,sims,rejections,estimate,se\n";
  for (const auto& row : rates) {
    const Cell& c = row.cell;
    out << to_string(study) << ',' << c.index << ',' << c.n << ',' << c.m;
    for (double v : {c.x.r, c.x.nu, c.y.r, c.y.nu, c.y.mu, c.y.sigma}) {
      out << ',';
      put(out, v);
    }
    out << ',' << c.varied << ',';
    put(out, c.value);
    out << ',' << c.component << ',' << row.method << ',' << row.sims << ',' << row.rejections
        << ',';
    put(out, row.estimate);
    out << ',';
    put(out, row.se);
    out << '\n';
  }
  return out.str();
}

std::string StudyResult::replicates_csv() const {
  if (convergence.empty()) return {};
  std::ostringstream out;
  out << "cell,replicate,l2,gap_90,gap_95,gap_99\n";
  for (const auto& row : convergence) {
    for (std::size_t s = 0; s < row.l2.size(); ++s) {
      out << row.cell.index << ',' << s << ',';
      put(out, row.l2[s]);
      for (const auto& g : row.gaps) {
        out << ',';
        put(out, g[s]);
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace kdtest
