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

#include "kdtest/pipeline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "kdtest/core/error.hpp"
#include "kdtest/util/parallel.hpp"
#include "kdtest/util/random.hpp"

namespace kdtest {

namespace fs = std::filesystem;
using nlohmann::json;

void ReconstructionSeries::validate() const {
  if (analyses.size() != times.size()) {
    throw InputError("series: " + std::to_string(analyses.size()) + " analyses for " +
                     std::to_string(times.size()) + " times");
  }
  if (analyses.empty()) throw InputError("series: no analyses");
  for (std::size_t t = 0; t < analyses.size(); ++t) {
    if (!std::isfinite(times[t])) throw InputError("series: non-finite time");
    if (t > 0 && !(times[t] > times[t - 1])) {
      throw InputError("series: times must be strictly increasing");
    }
    validate_pair(background, analyses[t]);
  }
}

std::string SeriesResult::to_csv() const {
  std::ostringstream out;
  out << "time,statistic,scaled,p_value,adjusted_p\n";
  for (std::size_t t = 0; t < times.size(); ++t) {
    out << format_double(times[t]) << ',' << format_double(results[t].statistic) << ','
        << format_double(results[t].scaled) << ',' << format_double(results[t].p_value) << ','
        << format_double(adjusted[t]) << '\n';
  }
  return out.str();
}

SeriesResult run_series_tests(const ReconstructionSeries& series, const RegionMask* mask,
                              std::optional<int> region, const SeriesOptions& options) {
  series.validate();
  if (region && !mask) throw InputError("region " + std::to_string(*region) + " requested without a region mask");
  auto restrict = [&](const Ensemble& e) { return region ? subset_region(e, *mask, *region) : e; };
  const Ensemble background = restrict(series.background);
  const SortedReference rb(background);
  std::vector<double> d_bb;
  if (options.method != TestMethod::kKdPermutation) d_bb = rb.profile(background).values;

  const std::size_t count = series.analyses.size();
  SeriesResult out;
  out.times = series.times;
  out.results.resize(count);
  const std::size_t threads = options.threads == 0 ? default_threads() : options.threads;
  parallel_for(count, threads, [&](std::size_t t) {
    const Ensemble analysis = restrict(series.analyses[t]);
    switch (options.method) {
      case TestMethod::kKdAsymptotic: {
        const SortedReference ra(analysis);
        CrossDepths d;
        d.x_wrt_x = d_bb;
        d.y_wrt_x = rb.profile(analysis).values;
        d.x_wrt_y = ra.profile(background).values;
        d.y_wrt_y = ra.profile(analysis).values;
        out.results[t] = kd_asymptotic_from_depths(d);
        break;
      }
      case TestMethod::kKdPermutation: {
        KdTestOptions opt;
        opt.method = TestMethod::kKdPermutation;
        opt.permutations = options.permutations;
        opt.seed = derive_seed(options.seed, {t});
        out.results[t] = kd_test(background, analysis, opt);
        break;
      }
      case TestMethod::kQiNormal:
        out.results[t] = qi_from_depths(d_bb, rb.profile(analysis).values, options.qi_sided);
        break;
    }
  });
  std::vector<double> p(count);
  for (std::size_t t = 0; t < count; ++t) p[t] = out.results[t].p_value;
  out.adjusted = by_fdr_adjust(p);
  return out;
}

TrendFit ols_trend(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw InputError("trend: times and values differ in length");
  const std::size_t n = times.size();
  if (n < 3) throw InputError("trend: need at least 3 points");
  long double st = 0, sv = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(values[i])) {
      throw InputError("trend: non-finite input");
    }
    st += times[i];
    sv += values[i];
  }
  const long double mt = st / n, mv = sv / n;
  long double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (times[i] - mt) * (times[i] - mt);
    sxy += (times[i] - mt) * (values[i] - mv);
  }
  if (sxx == 0) throw InputError("trend: times are all equal");
  TrendFit fit;
  fit.points = n;
  fit.slope = static_cast<double>(sxy / sxx);
  fit.intercept = static_cast<double>(mv - sxy / sxx * mt);
  long double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double r = values[i] - (fit.intercept + fit.slope * static_cast<long double>(times[i]));
    rss += r * r;
  }
  fit.slope_se = static_cast<double>(std::sqrt(rss / (n - 2) / sxx));
  if (fit.slope_se > 0.0) {
    const boost::math::students_t dist(static_cast<double>(n - 2));
    const double tstat = std::fabs(fit.slope / fit.slope_se);
    fit.p_value = std::max(2.0 * boost::math::cdf(boost::math::complement(dist, tstat)), 1e-300);
  } else {
    fit.p_value = fit.slope == 0.0 ? 1.0 : 1e-300;
  }
  return fit;
}

namespace {

struct Moments {
  std::vector<double> mean, sd;
};

Moments pointwise_moments(const Ensemble& e) {
  const std::size_t g = e.points(), n = e.members();
  Moments m{std::vector<double>(g, 0.0), std::vector<double>(g, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = e.member(i);
    for (std::size_t p = 0; p < g; ++p) m.mean[p] += row[p];
  }
  for (double& v : m.mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = e.member(i);
    for (std::size_t p = 0; p < g; ++p) {
      const double d = row[p] - m.mean[p];
      m.sd[p] += d * d;
    }
  }
  for (double& v : m.sd) v = std::sqrt(v / static_cast<double>(n - 1));
  return m;
}

}  // namespace

EnsembleDiagnostics ensemble_diagnostics(const Ensemble& background, const Ensemble& analysis) {
  validate_pair(background, analysis);
  const Moments b = pointwise_moments(background), a = pointwise_moments(analysis);
  const auto w = background.grid().weights();
  EnsembleDiagnostics d{0.0, 0.0};
  for (std::size_t p = 0; p < w.size(); ++p) {
    if (!(b.sd[p] > 0.0)) throw InputError("diagnostics: zero background sd at point " + std::to_string(p));
    if (!(a.sd[p] > 0.0)) throw InputError("diagnostics: zero analysis sd at point " + std::to_string(p));
    const double dm = b.mean[p] - a.mean[p];
    const double ratio = b.sd[p] / a.sd[p];
    d.mean_sq_diff += w[p] * dm * dm;
    d.mean_sq_sd_ratio += w[p] * ratio * ratio;
  }
  return d;
}

std::size_t snap_to_grid(const Grid& grid, double lat, double lon) {
  if (grid.dimension() != 2) throw InputError("proxy snapping needs a two-dimensional lat-lon grid");
  if (!std::isfinite(lat) || !std::isfinite(lon)) throw InputError("proxy: non-finite location");
  const auto la = grid.axis(0), lo = grid.axis(1);
  std::size_t bi = 0, bj = 0;
  double best = INFINITY;
  for (std::size_t i = 0; i < la.size(); ++i) {
    const double d = std::fabs(la[i] - lat);
    if (d < best) {
      best = d;
      bi = i;
    }
  }
  best = INFINITY;
  for (std::size_t j = 0; j < lo.size(); ++j) {
    double d = std::fmod(std::fabs(lo[j] - lon), 360.0);
    d = std::min(d, 360.0 - d);
    if (d < best) {
      best = d;
      bj = j;
    }
  }
  return bi * lo.size() + bj;
}

ProxyCatalog load_proxy_catalog(const fs::path& path, const Grid& grid) {
  std::istringstream in(read_all(path));
  std::string line;
  if (!std::getline(in, line)) throw InputError("proxy catalog '" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "lat,lon,first_year,type") {
    throw InputError("malformed proxy catalog header in '" + path.string() + "'");
  }
  ProxyCatalog cat;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const std::string where = path.string() + " line " + std::to_string(row);
    if (f.size() != 4) throw InputError(where + ": expected 4 fields");
    ProxyRecord r;
    r.point = snap_to_grid(grid, parse_double(f[0], where), parse_double(f[1], where));
    r.first_time = parse_double(f[2], where);
    r.type = std::string(f[3]);
    cat.records.push_back(std::move(r));
  }
  return cat;
}

void write_proxy_catalog(const ProxyCatalog& catalog, const Grid& grid, const fs::path& path) {
  std::ostringstream out;
  out << "lat,lon,first_year,type\n";
  for (const auto& r : catalog.records) {
    const auto pt = grid.point(r.point);
    out << format_double(pt.at(0)) << ',' << format_double(pt.at(1)) << ','
        << format_double(r.first_time) << ',' << r.type << '\n';
  }
  write_file_atomic(path, out.str());
}

FieldSeries analysis_means(const ReconstructionSeries& series) {
  series.validate();
  FieldSeries f;
  f.grid = series.background.grid_ptr();
  f.times = series.times;
  const std::size_t g = f.grid->size();
  f.values.reserve(series.analyses.size() * g);
  for (const auto& a : series.analyses) {
    std::vector<double> mean(g, 0.0);
    for (std::size_t i = 0; i < a.members(); ++i) {
      const auto row = a.member(i);
      for (std::size_t p = 0; p < g; ++p) mean[p] += row[p];
    }
    for (double v : mean) f.values.push_back(v / static_cast<double>(a.members()));
  }
  return f;
}

R2Map max_r2_map(const FieldSeries& fields, const ProxyCatalog& proxies, double at_time) {
  if (!fields.grid) throw InputError("r2 map: null grid");
  const std::size_t g = fields.grid->size();
  const std::size_t steps = fields.times.size();
  if (steps < 3) throw InputError("r2 map: need at least 3 time steps");
  if (fields.values.size() != steps * g) throw InputError("r2 map: values do not match grid and times");

  // Standardize every point's series; zero variance leaves the point undefined.
  Eigen::MatrixXd z(steps, g);
  std::vector<std::uint8_t> excluded(g, 0);
  for (std::size_t p = 0; p < g; ++p) {
    long double s = 0;
    for (std::size_t t = 0; t < steps; ++t) s += fields.values[t * g + p];
    const double mean = static_cast<double>(s / steps);
    long double ss = 0;
    for (std::size_t t = 0; t < steps; ++t) {
      const double d = fields.values[t * g + p] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(static_cast<double>(ss / steps));
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      excluded[p] = 1;
      z.col(p).setZero();
      continue;
    }
    for (std::size_t t = 0; t < steps; ++t) z(t, p) = (fields.values[t * g + p] - mean) / sd;
  }

  std::vector<std::size_t> used;
  bool any_available = false;
  for (const auto& r : proxies.records) {
    if (r.point >= g) throw InputError("r2 map: proxy location outside the grid");
    if (r.first_time > at_time) continue;
    any_available = true;
    if (!excluded[r.point]) used.push_back(r.point);
  }
  if (!any_available) throw InputError("r2 map: no proxy available at the requested time");
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());

  // One matrix-vector product per proxy, so a point's correlation with a
  // given proxy does not depend on which other proxies are available.
  Eigen::MatrixXd r(g, used.size());
  for (std::size_t k = 0; k < used.size(); ++k) {
    const Eigen::VectorXd zq = z.col(used[k]);
    r.col(k).noalias() = z.transpose() * zq;
  }
  r /= static_cast<double>(steps);

  R2Map out;
  out.field.grid = fields.grid;
  out.field.values.assign(g, std::numeric_limits<double>::quiet_NaN());
  out.excluded = std::move(excluded);
  out.proxies_used = used.size();
  for (std::size_t p = 0; p < g; ++p) {
    if (out.excluded[p] || used.empty()) continue;
    double best = 0.0;
    for (std::size_t k = 0; k < used.size(); ++k) best = std::max(best, r(p, k) * r(p, k));
    out.field.values[p] = std::min(best, 1.0);
  }
  for (std::size_t q : used) out.field.values[q] = 1.0;
  return out;
}

ReconstructionSeries load_series(const fs::path& background, const fs::path& manifest) {
  std::istringstream in(read_all(manifest));
  std::string line;
  if (!std::getline(in, line)) throw InputError("time manifest '" + manifest.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "time,path") {
    throw InputError("malformed time manifest header in '" + manifest.string() + "'");
  }
  const fs::path base = manifest.parent_path();
  ReconstructionSeries s{load_ensemble(background), {}, {}};
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = manifest.string() + " line " + std::to_string(row);
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InputError(where + ": expected time,path");
    s.times.push_back(parse_double(std::string_view(line).substr(0, comma), where));
    fs::path p = line.substr(comma + 1);
    if (p.is_relative()) p = base / p;
    s.analyses.push_back(load_ensemble(p));
  }
  s.validate();
  return s;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path out = p;
  return out.is_relative() ? base / out : out;
}

}  // namespace

PipelineConfig parse_pipeline_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw InputError("pipeline config must be a JSON object");
  static const std::set<std::string> allowed{
      "background", "manifest", "mask",   "regions", "proxies",    "r2_times",
      "method",     "permutations", "seed", "weights", "output_dir", "threads", "comment"};
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw InputError("unknown config key '" + k + "'");
  }
  PipelineConfig c;
  c.source = j;
  try {
    for (const char* key : {"background", "manifest"}) {
      if (!j.contains(key)) throw InputError(std::string("config is missing required key '") + key + "'");
    }
    c.background = resolve(base_dir, j.at("background").get<std::string>());
    c.manifest = resolve(base_dir, j.at("manifest").get<std::string>());
    if (j.contains("mask")) c.mask = resolve(base_dir, j["mask"].get<std::string>());
    if (j.contains("regions")) c.regions = j["regions"].get<std::vector<int>>();
    if (j.contains("proxies")) c.proxies = resolve(base_dir, j["proxies"].get<std::string>());
    if (j.contains("r2_times")) c.r2_times = j["r2_times"].get<std::vector<double>>();
    if (j.contains("method")) c.method = parse_test_method(j["method"].get<std::string>());
    if (j.contains("permutations")) c.permutations = j["permutations"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("weights")) {
      c.weights = parse_weight_mode(j["weights"].get<std::string>());
      c.override_weights = true;
    }
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    if (j.contains("threads")) c.threads = j["threads"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw InputError(std::string("pipeline config: ") + e.what());
  }
  if (!c.regions.empty() && !c.mask) {
    throw InputError("pipeline config requests regions without a region mask");
  }
  if (!c.r2_times.empty() && !c.proxies) {
    throw InputError("pipeline config requests r2 maps without a proxy catalog");
  }
  if (c.method == TestMethod::kKdPermutation && c.permutations < 99) {
    throw InputError("pipeline config: permutations >= 99 required");
  }
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_all(path));
  } catch (const json::exception& e) {
    throw InputError("cannot parse pipeline config '" + path.string() + "': " + e.what());
  }
  return parse_pipeline_config(j, path.parent_path());
}

PipelineOutputs run_pipeline(const PipelineConfig& cfg) {
  ReconstructionSeries series = load_series(cfg.background, cfg.manifest);
  if (cfg.override_weights) {
    const GridPtr g = make_grid(series.background.grid().reweighted(cfg.weights));
    series.background = series.background.with_grid(g);
    for (auto& a : series.analyses) a = a.with_grid(g);
  }
  SeriesOptions opt;
  opt.method = cfg.method;
  opt.permutations = cfg.permutations;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;

  PipelineOutputs out;
  out.global = run_series_tests(series, nullptr, std::nullopt, opt);
  auto stats = [](const SeriesResult& r) {
    std::vector<double> v;
    for (const auto& t : r.results) v.push_back(t.statistic);
    return v;
  };
  out.trends["global"] = ols_trend(series.times, stats(out.global));

  if (cfg.mask) {
    const RegionMask mask = load_region_mask(*cfg.mask, series.background.grid_ptr());
    for (int k : cfg.regions) {
      SeriesOptions ro = opt;
      ro.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(k) + 1});
      out.regional.emplace(k, run_series_tests(series, &mask, k, ro));
      out.trends["region_" + std::to_string(k)] = ols_trend(series.times, stats(out.regional.at(k)));
    }
  }
  for (const auto& a : series.analyses) out.diagnostics.push_back(ensemble_diagnostics(series.background, a));
  if (cfg.proxies) {
    const ProxyCatalog cat = load_proxy_catalog(*cfg.proxies, series.background.grid());
    const FieldSeries means = analysis_means(series);
    for (double t : cfg.r2_times) out.r2_maps.emplace_back(t, max_r2_map(means, cat, t));
  }
  return out;
}

std::vector<fs::path> write_pipeline_outputs(const PipelineConfig& cfg, const PipelineOutputs& out) {
  fs::create_directories(cfg.output_dir);
  std::vector<fs::path> files;
  auto emit = [&](const std::string& name, const std::string& text) {
    const fs::path p = cfg.output_dir / name;
    write_file_atomic(p, text);
    files.push_back(p);
  };
  emit("global.csv", out.global.to_csv());
  for (const auto& [k, r] : out.regional) emit("region_" + std::to_string(k) + ".csv", r.to_csv());

  json trends = json::object();
  for (const auto& [name, t] : out.trends) {
    trends[name] = {{"slope", t.slope}, {"intercept", t.intercept}, {"slope_se", t.slope_se},
                    {"p_value", t.p_value}, {"points", t.points}};
  }
  emit("trend.json", trends.dump(2) + "\n");

  std::ostringstream diag;
  diag << "time,mean_sq_diff,mean_sq_sd_ratio\n";
  for (std::size_t t = 0; t < out.diagnostics.size(); ++t) {
    diag << format_double(out.global.times[t]) << ',' << format_double(out.diagnostics[t].mean_sq_diff)
         << ',' << format_double(out.diagnostics[t].mean_sq_sd_ratio) << '\n';
  }
  emit("diagnostics.csv", diag.str());

  for (const auto& [t, map] : out.r2_maps) {
    const fs::path p = cfg.output_dir / ("r2_" + format_double(t) + ".dfe");
    write_field(map.field, p);
    files.push_back(p);
  }
  return files;
}

}  // namespace kdtest
