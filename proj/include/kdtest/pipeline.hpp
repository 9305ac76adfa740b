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

// Background-versus-analysis comparisons over a reconstruction period.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "kdtest/core/ensemble.hpp"
#include "kdtest/core/io.hpp"
#include "kdtest/core/region.hpp"
#include "kdtest/fieldsim.hpp"
#include "kdtest/twosample.hpp"

namespace kdtest {

/// A fixed background ensemble and one analysis ensemble per time step.
struct ReconstructionSeries {
  Ensemble background;
  std::vector<Ensemble> analyses;
  std::vector<double> times;

  /// Grids compatible, times strictly increasing, one analysis per time.
  void validate() const;
};

struct SeriesOptions {
  TestMethod method = TestMethod::kKdAsymptotic;
  std::size_t permutations = 500;
  std::uint64_t seed = 0;
  QiSided qi_sided = QiSided::kLower;
  std::size_t threads = 1;
};

struct SeriesResult {
  std::vector<double> times;
  std::vector<TestResult> results;
  std::vector<double> adjusted;  // Benjamini-Yekutieli across all times

  /// Columns: time, statistic, scaled, p_value, adjusted_p.
  std::string to_csv() const;
};

/// Tests the background against every analysis, optionally restricted to
/// one region of `mask`. Time t of a permutation run draws from substream
/// (seed, t). The background's sorted columns and self-depths are computed
/// once and shared by every time step.
SeriesResult run_series_tests(const ReconstructionSeries& series, const RegionMask* mask,
                              std::optional<int> region, const SeriesOptions& options);

struct TrendFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double p_value = 1.0;  // two-sided t test of zero slope
  std::size_t points = 0;
};

TrendFit ols_trend(std::span<const double> times, std::span<const double> values);

struct EnsembleDiagnostics {
  double mean_sq_diff = 0.0;      // weighted mean of (mean_b - mean_a)^2
  double mean_sq_sd_ratio = 1.0;  // weighted mean of (sd_b / sd_a)^2
};

EnsembleDiagnostics ensemble_diagnostics(const Ensemble& background, const Ensemble& analysis);

struct ProxyRecord {
  std::size_t point = 0;
  double first_time = 0.0;
  std::string type;
};

struct ProxyCatalog {
  std::vector<ProxyRecord> records;
};

/// Nearest grid point to (lat, lon) on a two-dimensional lat-lon grid,
/// with longitude wrapping around the sphere.
std::size_t snap_to_grid(const Grid& grid, double lat, double lon);

/// CSV with header "lat,lon,first_year,type".
ProxyCatalog load_proxy_catalog(const std::filesystem::path& path, const Grid& grid);
void write_proxy_catalog(const ProxyCatalog& catalog, const Grid& grid,
                         const std::filesystem::path& path);

/// One field per time step, stored time-major.
struct FieldSeries {
  GridPtr grid;
  std::vector<double> times;
  std::vector<double> values;
};

/// Ensemble mean of every analysis.
FieldSeries analysis_means(const ReconstructionSeries& series);

struct R2Map {
  GridField field;                   // NaN where undefined
  std::vector<std::uint8_t> excluded;  // zero-variance series
  std::size_t proxies_used = 0;
};

/// Per point, the largest squared correlation over the full time axis with
/// any proxy location available at `at_time`. Zero-variance series are
/// excluded; if every available proxy is flat the map is all NaN.
R2Map max_r2_map(const FieldSeries& fields, const ProxyCatalog& proxies, double at_time);

/// CSV with header "time,path"; relative paths resolve against the
/// manifest's directory.
ReconstructionSeries load_series(const std::filesystem::path& background,
                                 const std::filesystem::path& manifest);

/// Settings of a full pipeline run. JSON keys match the member names;
/// paths are resolved relative to the config file.
struct PipelineConfig {
  std::filesystem::path background;
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> mask;
  std::vector<int> regions;
  std::optional<std::filesystem::path> proxies;
  std::vector<double> r2_times;
  TestMethod method = TestMethod::kKdAsymptotic;
  std::size_t permutations = 500;
  std::uint64_t seed = 0;
  WeightMode weights = WeightMode::kUniform;
  bool override_weights = false;
  std::filesystem::path output_dir = "pipeline_out";
  std::size_t threads = 0;
  nlohmann::json source;
};

PipelineConfig parse_pipeline_config(const nlohmann::json& j,
                                     const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct PipelineOutputs {
  SeriesResult global;
  std::map<int, SeriesResult> regional;
  std::map<std::string, TrendFit> trends;  // "global", "region_<k>"
  std::vector<EnsembleDiagnostics> diagnostics;
  std::vector<std::pair<double, R2Map>> r2_maps;
};

PipelineOutputs run_pipeline(const PipelineConfig& cfg);
/// Writes every table and map into cfg.output_dir; returns the file list.
std::vector<std::filesystem::path> write_pipeline_outputs(const PipelineConfig& cfg,
                                                          const PipelineOutputs& out);

/// Synthetic background/analysis series with a known answer.
///
/// The background and each year's analysis base are independent draws of
/// one Matérn process. Near available proxies the analysis is pulled
/// toward a per-year target field, which shrinks its spread by a factor
/// growing with the number of proxies available that year; proxies appear
/// at a linear rate. Proxies sit in the western part of the domain
/// (region 1); the eastern part (region 2) is never touched, region 3
/// lies between.
struct SyntheticConfig {
  std::size_t nlat = 24;
  std::size_t nlon = 48;
  std::size_t members = 50;
  std::size_t years = 50;
  double first_year = 1000.0;
  std::size_t proxies = 80;
  MaternParams matern{1.0, 0.2, 1.0};
  double influence_radius = 0.12;  // unit-square distance
  double max_shrink = 0.7;
  double saturation = 3.0;  // influence sum giving full shrinkage
  WeightMode weights = WeightMode::kUniform;
  std::uint64_t seed = 0;
};

struct SyntheticSeries {
  ReconstructionSeries series;
  RegionMask mask;
  ProxyCatalog proxies;
  std::vector<std::size_t> proxies_available;  // per year
};

SyntheticSeries make_synthetic_series(const SyntheticConfig& cfg);

/// Writes background, analyses, manifest, mask, proxy catalog and a
/// ready-to-run pipeline config into `dir`; returns the config path.
std::filesystem::path write_synthetic_series(const SyntheticSeries& synthetic,
                                             const std::filesystem::path& dir,
                                             std::uint64_t seed);

}  // namespace kdtest
