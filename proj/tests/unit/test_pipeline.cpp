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
#include <filesystem>
#include <random>

#include "kdtest/core/error.hpp"
#include "kdtest/pipeline.hpp"

using namespace kdtest;
namespace fs = std::filesystem;

namespace {

Ensemble normal_ensemble(const GridPtr& g, std::size_t members, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> v(members * g->size());
  for (double& x : v) x = normal(rng);
  return Ensemble(g, std::move(v));
}

Ensemble transform(const Ensemble& e, double scale, double shift) {
  // Scale each member about the pointwise mean, then shift.
  std::vector<double> v(e.values().begin(), e.values().end());
  for (std::size_t p = 0; p < e.points(); ++p) {
    double m = 0;
    for (std::size_t i = 0; i < e.members(); ++i) m += v[i * e.points() + p];
    m /= e.members();
    for (std::size_t i = 0; i < e.members(); ++i) {
      double& x = v[i * e.points() + p];
      x = m + scale * (x - m) + shift;
    }
  }
  return Ensemble(e.grid_ptr(), v);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("kdtest_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("OLS trend") {
  const std::vector<double> t{0, 1, 2, 3, 4};
  TrendFit f = ols_trend(t, t);
  CHECK(f.slope == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::fabs(f.intercept) < 1e-14);
  CHECK(f.slope_se == doctest::Approx(0.0).epsilon(1e-12));

  f = ols_trend(t, std::vector<double>(5, 3.5));
  CHECK(f.slope == 0.0);
  CHECK(f.intercept == doctest::Approx(3.5));

  const std::vector<double> t3{0, 1, 2};
  f = ols_trend(t3, std::vector<double>{3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(f.intercept == doctest::Approx(3.0).epsilon(1e-14));

  // Hand-computed: y = {1, 3, 2, 5}, x = {0..3}. Sxx = 5, Sxy = 5.5,
  // slope 1.1, residuals (-0.1, 0.8, -1.3, 0.6), RSS = 2.7, SE = sqrt(2.7/2/5).
  const std::vector<double> x4{0, 1, 2, 3}, y4{1, 3, 2, 5};
  f = ols_trend(x4, y4);
  CHECK(f.slope == doctest::Approx(1.1).epsilon(1e-14));
  CHECK(f.intercept == doctest::Approx(2.75 - 1.1 * 1.5).epsilon(1e-14));
  CHECK(f.slope_se == doctest::Approx(std::sqrt(2.7 / 2.0 / 5.0)).epsilon(1e-12));
  CHECK(f.points == 4);
  CHECK(f.p_value > 0.05);
  CHECK(f.p_value < 0.2);

  CHECK_THROWS_AS(ols_trend(t3, std::vector<double>{1, 2}), InputError);
  CHECK_THROWS_AS(ols_trend(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InputError);
  CHECK_THROWS_AS(ols_trend(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
                  InputError);
}

TEST_CASE("ensemble diagnostics") {
  const GridPtr g = make_grid(Grid::lat_lon(4, 6, WeightMode::kCosLat));
  const Ensemble b = normal_ensemble(g, 20, 1);
  EnsembleDiagnostics d = ensemble_diagnostics(b, b);
  CHECK(d.mean_sq_diff == 0.0);
  CHECK(d.mean_sq_sd_ratio == doctest::Approx(1.0).epsilon(1e-14));

  d = ensemble_diagnostics(b, transform(b, 1.0, 0.7));
  CHECK(d.mean_sq_diff == doctest::Approx(0.49).epsilon(1e-12));
  CHECK(d.mean_sq_sd_ratio == doctest::Approx(1.0).epsilon(1e-12));

  d = ensemble_diagnostics(b, transform(b, 0.5, 0.0));
  CHECK(d.mean_sq_diff < 1e-28);
  CHECK(d.mean_sq_sd_ratio == doctest::Approx(4.0).epsilon(1e-12));

  std::vector<double> flat(20 * g->size(), 1.0);
  CHECK_THROWS(ensemble_diagnostics(Ensemble(g, flat), b));
  CHECK_THROWS(ensemble_diagnostics(b, Ensemble(g, flat)));
}

TEST_CASE("series tests") {
  const GridPtr g = make_grid(Grid::lat_lon(5, 8));
  ReconstructionSeries s{normal_ensemble(g, 25, 2), {}, {}};
  for (int t = 0; t < 6; ++t) {
    s.analyses.push_back(s.background);
    s.times.push_back(1000 + t);
  }

  SUBCASE("identical analyses") {
    for (TestMethod m : {TestMethod::kKdAsymptotic, TestMethod::kKdPermutation}) {
      SeriesOptions opt;
      opt.method = m;
      opt.permutations = 99;
      const SeriesResult r = run_series_tests(s, nullptr, std::nullopt, opt);
      REQUIRE(r.results.size() == 6);
      for (std::size_t t = 0; t < 6; ++t) {
        CHECK(r.results[t].statistic == 0.0);
        CHECK(r.results[t].p_value == 1.0);
        CHECK(r.adjusted[t] == 1.0);
      }
      CHECK(r.to_csv().rfind("time,statistic,scaled,p_value,adjusted_p\n", 0) == 0);
    }
  }
  SUBCASE("shifted analyses") {
    for (int t = 0; t < 6; ++t) {
      s.analyses[t] = transform(normal_ensemble(g, 20, 10 + t), 1.0, 0.15 * t);
    }
    SeriesOptions opt;
    const SeriesResult global = run_series_tests(s, nullptr, std::nullopt, opt);
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(global.adjusted[t] >= global.results[t].p_value);
      const TestResult direct = kd_test(s.background, s.analyses[t]);
      CHECK(global.results[t].statistic == direct.statistic);
      CHECK(global.results[t].p_value == direct.p_value);
    }
    CHECK(global.results[5].p_value < 0.01);

    // An all-points region reproduces the unmasked run.
    const RegionMask all(g, std::vector<std::int32_t>(g->size(), 1));
    const SeriesResult same = run_series_tests(s, &all, 1, opt);
    CHECK(same.to_csv() == global.to_csv());

    // A proper region matches subsetting by hand.
    std::vector<std::int32_t> ids(g->size(), 2);
    for (std::size_t p = 0; p < ids.size(); p += 3) ids[p] = 1;
    const RegionMask mask(g, ids);
    const SeriesResult reg = run_series_tests(s, &mask, 2, opt);
    for (std::size_t t = 0; t < 6; ++t) {
      const TestResult direct =
          kd_test(subset_region(s.background, mask, 2), subset_region(s.analyses[t], mask, 2));
      CHECK(reg.results[t].statistic == direct.statistic);
    }

    opt.method = TestMethod::kKdPermutation;
    opt.permutations = 99;
    opt.seed = 4;
    opt.threads = 1;
    const SeriesResult p1 = run_series_tests(s, nullptr, std::nullopt, opt);
    opt.threads = 3;
    CHECK(run_series_tests(s, nullptr, std::nullopt, opt).to_csv() == p1.to_csv());

    CHECK_THROWS_AS(run_series_tests(s, nullptr, 1, opt), InputError);
  }
  SUBCASE("invalid series") {
    s.times[3] = s.times[2];
    CHECK_THROWS_AS(run_series_tests(s, nullptr, std::nullopt, {}), InputError);
    s.times[3] = 1003;
    s.analyses[2] = normal_ensemble(make_grid(Grid::lat_lon(5, 7)), 25, 1);
    CHECK_THROWS_AS(run_series_tests(s, nullptr, std::nullopt, {}), InputError);
  }
}

TEST_CASE("max r2 map") {
  const GridPtr g = make_grid(Grid::lat_lon(6, 10));
  const std::size_t steps = 200, pts = g->size();
  FieldSeries f{g, {}, std::vector<double>(steps * pts)};
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (std::size_t t = 0; t < steps; ++t) {
    f.times.push_back(static_cast<double>(t));
    for (std::size_t p = 0; p < pts; ++p) f.values[t * pts + p] = normal(rng);
    f.values[t * pts + 7] = -2.0 * f.values[t * pts + 3];
  }
  ProxyCatalog cat;
  cat.records.push_back({3, 0.0, "tree"});
  cat.records.push_back({20, 150.0, "coral"});

  const R2Map early = max_r2_map(f, cat, 10.0);
  CHECK(early.proxies_used == 1);
  CHECK(early.field.values[3] == 1.0);
  CHECK(early.field.values[7] == doctest::Approx(1.0).epsilon(1e-12));
  std::size_t small = 0, total = 0;
  for (std::size_t p = 0; p < pts; ++p) {
    const double v = early.field.values[p];
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (p != 3 && p != 7) {
      ++total;
      small += v < 0.1;
    }
  }
  CHECK(small >= 0.95 * total);

  const R2Map late = max_r2_map(f, cat, 199.0);
  CHECK(late.proxies_used == 2);
  CHECK(late.field.values[20] == 1.0);
  for (std::size_t p = 0; p < pts; ++p) CHECK(late.field.values[p] >= early.field.values[p]);

  SUBCASE("zero variance") {
    for (std::size_t t = 0; t < steps; ++t) f.values[t * pts + 11] = 4.0;
    const R2Map m = max_r2_map(f, cat, 10.0);
    CHECK(m.excluded[11] == 1);
    CHECK(std::isnan(m.field.values[11]));
    // With every available proxy flat the whole map is undefined.
    for (std::size_t t = 0; t < steps; ++t) f.values[t * pts + 3] = 1.0;
    const R2Map none = max_r2_map(f, cat, 10.0);
    CHECK(none.proxies_used == 0);
    CHECK(none.excluded[3] == 1);
    for (double v : none.field.values) CHECK(std::isnan(v));
  }
  CHECK_THROWS_AS(max_r2_map(f, cat, -5.0), InputError);
  FieldSeries shortf{g, {0, 1}, std::vector<double>(2 * pts, 0.0)};
  CHECK_THROWS_AS(max_r2_map(shortf, cat, 1.0), InputError);
}

TEST_CASE("proxy catalog") {
  const Grid g = Grid::lat_lon(6, 12);
  CHECK(snap_to_grid(g, g.axis(0)[2], g.axis(1)[5]) == 2 * 12 + 5);
  // Longitude wraps across the seam.
  CHECK(snap_to_grid(g, g.axis(0)[0], g.axis(1)[0] + 360.0) == 0);
  CHECK(snap_to_grid(g, g.axis(0)[0], g.axis(1)[11] - 360.0) == 11);

  const fs::path dir = scratch("proxies");
  ProxyCatalog cat;
  cat.records.push_back({14, 900.0, "tree"});
  cat.records.push_back({70, 1200.5, "coral"});
  write_proxy_catalog(cat, g, dir / "p.csv");
  const ProxyCatalog back = load_proxy_catalog(dir / "p.csv", g);
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[1].point == 70);
  CHECK(back.records[1].first_time == 1200.5);
  CHECK(back.records[0].type == "tree");
  fs::remove_all(dir);
}

TEST_CASE("synthetic reconstruction end to end") {
  SyntheticConfig cfg;
  cfg.nlat = 12;
  cfg.nlon = 24;
  cfg.members = 40;
  cfg.years = 30;
  cfg.seed = 21;
  const SyntheticSeries syn = make_synthetic_series(cfg);
  CHECK(syn.series.analyses.size() == 30);
  CHECK(syn.proxies_available.front() <= syn.proxies_available.back());
  CHECK(syn.mask.regions() == std::set<std::int32_t>{1, 2, 3});

  // Same seed, same data.
  const SyntheticSeries again = make_synthetic_series(cfg);
  CHECK(again.series.analyses[7].values()[5] == syn.series.analyses[7].values()[5]);

  const fs::path dir = scratch("synthetic");
  const fs::path cfg_path = write_synthetic_series(syn, dir, 3);
  PipelineConfig pc = load_pipeline_config(cfg_path);
  pc.threads = 1;
  const PipelineOutputs out = run_pipeline(pc);
  CHECK(out.global.results.size() == 30);
  CHECK(out.trends.at("global").slope > 0.0);
  CHECK(out.trends.at("global").p_value < 0.01);
  std::size_t quiet = 0;
  for (double a : out.regional.at(2).adjusted) quiet += a > 0.05;
  CHECK(quiet >= 27);
  CHECK(out.diagnostics.size() == 30);
  REQUIRE(out.r2_maps.size() == 1);

  const auto files = write_pipeline_outputs(pc, out);
  for (const auto& f : files) CHECK(fs::exists(f));
  CHECK(fs::exists(pc.output_dir / "global.csv"));
  CHECK(fs::exists(pc.output_dir / "trend.json"));
  fs::remove_all(dir);
}

TEST_CASE("pipeline config errors") {
  const fs::path base = "/tmp";
  const nlohmann::json ok{{"background", "b.dfe"}, {"manifest", "t.csv"}};
  CHECK(parse_pipeline_config(ok, base).background == base / "b.dfe");
  nlohmann::json j = ok;
  j["regions"] = {1};
  CHECK_THROWS_AS(parse_pipeline_config(j, base), InputError);
  j = ok;
  j["r2_times"] = {1000};
  CHECK_THROWS_AS(parse_pipeline_config(j, base), InputError);
  j = ok;
  j["method"] = "permutation";
  j["permutations"] = 98;
  CHECK_THROWS_AS(parse_pipeline_config(j, base), InputError);
  j = ok;
  j["bogus"] = true;
  CHECK_THROWS_AS(parse_pipeline_config(j, base), InputError);
  j = ok;
  j.erase("manifest");
  CHECK_THROWS_AS(parse_pipeline_config(j, base), InputError);
}
