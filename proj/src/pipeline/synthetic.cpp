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
#include <cmath>
#include <random>
#include <sstream>

#include "kdtest/core/error.hpp"
#include "kdtest/pipeline.hpp"
#include "kdtest/util/random.hpp"

namespace kdtest {

namespace fs = std::filesystem;

namespace {

// Proxies live at unit longitude below this; shrinkage never reaches past
// kProxyEdge + influence radius.
constexpr double kProxyEdge = 0.33;
constexpr double kRegion1Edge = 0.45;
constexpr double kRegion2Edge = 0.65;

// Compactly supported Wendland function on [0, 1].
double wendland(double x) {
  if (x >= 1.0) return 0.0;
  const double a = 1.0 - x;
  return a * a * a * a * (4.0 * x + 1.0);
}

}  // namespace

SyntheticSeries make_synthetic_series(const SyntheticConfig& cfg) {
  if (cfg.nlat < 2 || cfg.nlon < 2) throw InputError("synthetic: grid needs at least 2x2 points");
  if (cfg.members < 2) throw InputError("synthetic: members must be >= 2");
  if (cfg.years < 3) throw InputError("synthetic: years must be >= 3");
  if (!(cfg.influence_radius > 0.0) || cfg.influence_radius > kRegion1Edge - kProxyEdge + 1e-12) {
    throw InputError("synthetic: influence radius must lie in (0, 0.12]");
  }
  if (!(cfg.max_shrink >= 0.0 && cfg.max_shrink < 1.0)) {
    throw InputError("synthetic: max_shrink must lie in [0, 1)");
  }
  if (!(cfg.saturation > 0.0)) throw InputError("synthetic: saturation must be > 0");
  cfg.matern.validate();

  const GridPtr unit = make_grid(Grid::unit_square(cfg.nlat, cfg.nlon));
  const GridPtr geo = make_grid(Grid::lat_lon(cfg.nlat, cfg.nlon, cfg.weights));
  const std::size_t g = unit->size();

  // Proxy k becomes available at year index floor(k * years / proxies).
  Rng rng = make_rng(cfg.seed, {3});
  std::uniform_real_distribution<double> u_lat(0.05, 0.95), u_lon(0.02, kProxyEdge);
  ProxyCatalog catalog;
  std::vector<std::size_t> first_index;
  for (std::size_t k = 0; k < cfg.proxies; ++k) {
    const double a = u_lat(rng), b = u_lon(rng);
    const auto i = static_cast<std::size_t>(std::lround(a * static_cast<double>(cfg.nlat - 1)));
    const auto j = static_cast<std::size_t>(std::lround(b * static_cast<double>(cfg.nlon - 1)));
    const std::size_t year = k * cfg.years / std::max<std::size_t>(cfg.proxies, 1);
    first_index.push_back(year);
    catalog.records.push_back({i * cfg.nlon + j, cfg.first_year + static_cast<double>(year),
                               k % 2 ? "coral" : "tree"});
  }

  std::vector<std::vector<double>> pts(g);
  for (std::size_t p = 0; p < g; ++p) pts[p] = unit->point(p);

  std::vector<std::int32_t> ids(g);
  for (std::size_t p = 0; p < g; ++p) {
    const double lon = pts[p][1];
    ids[p] = lon < kRegion1Edge ? 1 : (lon >= kRegion2Edge ? 2 : 3);
  }

  auto draw = [&](std::uint64_t seed, std::size_t count) {
    return sample_fields(FieldSpec::stationary(unit, cfg.matern, 0.0, seed), count);
  };

  SyntheticSeries out{
      ReconstructionSeries{draw(derive_seed(cfg.seed, {0}), cfg.members).with_grid(geo), {}, {}},
      RegionMask(geo, ids), catalog, {}};

  std::vector<double> influence(g, 0.0);
  std::size_t available = 0;
  for (std::size_t t = 0; t < cfg.years; ++t) {
    while (available < cfg.proxies && first_index[available] <= t) {
      const auto& q = pts[catalog.records[available].point];
      for (std::size_t p = 0; p < g; ++p) {
        const double d = std::hypot(pts[p][0] - q[0], pts[p][1] - q[1]);
        influence[p] += wendland(d / cfg.influence_radius);
      }
      ++available;
    }
    out.proxies_available.push_back(available);

    const Ensemble base = draw(derive_seed(cfg.seed, {1, t}), cfg.members);
    const Ensemble target = draw(derive_seed(cfg.seed, {2, t}), 2);
    const auto tf = target.member(0);
    std::vector<double> values(base.values().begin(), base.values().end());
    for (std::size_t p = 0; p < g; ++p) {
      const double lambda = cfg.max_shrink * std::min(1.0, influence[p] / cfg.saturation);
      if (lambda == 0.0) continue;
      for (std::size_t i = 0; i < cfg.members; ++i) {
        double& v = values[i * g + p];
        v = (1.0 - lambda) * v + lambda * tf[p];
      }
    }
    out.series.analyses.emplace_back(geo, std::move(values));
    out.series.times.push_back(cfg.first_year + static_cast<double>(t));
  }
  return out;
}

fs::path write_synthetic_series(const SyntheticSeries& s, const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  write_ensemble(s.series.background, dir / "background.dfe", FileFormat::kBinary);
  std::ostringstream manifest;
  manifest << "time,path\n";
  for (std::size_t t = 0; t < s.series.times.size(); ++t) {
    const std::string name = "analysis_" + format_double(s.series.times[t]) + ".dfe";
    write_ensemble(s.series.analyses[t], dir / name, FileFormat::kBinary);
    manifest << format_double(s.series.times[t]) << ',' << name << '\n';
  }
  write_file_atomic(dir / "times.csv", manifest.str());
  write_region_mask(s.mask, dir / "mask.csv");
  write_proxy_catalog(s.proxies, s.series.background.grid(), dir / "proxies.csv");

  nlohmann::json cfg = {{"background", "background.dfe"},
                        {"manifest", "times.csv"},
                        {"mask", "mask.csv"},
                        {"regions", {1, 2, 3}},
                        {"proxies", "proxies.csv"},
                        {"r2_times", {s.series.times.back()}},
                        {"method", "asymptotic"},
                        {"seed", seed},
                        {"output_dir", "out"}};
  const fs::path path = dir / "pipeline.json";
  write_file_atomic(path, cfg.dump(2) + "\n");
  return path;
}

}  // namespace kdtest
