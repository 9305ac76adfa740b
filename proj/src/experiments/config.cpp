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
#include <set>

#include "kdtest/core/error.hpp"
#include "kdtest/core/io.hpp"
#include "kdtest/experiments.hpp"

#ifndef KDTEST_COMMIT
#define KDTEST_COMMIT "unknown"
#endif

namespace kdtest {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw InputError("config key '" + key + "': " + what);
}

const json& need(const json& j, const std::string& key) {
  if (!j.contains(key)) throw InputError("config is missing required key '" + key + "'");
  return j.at(key);
}

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "expected a number");
  return v.get<double>();
}

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    bad(key, "expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

template <class F>
auto as_list(const json& v, const std::string& key, F item) {
  if (!v.is_array()) bad(key, "expected a list");
  if (v.empty()) bad(key, "list must not be empty");
  std::vector<decltype(item(v[0], key))> out;
  for (const auto& e : v) out.push_back(item(e, key));
  return out;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw InputError("unknown config key '" + where + k + "'");
  }
}

template <class Fn>
auto with_key(const std::string& key, Fn fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    if (std::string_view(e.what()).find("config key") != std::string_view::npos) throw;
    bad(key, e.what());
  }
}

}  // namespace

std::string_view to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::kSize: return "size";
    case StudyKind::kPowerHomogeneous: return "power_homogeneous";
    case StudyKind::kPowerHeterogeneous: return "power_heterogeneous";
    case StudyKind::kConvergence: return "convergence";
  }
  return "size";
}

StudyKind parse_study_kind(std::string_view text) {
  for (auto k : {StudyKind::kSize, StudyKind::kPowerHomogeneous,
                 StudyKind::kPowerHeterogeneous, StudyKind::kConvergence}) {
    if (to_string(k) == text) return k;
  }
  throw InputError("unknown study '" + std::string(text) + "'");
}

StudyConfig parse_study_config(const json& j) {
  if (!j.is_object()) throw InputError("study config must be a JSON object");
  check_keys(j,
             {"study", "seed", "grid", "family", "df", "sims_per_cell", "alpha", "methods",
              "kd_method", "permutations", "qi_sided", "threads", "r", "nu", "n", "m",
              "pairs", "replicates", "baseline", "vary", "kappa", "components", "comment"},
             "");
  StudyConfig c;
  c.source = j;
  c.study = with_key("study", [&] { return parse_study_kind(as_string(need(j, "study"), "study")); });
  c.seed = as_count(need(j, "seed"), "seed");

  if (j.contains("grid")) c.grid = as_list(j["grid"], "grid", as_count);
  if (j.contains("family")) {
    c.family = with_key("family", [&] { return parse_family(as_string(j["family"], "family")); });
  }
  if (j.contains("df")) c.df = as_number(j["df"], "df");
  if (j.contains("sims_per_cell")) c.sims_per_cell = as_count(j["sims_per_cell"], "sims_per_cell");
  if (j.contains("alpha")) c.alpha = as_number(j["alpha"], "alpha");
  if (j.contains("methods")) {
    const auto methods = as_list(j["methods"], "methods", as_string);
    c.run_kd = c.run_qi = false;
    for (const auto& m : methods) {
      if (m == "kd") {
        c.run_kd = true;
      } else if (m == "qi") {
        c.run_qi = true;
      } else {
        bad("methods", "unknown method '" + m + "'");
      }
    }
  }
  if (j.contains("kd_method")) {
    c.kd_method = with_key("kd_method", [&] {
      return parse_test_method(as_string(j["kd_method"], "kd_method"));
    });
    if (c.kd_method == TestMethod::kQiNormal) bad("kd_method", "must be asymptotic or permutation");
  }
  if (j.contains("permutations")) c.permutations = as_count(j["permutations"], "permutations");
  if (j.contains("qi_sided")) {
    c.qi_sided = with_key("qi_sided", [&] { return parse_qi_sided(as_string(j["qi_sided"], "qi_sided")); });
  }
  if (j.contains("threads")) c.threads = as_count(j["threads"], "threads");

  if (j.contains("r")) c.r_values = as_list(j["r"], "r", as_number);
  if (j.contains("nu")) c.nu_values = as_list(j["nu"], "nu", as_number);
  if (j.contains("pairs")) {
    if (j.contains("n") || j.contains("m")) bad("pairs", "give either pairs or n/m lists");
    c.sizes.clear();
    for (const auto& p : as_list(j["pairs"], "pairs", [](const json& v, const std::string& k) {
           if (!v.is_array() || v.size() != 2) bad(k, "each entry must be [n, m]");
           return std::array<std::size_t, 2>{as_count(v[0], k), as_count(v[1], k)};
         })) {
      c.sizes.push_back(p);
    }
  } else if (j.contains("n") || j.contains("m")) {
    const auto ns = as_list(need(j, "n"), "n", as_count);
    const auto ms = j.contains("m") ? as_list(j["m"], "m", as_count) : ns;
    c.sizes.clear();
    if (!j.contains("m")) {
      for (auto n : ns) c.sizes.push_back({n, n});
    } else {
      for (auto n : ns) {
        for (auto m : ms) c.sizes.push_back({n, m});
      }
    }
  }
  if (j.contains("replicates")) c.replicates = as_count(j["replicates"], "replicates");

  if (j.contains("baseline")) {
    const auto& b = j["baseline"];
    if (!b.is_object()) bad("baseline", "expected an object");
    check_keys(b, {"r", "nu", "mu", "sigma", "n", "m"}, "baseline.");
    if (b.contains("r")) c.baseline.r = as_number(b["r"], "baseline.r");
    if (b.contains("nu")) c.baseline.nu = as_number(b["nu"], "baseline.nu");
    if (b.contains("mu")) c.baseline.mu = as_number(b["mu"], "baseline.mu");
    if (b.contains("sigma")) c.baseline.sigma = as_number(b["sigma"], "baseline.sigma");
    if (b.contains("n")) c.baseline_n = as_count(b["n"], "baseline.n");
    if (b.contains("m")) c.baseline_m = as_count(b["m"], "baseline.m");
  }
  if (j.contains("vary")) {
    const auto& v = j["vary"];
    if (!v.is_object()) bad("vary", "expected an object");
    check_keys(v, {"mu", "sigma", "r", "nu"}, "vary.");
    if (v.contains("mu")) c.vary_mu = as_list(v["mu"], "vary.mu", as_number);
    if (v.contains("sigma")) c.vary_sigma = as_list(v["sigma"], "vary.sigma", as_number);
    if (v.contains("r")) c.vary_r = as_list(v["r"], "vary.r", as_number);
    if (v.contains("nu")) c.vary_nu = as_list(v["nu"], "vary.nu", as_number);
  }
  if (j.contains("kappa")) c.kappas = as_list(j["kappa"], "kappa", as_number);
  if (j.contains("components")) c.components = as_list(j["components"], "components", as_string);

  c.validate();
  return c;
}

StudyConfig load_study_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_all(path));
  } catch (const json::exception& e) {
    throw InputError("cannot parse study config '" + path + "': " + e.what());
  }
  return parse_study_config(j);
}

void StudyConfig::validate() const {
  if (grid.empty() || grid.size() > 3) bad("grid", "expected 1 to 3 axis sizes");
  for (auto d : grid) {
    if (d < 1) bad("grid", "axis sizes must be positive");
  }
  if (family == Family::kStudentT && !(df > 2.0)) bad("df", "must be > 2");
  if (study != StudyKind::kConvergence && sims_per_cell < 100) bad("sims_per_cell", "must be >= 100");
  if (!(alpha > 0.0 && alpha < 1.0)) bad("alpha", "must lie in (0, 1)");
  if (!run_kd && !run_qi) bad("methods", "must name at least one method");
  if (kd_method == TestMethod::kKdPermutation && permutations < 99) {
    bad("permutations", "permutations >= 99 required");
  }
  for (double r : r_values) {
    if (!(r > 0.0)) bad("r", "ranges must be > 0");
  }
  for (double nu : nu_values) {
    if (!(nu > 0.0)) bad("nu", "smoothness values must be > 0");
  }
  for (const auto& s : sizes) {
    if (s[0] < 2 || s[1] < 2) bad("n", "sample sizes must be >= 2");
  }
  switch (study) {
    case StudyKind::kConvergence:
      if (permutations < 500) bad("permutations", "convergence needs >= 500");
      if (replicates < 10) bad("replicates", "must be >= 10");
      if (!run_kd) bad("methods", "convergence studies the KD statistic");
      break;
    case StudyKind::kPowerHomogeneous:
      if (vary_mu.empty() && vary_sigma.empty() && vary_r.empty() && vary_nu.empty()) {
        bad("vary", "name at least one parameter sweep");
      }
      for (double s : vary_sigma) {
        if (!(s > 0.0)) bad("vary.sigma", "multipliers must be > 0");
      }
      for (double r : vary_r) {
        if (!(r > 0.0)) bad("vary.r", "ranges must be > 0");
      }
      for (double nu : vary_nu) {
        if (!(nu > 0.0)) bad("vary.nu", "smoothness values must be > 0");
      }
      break;
    case StudyKind::kPowerHeterogeneous:
      if (kappas.empty()) bad("kappa", "required for heterogeneous power");
      for (double k : kappas) {
        if (!(k >= 0.0 && k <= 1.0)) bad("kappa", "values must lie in [0, 1]");
      }
      if (grid.size() != 2) bad("grid", "heterogeneous power needs a two-dimensional grid");
      for (const auto& comp : components) {
        if (comp != "mean" && comp != "sd" && comp != "both") {
          bad("components", "unknown component '" + comp + "'");
        }
      }
      break;
    case StudyKind::kSize:
      break;
  }
  if (study == StudyKind::kPowerHomogeneous || study == StudyKind::kPowerHeterogeneous) {
    if (!(baseline.r > 0.0) || !(baseline.nu > 0.0) || !(baseline.sigma > 0.0)) {
      bad("baseline", "r, nu and sigma must be > 0");
    }
    if (baseline_n < 2 || baseline_m < 2) bad("baseline", "n and m must be >= 2");
  }
}

std::vector<Cell> study_cells(const StudyConfig& cfg) {
  std::vector<Cell> cells;
  auto push = [&](Cell c) {
    c.index = cells.size();
    cells.push_back(std::move(c));
  };
  switch (cfg.study) {
    case StudyKind::kSize:
    case StudyKind::kConvergence:
      for (double r : cfg.r_values) {
        for (double nu : cfg.nu_values) {
          for (const auto& s : cfg.sizes) {
            Cell c;
            c.n = s[0];
            c.m = s[1];
            c.x = ProcessParams{r, nu, 0.0, 1.0};
            c.y = c.x;
            c.varied = "none";
            push(c);
          }
        }
      }
      break;
    case StudyKind::kPowerHomogeneous: {
      auto sweep = [&](const std::vector<double>& values, const char* name, auto apply) {
        for (double v : values) {
          Cell c;
          c.n = cfg.baseline_n;
          c.m = cfg.baseline_m;
          c.x = cfg.baseline;
          c.y = cfg.baseline;
          apply(c.y, v);
          c.varied = name;
          c.value = v;
          push(c);
        }
      };
      sweep(cfg.vary_mu, "mu", [&](ProcessParams& p, double v) { p.mu = cfg.baseline.mu + v; });
      sweep(cfg.vary_sigma, "sigma",
            [&](ProcessParams& p, double v) { p.sigma = cfg.baseline.sigma * v; });
      sweep(cfg.vary_r, "r", [](ProcessParams& p, double v) { p.r = v; });
      sweep(cfg.vary_nu, "nu", [](ProcessParams& p, double v) { p.nu = v; });
      break;
    }
    case StudyKind::kPowerHeterogeneous:
      for (const auto& comp : cfg.components) {
        for (double k : cfg.kappas) {
          Cell c;
          c.n = cfg.baseline_n;
          c.m = cfg.baseline_m;
          c.x = cfg.baseline;
          c.y = cfg.baseline;
          c.varied = "kappa";
          c.value = k;
          c.kappa = k;
          c.component = comp;
          push(c);
        }
      }
      break;
  }
  return cells;
}

std::string commit_id() { return KDTEST_COMMIT; }

json study_manifest(const StudyConfig& cfg, const StudyResult& result) {
  json m;
  m["study"] = std::string(to_string(cfg.study));
  m["config"] = cfg.source;
  m["seed"] = cfg.seed;
  m["wall_seconds"] = result.wall_seconds;
  m["commit"] = commit_id();
  m["cells"] = cfg.study == StudyKind::kConvergence ? result.convergence.size()
                                                    : study_cells(cfg).size();
  m["rows"] = cfg.study == StudyKind::kConvergence ? result.convergence.size()
                                                   : result.rates.size();
  return m;
}

}  // namespace kdtest
