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

#include "cli/commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kdtest/core/error.hpp"
#include "kdtest/core/io.hpp"
#include "kdtest/experiments.hpp"
#include "kdtest/fieldsim.hpp"
#include "kdtest/pipeline.hpp"
#include "kdtest/twosample.hpp"
#include "kdtest/util/parallel.hpp"

namespace kdtest::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

// Run record written next to the outputs, on success and on failure.
class Manifest {
 public:
  Manifest(std::string subcommand) {
    m_["subcommand"] = std::move(subcommand);
    m_["version"] = kVersion;
    m_["commit"] = commit_id();
    m_["start"] = utc_now();
    m_["outputs"] = json::array();
  }
  json& operator[](const char* key) { return m_[key]; }
  void add_output(const fs::path& p) { m_["outputs"].push_back(p.string()); }
  void set_path(fs::path p) { path_ = std::move(p); }
  const std::optional<fs::path>& path() const { return path_; }

  void write(const std::string& error = {}) {
    if (!path_) return;
    m_["end"] = utc_now();
    if (!error.empty()) m_["error"] = error;
    if (path_->has_parent_path()) fs::create_directories(path_->parent_path());
    write_file_atomic(*path_, m_.dump(2) + "\n");
  }

 private:
  json m_;
  std::optional<fs::path> path_;
};

std::size_t resolve_threads(std::size_t requested) {
  return requested == 0 ? default_threads() : requested;
}

Ensemble reweight(const Ensemble& e, WeightMode mode) {
  return e.with_grid(make_grid(e.grid().reweighted(mode)));
}

json result_json(const TestResult& r) {
  json j = {{"statistic", r.statistic}, {"scaled", r.scaled}, {"p_value", r.p_value},
            {"method", std::string(to_string(r.method))}, {"n", r.n}, {"m", r.m}};
  if (r.permutations) j["permutations"] = *r.permutations;
  return j;
}

// Runs `body`, mapping exceptions to exit codes and recording failures in
// the manifest when its location is already known.
int guarded(Manifest& manifest, std::ostream& err, const std::function<void()>& body) {
  auto fail = [&](const std::string& msg, int code) {
    err << "error: " << msg << "\n";
    try {
      manifest.write(msg);
    } catch (const std::exception& e) {
      err << "error: cannot write manifest: " << e.what() << "\n";
    }
    return code;
  };
  try {
    body();
    manifest.write();
    return 0;
  } catch (const InputError& e) {
    return fail(e.what(), 2);
  } catch (const json::exception& e) {
    return fail(e.what(), 2);
  } catch (const std::exception& e) {
    return fail(e.what(), 1);
  }
}

struct TestArgs {
  std::string x_path, y_path;
  std::string method = "asymptotic";
  std::size_t permutations = 500;
  std::uint64_t seed = 0;
  std::string region_mask;
  int region = 0;
  double alpha = 0.05;
  std::string weights;
  std::string qi_sided = "lower";
  std::string csv;
  std::string manifest;
  std::size_t threads = 0;
};

int cmd_test(const TestArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  Manifest manifest("test");
  if (!a.manifest.empty()) manifest.set_path(a.manifest);
  return guarded(manifest, err, [&] {
    const TestMethod method = parse_test_method(a.method);
    if (sub.count("--region") && a.region_mask.empty()) {
      throw InputError("--region requires --region-mask");
    }
    if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw InputError("--alpha must lie in (0, 1)");
    if (method == TestMethod::kKdPermutation && a.permutations < 99) {
      throw InputError("permutations >= 99 required for the permutation method");
    }
    Ensemble x = load_ensemble(a.x_path);
    Ensemble y = load_ensemble(a.y_path);
    if (!a.weights.empty()) {
      const WeightMode mode = parse_weight_mode(a.weights);
      x = reweight(x, mode);
      y = reweight(y, mode);
    }
    validate_pair(x, y);
    if (!a.region_mask.empty()) {
      if (!sub.count("--region")) throw InputError("--region-mask requires --region");
      const RegionMask mask = load_region_mask(a.region_mask, x.grid_ptr());
      x = subset_region(x, mask, a.region);
      y = subset_region(y, mask, a.region);
    }
    const std::size_t threads = resolve_threads(a.threads);
    TestResult r;
    if (method == TestMethod::kQiNormal) {
      r = qi_test(x, y, parse_qi_sided(a.qi_sided));
    } else {
      r = kd_test(x, y, KdTestOptions{method, a.permutations, a.seed, threads});
    }
    json j = result_json(r);
    j["alpha"] = a.alpha;
    j["reject"] = r.p_value <= a.alpha;
    if (method == TestMethod::kKdPermutation) j["seed"] = a.seed;
    out << j.dump(2) << "\n";
    if (!a.csv.empty()) {
      std::ostringstream csv;
      csv << "statistic,scaled,p_value,method,n,m\n"
          << format_double(r.statistic) << ',' << format_double(r.scaled) << ','
          << format_double(r.p_value) << ',' << to_string(r.method) << ',' << r.n << ',' << r.m
          << '\n';
      write_file_atomic(a.csv, csv.str());
      manifest.add_output(a.csv);
    }
    manifest["config"] = {{"x", a.x_path}, {"y", a.y_path}, {"method", a.method},
                          {"permutations", a.permutations}, {"region_mask", a.region_mask},
                          {"region", a.region}, {"weights", a.weights}};
    manifest["seed"] = a.seed;
    manifest["result"] = j;
  });
}

struct SimulateArgs {
  std::size_t nx = 32, ny = 32, members = 100;
  double r = 0.4, nu = 1.0, sigma = 1.0, mu = 0.0, df = 3.0, kappa = 0.0;
  std::string family = "gaussian", component = "both", format, out;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a, const CLI::App& sub, std::ostream& out,
                 std::ostream& err) {
  Manifest manifest("simulate");
  manifest.set_path(a.out + ".manifest.json");
  return guarded(manifest, err, [&] {
    const GridPtr grid = make_grid(Grid::unit_square(a.nx, a.ny));
    FieldSpec spec = FieldSpec::stationary(grid, MaternParams{a.sigma, a.r, a.nu}, a.mu, a.seed);
    spec.family = parse_family(a.family);
    spec.df = a.df;
    if (sub.count("--kappa")) {
      if (a.component != "mean" && a.component != "sd" && a.component != "both") {
        throw InputError("--component must be mean, sd or both");
      }
      if (a.component != "sd") {
        spec.mean_field = sine_mean_field(*grid, a.kappa);
        for (double& v : spec.mean_field) v += a.mu;
      }
      if (a.component != "mean") spec.sd_field = sine_sd_field(*grid, a.kappa);
    }
    const Ensemble e = sample_fields(spec, a.members);
    const FileFormat format = a.format.empty() ? format_from_extension(a.out)
                                               : parse_file_format(a.format);
    write_ensemble(e, a.out, format);
    manifest.add_output(a.out);
    manifest["config"] = {{"nx", a.nx},         {"ny", a.ny},        {"members", a.members},
                          {"r", a.r},           {"nu", a.nu},        {"sigma", a.sigma},
                          {"mu", a.mu},         {"family", a.family}, {"df", a.df},
                          {"kappa", a.kappa},   {"component", a.component}};
    manifest["seed"] = a.seed;
    out << a.out << "\n";
  });
}

struct StudyArgs {
  std::string config, out_dir = ".";
  std::uint64_t seed = 0;
  std::size_t threads = 0, sims = 0;
};

int cmd_study(const StudyArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  Manifest manifest("study");
  const std::string stem = fs::path(a.config).stem().string();
  manifest.set_path(fs::path(a.out_dir) / (stem + ".manifest.json"));
  return guarded(manifest, err, [&] {
    json j;
    try {
      j = json::parse(read_all(a.config));
    } catch (const json::parse_error& e) {
      throw InputError("cannot parse study config '" + a.config + "': " + e.what());
    }
    if (!j.is_object()) throw InputError("study config must be a JSON object");
    if (sub.count("--seed")) j["seed"] = a.seed;
    if (sub.count("--threads")) j["threads"] = a.threads;
    if (sub.count("--sims")) j["sims_per_cell"] = a.sims;
    StudyConfig cfg = parse_study_config(j);
    cfg.threads = resolve_threads(cfg.threads);
    manifest["config"] = j;
    manifest["seed"] = cfg.seed;

    const StudyResult result = run_study(cfg);
    fs::create_directories(a.out_dir);
    const fs::path csv = fs::path(a.out_dir) / (stem + ".csv");
    write_file_atomic(csv, result.to_csv());
    manifest.add_output(csv);
    out << csv.string() << "\n";
    if (cfg.study == StudyKind::kConvergence) {
      const fs::path reps = fs::path(a.out_dir) / (stem + ".replicates.csv");
      write_file_atomic(reps, result.replicates_csv());
      manifest.add_output(reps);
      out << reps.string() << "\n";
    }
    manifest["wall_seconds"] = result.wall_seconds;
    out << manifest.path()->string() << "\n";
  });
}

struct PipelineArgs {
  std::string config, output_dir, method;
  std::size_t threads = 0, permutations = 0;
  std::uint64_t seed = 0;
};

int cmd_pipeline(const PipelineArgs& a, const CLI::App& sub, std::ostream& out,
                 std::ostream& err) {
  Manifest manifest("pipeline");
  // Until the config is read the manifest goes next to it.
  manifest.set_path(fs::path(a.config).parent_path() / "pipeline.manifest.json");
  return guarded(manifest, err, [&] {
    json j;
    try {
      j = json::parse(read_all(a.config));
    } catch (const json::parse_error& e) {
      throw InputError("cannot parse pipeline config '" + a.config + "': " + e.what());
    }
    if (!j.is_object()) throw InputError("pipeline config must be a JSON object");
    if (sub.count("--output-dir")) {
      j["output_dir"] = fs::absolute(a.output_dir).string();
    }
    if (sub.count("--method")) j["method"] = a.method;
    if (sub.count("--permutations")) j["permutations"] = a.permutations;
    if (sub.count("--seed")) j["seed"] = a.seed;
    if (sub.count("--threads")) j["threads"] = a.threads;
    PipelineConfig cfg = parse_pipeline_config(j, fs::path(a.config).parent_path());
    cfg.threads = resolve_threads(cfg.threads);
    manifest.set_path(cfg.output_dir / "manifest.json");
    manifest["config"] = j;
    manifest["seed"] = cfg.seed;

    const PipelineOutputs result = run_pipeline(cfg);
    for (const auto& p : write_pipeline_outputs(cfg, result)) {
      manifest.add_output(p);
      out << p.string() << "\n";
    }
    out << manifest.path()->string() << "\n";
  });
}

struct SyntheticArgs {
  std::string out_dir, weights = "uniform";
  std::size_t years = 50, members = 50, nlat = 24, nlon = 48, proxies = 80;
  std::uint64_t seed = 0;
};

int cmd_gen_synthetic(const SyntheticArgs& a, std::ostream& out, std::ostream& err) {
  Manifest manifest("gen-synthetic");
  manifest.set_path(fs::path(a.out_dir) / "gen_manifest.json");
  return guarded(manifest, err, [&] {
    SyntheticConfig cfg;
    cfg.years = a.years;
    cfg.members = a.members;
    cfg.nlat = a.nlat;
    cfg.nlon = a.nlon;
    cfg.proxies = a.proxies;
    cfg.seed = a.seed;
    cfg.weights = parse_weight_mode(a.weights);
    const SyntheticSeries s = make_synthetic_series(cfg);
    const fs::path config = write_synthetic_series(s, a.out_dir, a.seed);
    manifest["config"] = {{"years", a.years}, {"members", a.members}, {"nlat", a.nlat},
                          {"nlon", a.nlon},   {"proxies", a.proxies}, {"weights", a.weights}};
    manifest["seed"] = a.seed;
    manifest.add_output(config);
    out << config.string() << "\n";
  });
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth-based two-sample testing for ensembles of fields", "kdtest"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TestArgs ta;
  auto* test = app.add_subcommand("test", "KD or QI test between two ensemble files");
  test->add_option("x", ta.x_path, "First ensemble (reference for QI)")->required();
  test->add_option("y", ta.y_path, "Second ensemble")->required();
  test->add_option("--method", ta.method, "asymptotic, permutation or qi")->capture_default_str();
  test->add_option("--permutations", ta.permutations, "Relabelings for the permutation method")
      ->capture_default_str();
  test->add_option("--seed", ta.seed, "Seed for the permutation method")->capture_default_str();
  test->add_option("--region-mask", ta.region_mask, "Region mask CSV");
  test->add_option("--region", ta.region, "Region id to restrict the test to");
  test->add_option("--alpha", ta.alpha, "Level for the reject flag")->capture_default_str();
  test->add_option("--weights", ta.weights, "Override grid weights: uniform or coslat");
  test->add_option("--qi-sided", ta.qi_sided, "lower or two")->capture_default_str();
  test->add_option("--csv", ta.csv, "Also write the result as CSV");
  test->add_option("--manifest", ta.manifest, "Write a run manifest");
  test->add_option("--threads", ta.threads, "Worker cap (0: KDTEST_THREADS or all cores)");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Draw a Matérn ensemble on a unit-square grid");
  sim->add_option("--out", sa.out, "Output ensemble file")->required();
  sim->add_option("--nx", sa.nx)->capture_default_str();
  sim->add_option("--ny", sa.ny)->capture_default_str();
  sim->add_option("--members", sa.members)->capture_default_str();
  sim->add_option("--r", sa.r, "Matérn range")->capture_default_str();
  sim->add_option("--nu", sa.nu, "Matérn smoothness")->capture_default_str();
  sim->add_option("--sigma", sa.sigma)->capture_default_str();
  sim->add_option("--mu", sa.mu)->capture_default_str();
  sim->add_option("--family", sa.family, "gaussian or student_t")->capture_default_str();
  sim->add_option("--df", sa.df)->capture_default_str();
  sim->add_option("--kappa", sa.kappa, "Sine-wave amplitude for heterogeneous fields");
  sim->add_option("--component", sa.component, "mean, sd or both")->capture_default_str();
  sim->add_option("--format", sa.format, "binary or csv (default: by extension)");
  sim->add_option("--seed", sa.seed)->capture_default_str();

  StudyArgs sta;
  auto* study = app.add_subcommand("study", "Run a size, power or convergence study");
  study->add_option("config", sta.config, "Study config (JSON)")->required();
  study->add_option("--out-dir", sta.out_dir, "Directory for CSV and manifest")
      ->capture_default_str();
  study->add_option("--seed", sta.seed, "Override the config seed");
  study->add_option("--threads", sta.threads, "Override the worker cap");
  study->add_option("--sims", sta.sims, "Override sims_per_cell");

  PipelineArgs pa;
  auto* pipe = app.add_subcommand("pipeline", "Background-versus-analysis series tests");
  pipe->add_option("config", pa.config, "Pipeline config (JSON)")->required();
  pipe->add_option("--output-dir", pa.output_dir);
  pipe->add_option("--method", pa.method);
  pipe->add_option("--permutations", pa.permutations);
  pipe->add_option("--seed", pa.seed);
  pipe->add_option("--threads", pa.threads);

  SyntheticArgs ga;
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic reconstruction series");
  gen->add_option("--out-dir", ga.out_dir)->required();
  gen->add_option("--years", ga.years)->capture_default_str();
  gen->add_option("--members", ga.members)->capture_default_str();
  gen->add_option("--nlat", ga.nlat)->capture_default_str();
  gen->add_option("--nlon", ga.nlon)->capture_default_str();
  gen->add_option("--proxies", ga.proxies)->capture_default_str();
  gen->add_option("--weights", ga.weights)->capture_default_str();
  gen->add_option("--seed", ga.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  if (*test) return cmd_test(ta, *test, out, err);
  if (*sim) return cmd_simulate(sa, *sim, out, err);
  if (*study) return cmd_study(sta, *study, out, err);
  if (*pipe) return cmd_pipeline(pa, *pipe, out, err);
  if (*gen) return cmd_gen_synthetic(ga, out, err);
  return 2;
}

}  // namespace kdtest::cli
