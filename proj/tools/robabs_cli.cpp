// robabs: dataset generation, radii, training, evaluation and reports.
//
// Exit codes: 0 ok, 1 usage, 2 config, 3 solver, 4 missing artifacts.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "robabs/io.hpp"
#include "robabs/random.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace robabs;
using robabs::cli::ConfigError;
using robabs::cli::RunConfig;
using robabs::cli::UsageError;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kSolver = 3, kMissing = 4 };

struct Overrides {
  std::optional<std::string> out;
  std::optional<std::string> dataset_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

RunConfig load(const std::string& path, const Overrides& o) {
  RunConfig cfg = cli::load_config(path);
  if (o.out) cfg.output_dir = *o.out;
  if (o.dataset_dir) cfg.dataset_dir = *o.dataset_dir;
  if (o.seed) {
    cfg.root_seed = *o.seed;
    cfg.grid.root_seed = *o.seed;
  }
  return cfg;
}

/// Fresh <root>/<command>-<UTC timestamp>[-n] directory holding a config copy.
fs::path make_run_dir(const fs::path& root, const std::string& command,
                      const std::string& config_path) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  const std::string base = command + "-" + stamp;
  fs::path dir = root / base;
  for (int i = 1; fs::exists(dir); ++i) dir = root / (base + "-" + std::to_string(i));
  fs::create_directories(dir);
  io::write_text(dir / "config.json", io::read_text(config_path));
  return dir;
}

struct Data {
  DatasetBundle bundle;
  DatasetSamples samples;
  std::string hash;
};

/// Reads the configured dataset directory, or generates the builtin dataset
/// in memory from the root seed when none is configured.
Data load_data(const RunConfig& cfg) {
  if (!cfg.dataset_dir.empty()) {
    io::DatasetDir d = io::read_dataset(cfg.dataset_dir);
    if (d.bundle.name != cfg.dataset) {
      throw ConfigError("dataset directory holds '" + d.bundle.name + "', config names '" +
                        cfg.dataset + "'");
    }
    return {std::move(d.bundle), std::move(d.samples), d.hash};
  }
  Data d{build_dataset(cfg.dataset, cfg.weights), {}, {}};
  d.samples = generate_samples(d.bundle, cfg.n_samples, cfg.root_seed);
  d.hash = "generated:" + cfg.dataset + ":" + std::to_string(cfg.n_samples) + ":" +
           std::to_string(cfg.root_seed);
  for (const auto& [edge, w] : cfg.weights) d.hash += ":" + edge + "=" + io::format_double(w);
  return d;
}

/// Runs body(i) for i in [0, n) on `jobs` threads. Exceptions are collected
/// per task; the first one in task order is rethrown.
template <typename F>
void parallel_for(std::size_t n, int jobs, F body) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::min<int>(jobs, static_cast<int>(n)); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string map_file_name(const std::string& method, int fold) {
  return method + "_fold" + std::to_string(fold) + ".json";
}

std::uint64_t fit_seed(std::uint64_t root, const std::string& method, int fold) {
  return derive_seed({root, hash_string("fit"), hash_string(method),
                      static_cast<std::uint64_t>(fold)});
}

int cmd_dataset(const std::string& what, const std::string& out, std::uint64_t seed, int n) {
  std::string name = what;
  WeightOverrides weights;
  if (name != "slc" && name != "lilucas") {
    if (!fs::exists(what)) throw UsageError("unknown dataset '" + what + "'");
    RunConfig cfg = cli::load_config(what);
    name = cfg.dataset;
    weights = cfg.weights;
  }
  if (n < 1) throw UsageError("--n must be positive");
  const DatasetBundle bundle = build_dataset(name, weights);
  const DatasetSamples samples = generate_samples(bundle, n, seed);
  const auto files = io::write_dataset(out, bundle, samples, seed);
  std::cout << "wrote " << files.size() << " files to " << out << '\n';
  return kOk;
}

int cmd_radius(const std::optional<std::string>& config, std::optional<double> n,
               std::optional<double> eta, const std::string& dataset) {
  ConcentrationConfig c;
  if (config) {
    c = cli::fold_concentration(cli::load_config(*config));
  } else {
    const DatasetBundle bundle = build_dataset(dataset);
    c.dim_low = bundle.low_scm.dim();
    c.dim_high = bundle.high_scm.dim();
  }
  if (n) c.n_low = c.n_high = *n;
  if (eta) c.eta_low = c.eta_high = *eta;
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const Radii g = gaussian_radii(c);
  const Radii e = empirical_radii(c);
  ordered_json j;
  j["gaussian"] = {{"eps_low", g.eps_low}, {"eps_high", g.eps_high}, {"eps_joint", g.eps_joint}};
  j["empirical"] = {{"eps_low", e.eps_low}, {"eps_high", e.eps_high}, {"eps_joint", e.eps_joint}};
  std::cout << j.dump(2) << '\n';
  return kOk;
}

int cmd_train(const std::string& config_path, const Overrides& o) {
  const RunConfig cfg = load(config_path, o);
  const Data data = load_data(cfg);
  const fs::path dir = make_run_dir(cfg.output_dir, "train", config_path);
  fs::create_directories(dir / "maps");

  struct Task {
    const MethodSpec* method;
    int fold;
    FitResult fit;
    std::string error;
    bool diverged = false;
  };
  std::vector<Task> tasks;
  for (const auto& m : cfg.methods) {
    for (int f = 0; f < cfg.grid.folds; ++f) tasks.push_back({&m, f, {}, {}, false});
  }
  parallel_for(tasks.size(), o.jobs, [&](std::size_t i) {
    Task& t = tasks[i];
    MethodSpec m = *t.method;
    m.cfg.seed = fit_seed(cfg.root_seed, m.name, t.fold);
    const FoldData fold = split_fold(data.samples, cfg.grid.folds, t.fold);
    try {
      const ProblemInstance inst = make_instance(data.bundle, fold, cfg.setting);
      t.fit = fit_method(m, inst, fold, data.bundle);
    } catch (const ConvergenceError& e) {
      t.error = e.what();
      t.diverged = true;
      t.fit.trace = e.trace();
      return;
    }
    io::MapMetadata meta{m.name, m.cfg.eps_low, m.cfg.eps_high, m.cfg.seed, data.hash, t.fold};
    io::write_text(dir / "maps" / map_file_name(m.name, t.fold), io::map_to_json(t.fit.map, meta));
  });

  std::ostringstream traces;
  traces << "method,fold,iteration,objective\n";
  ordered_json fits = ordered_json::array();
  bool all_ok = true;
  for (const auto& t : tasks) {
    for (std::size_t k = 0; k < t.fit.trace.size(); ++k) {
      traces << t.method->name << ',' << t.fold << ',' << k << ','
             << io::format_double(t.fit.trace[k]) << '\n';
    }
    ordered_json f;
    f["method"] = t.method->name;
    f["fold"] = t.fold;
    if (t.diverged) {
      f["status"] = "diverged";
      f["error"] = t.error;
    } else {
      f["status"] = t.fit.converged ? "converged" : "not_converged";
      f["file"] = "maps/" + map_file_name(t.method->name, t.fold);
      f["outer_iterations"] = t.fit.outer_iterations;
      if (!t.fit.trace.empty()) f["final_objective"] = t.fit.trace.back();
    }
    all_ok = all_ok && !t.diverged && t.fit.converged;
    fits.push_back(f);
  }
  io::write_text(dir / "traces.csv", traces.str());
  ordered_json manifest;
  manifest["dataset"] = cfg.dataset;
  manifest["dataset_hash"] = data.hash;
  manifest["setting"] = setting_name(cfg.setting);
  manifest["folds"] = cfg.grid.folds;
  manifest["fits"] = fits;
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << dir.string() << '\n';
  if (!all_ok) {
    std::cerr << "error: some fits failed or did not converge, see " << (dir / "manifest.json")
              << '\n';
    return kSolver;
  }
  return kOk;
}

ordered_json summary_json(const std::vector<ExperimentResult>& results) {
  ordered_json cells = ordered_json::array();
  for (const auto& c : summarize(results)) {
    cells.push_back({{"method", c.method},
                     {"eps_low", c.eps_low},
                     {"eps_high", c.eps_high},
                     {"alpha", c.alpha},
                     {"sigma", c.sigma},
                     {"noise_kind", c.noise_kind},
                     {"count", c.count},
                     {"mean", c.mean},
                     {"std", c.std}});
  }
  return ordered_json{{"cells", cells}};
}

int cmd_eval(const std::string& config_path, const std::string& maps_dir, const Overrides& o) {
  const RunConfig cfg = load(config_path, o);
  const fs::path maps = fs::path(maps_dir) / "maps";
  // Check every map before any work so a partial run never starts.
  for (const auto& m : cfg.methods) {
    for (int f = 0; f < cfg.grid.folds; ++f) {
      const fs::path p = maps / map_file_name(m.name, f);
      if (!fs::exists(p)) throw io::MissingArtifact("missing map " + p.string());
    }
  }
  const Data data = load_data(cfg);
  const fs::path dir = make_run_dir(cfg.output_dir, "eval", config_path);

  std::vector<std::vector<ExperimentResult>> slots(cfg.methods.size() * cfg.grid.folds);
  parallel_for(slots.size(), o.jobs, [&](std::size_t i) {
    const MethodSpec& m = cfg.methods[i / cfg.grid.folds];
    const int fold = static_cast<int>(i % cfg.grid.folds);
    io::MapMetadata meta;
    const AbstractionMap map =
        io::map_from_json(io::read_text(maps / map_file_name(m.name, fold)), &meta);
    if (meta.dataset_hash != data.hash) {
      throw io::MissingArtifact("map " + map_file_name(m.name, fold) +
                                " was trained on a different dataset");
    }
    const FoldData fd = split_fold(data.samples, cfg.grid.folds, fold);
    auto& out = slots[i];
    out = evaluate_map(map, m, fd, data.bundle.omega, cfg.grid, fold);
    if (cfg.f_misspec) {
      const int n_test = static_cast<int>(fd.test_low.front().rows());
      auto extra = evaluate_f_misspec(map, m, data.bundle, n_test, *cfg.f_misspec, cfg.grid, fold);
      out.insert(out.end(), extra.begin(), extra.end());
    }
    if (cfg.omega_misspec) {
      auto extra =
          evaluate_omega_misspec(map, m, fd, data.bundle.omega, *cfg.omega_misspec, cfg.grid, fold);
      out.insert(out.end(), extra.begin(), extra.end());
    }
  });
  std::vector<ExperimentResult> results;
  for (auto& s : slots) results.insert(results.end(), s.begin(), s.end());
  io::write_text(dir / "results.csv", results_to_csv(results));
  io::write_text(dir / "summary.json", summary_json(results).dump(2) + "\n");
  std::cout << dir.string() << '\n';
  return kOk;
}

/// Per-figure files: one row per (panel, method, x) with mean/std over folds
/// and samples. The panel fixes every axis other than x.
int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<ExperimentResult> all;
  for (const auto& path : inputs) {
    const std::string text = io::read_text(path);
    try {
      const auto r = results_from_csv(text);
      all.insert(all.end(), r.begin(), r.end());
    } catch (const InvalidArgument& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  const auto cells = summarize(all);
  const fs::path dir = out;
  fs::create_directories(dir);
  const std::string head = "panel,method,eps_low,eps_high,x,count,mean,std\n";
  std::ostringstream alpha, sigma, fmis, omis, table;
  alpha << head;
  sigma << head;
  fmis << head;
  omis << head;
  auto row = [](std::ostringstream& os, const std::string& panel, const CellSummary& c,
                double x) {
    os << panel << ',' << c.method << ',' << io::format_double(c.eps_low) << ','
       << io::format_double(c.eps_high) << ',' << io::format_double(x) << ',' << c.count << ','
       << io::format_double(c.mean) << ',' << io::format_double(c.std) << '\n';
  };
  for (const auto& c : cells) {
    if (c.noise_kind.rfind("fmisspec_", 0) == 0) {
      row(fmis, c.noise_kind, c, c.sigma);
    } else if (c.noise_kind == "omega_misspec") {
      row(omis, c.noise_kind, c, c.sigma);
    } else {
      row(alpha, c.noise_kind + ":sigma=" + io::format_double(c.sigma), c, c.alpha);
      row(sigma, c.noise_kind + ":alpha=" + io::format_double(c.alpha), c, c.sigma);
    }
  }
  io::write_text(dir / "fig_alpha.csv", alpha.str());
  io::write_text(dir / "fig_sigma.csv", sigma.str());
  io::write_text(dir / "fig_fmisspec.csv", fmis.str());
  io::write_text(dir / "fig_omega.csv", omis.str());
  io::write_text(dir / "summary.json", summary_json(all).dump(2) + "\n");
  std::cout << dir.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust causal abstraction learning"};
  app.require_subcommand(1);
  Overrides o;

  auto* ds = app.add_subcommand("dataset", "write a builtin dataset to a directory");
  std::string ds_name;
  std::string ds_out;
  std::uint64_t ds_seed = 0;
  int ds_n = 10000;
  ds->add_option("name", ds_name, "slc, lilucas or a config file")->required();
  ds->add_option("--out", ds_out, "output directory")->required();
  ds->add_option("--seed", ds_seed, "sampling seed");
  ds->add_option("--n", ds_n, "samples per intervention");

  auto* rad = app.add_subcommand("radius", "print ambiguity radii as JSON");
  std::optional<std::string> rad_config;
  std::optional<double> rad_n;
  std::optional<double> rad_eta;
  std::string rad_dataset = "slc";
  rad->add_option("config", rad_config, "run config (sample counts from one training fold)");
  rad->add_option("--n", rad_n, "samples per level");
  rad->add_option("--eta", rad_eta, "per-level failure probability");
  rad->add_option("--dataset", rad_dataset, "dimensions from this dataset when no config");

  std::string config;
  std::string maps_dir;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("config", config, "run config")->required();
    sub->add_option("--out", o.out, "override io.output_dir");
    sub->add_option("--dataset-dir", o.dataset_dir, "override io.dataset_dir");
    sub->add_option("--seed", o.seed, "override root_seed");
    sub->add_option("--jobs,-j", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* train = app.add_subcommand("train", "fit every method on every fold");
  add_run_flags(train);
  auto* ev = app.add_subcommand("eval", "score trained maps on the evaluation grid");
  add_run_flags(ev);
  ev->add_option("--maps", maps_dir, "train run directory")->required();

  auto* rep = app.add_subcommand("report", "aggregate results CSVs into figure data files");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  rep->add_option("results", rep_inputs, "results CSV files")->required();
  rep->add_option("--out", rep_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*ds) return cmd_dataset(ds_name, ds_out, ds_seed, ds_n);
    if (*rad) return cmd_radius(rad_config, rad_n, rad_eta, rad_dataset);
    if (*train) return cmd_train(config, o);
    if (*ev) return cmd_eval(config, maps_dir, o);
    if (*rep) return cmd_report(rep_inputs, rep_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ConvergenceError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolver;
  } catch (const io::MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return kMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kUsage;
}
