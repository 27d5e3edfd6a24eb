#include "run_config.hpp"

#include <set>

#include <json.hpp>

#include "robabs/io.hpp"

namespace robabs::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

template <typename T>
T field(const json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

SolverConfig parse_solver(const json& j, const std::string& where) {
  check_keys(j, where, {"lr_t", "lr_env", "prox_lambda", "k_min", "k_max", "max_outer", "tol",
                        "init"});
  SolverConfig s;
  s.lr_t = field(j, where, "lr_t", s.lr_t);
  s.lr_env = field(j, where, "lr_env", s.lr_env);
  if (j.contains("prox_lambda")) s.prox_lambda = field(j, where, "prox_lambda", 0.0);
  s.k_min = field(j, where, "k_min", s.k_min);
  s.k_max = field(j, where, "k_max", s.k_max);
  s.max_outer = field(j, where, "max_outer", s.max_outer);
  s.tol = field(j, where, "tol", s.tol);
  const std::string init = field<std::string>(j, where, "init", "mean_ls");
  if (init == "mean_ls") {
    s.t_init = InitPolicy::kMeanLeastSquares;
  } else if (init == "random") {
    s.t_init = InitPolicy::kRandom;
  } else {
    throw ConfigError(where + ".init must be mean_ls or random");
  }
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return s;
}

MethodKind parse_kind(const std::string& kind, const std::string& where) {
  if (kind == "diroca") return MethodKind::kDiroca;
  if (kind == "grad") return MethodKind::kGrad;
  if (kind == "bary") return MethodKind::kBary;
  if (kind == "abslin_p") return MethodKind::kAbsLinPerfect;
  if (kind == "abslin_n") return MethodKind::kAbsLinNoisy;
  throw ConfigError(where + ".kind '" + kind + "' is not a known method");
}

ConcentrationConfig parse_concentration(const json& j) {
  const std::string where = "concentration";
  check_keys(j, where, {"eta_low", "eta_high", "delta", "c_low", "c_high", "c1_low", "c1_high",
                        "c2_low", "c2_high", "alpha_low", "alpha_high"});
  ConcentrationConfig c;
  c.eta_low = field(j, where, "eta_low", c.eta_low);
  c.eta_high = field(j, where, "eta_high", c.eta_high);
  if (j.contains("delta")) c.with_uniform_delta(field(j, where, "delta", 0.0));
  c.c_low = field(j, where, "c_low", c.c_low);
  c.c_high = field(j, where, "c_high", c.c_high);
  c.c1_low = field(j, where, "c1_low", c.c1_low);
  c.c1_high = field(j, where, "c1_high", c.c1_high);
  c.c2_low = field(j, where, "c2_low", c.c2_low);
  c.c2_high = field(j, where, "c2_high", c.c2_high);
  c.alpha_low = field(j, where, "alpha_low", c.alpha_low);
  c.alpha_high = field(j, where, "alpha_high", c.alpha_high);
  return c;
}

std::string radius_label(double v) { return io::format_double(v); }

}  // namespace

ConcentrationConfig fold_concentration(const RunConfig& cfg) {
  ConcentrationConfig c = cfg.concentration;
  const double n_train =
      static_cast<double>(cfg.n_samples) * (cfg.grid.folds - 1) / cfg.grid.folds;
  c.n_low = n_train;
  c.n_high = n_train;
  const DatasetBundle bundle = build_dataset(cfg.dataset);
  c.dim_low = bundle.low_scm.dim();
  c.dim_high = bundle.high_scm.dim();
  return c;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config", {"dataset", "weights", "n_samples", "root_seed", "setting", "methods",
                           "radii", "concentration", "grid", "misspec", "io"});
  RunConfig cfg;
  cfg.dataset = field<std::string>(j, "config", "dataset", cfg.dataset);
  if (cfg.dataset != "slc" && cfg.dataset != "lilucas") {
    throw ConfigError("config.dataset must be slc or lilucas");
  }
  if (j.contains("weights")) {
    if (!j.at("weights").is_object()) throw ConfigError("config.weights must be an object");
    for (const auto& [edge, w] : j.at("weights").items()) {
      if (!w.is_number()) throw ConfigError("config.weights." + edge + " must be a number");
      cfg.weights[edge] = w.get<double>();
    }
    try {
      build_dataset(cfg.dataset, cfg.weights);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config.weights: ") + e.what());
    }
  }
  cfg.n_samples = field(j, "config", "n_samples", cfg.n_samples);
  if (cfg.n_samples < 10) throw ConfigError("config.n_samples must be at least 10");
  cfg.root_seed = field<std::uint64_t>(j, "config", "root_seed", 0);
  try {
    cfg.setting = parse_setting(field<std::string>(j, "config", "setting", "gaussian"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config.setting: ") + e.what());
  }

  if (j.contains("concentration")) cfg.concentration = parse_concentration(j.at("concentration"));

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, "grid", {"alpha", "sigma", "noise", "k", "m", "contaminate_high", "df", "rate"});
    cfg.grid.alphas = field(g, "grid", "alpha", cfg.grid.alphas);
    cfg.grid.sigmas = field(g, "grid", "sigma", cfg.grid.sigmas);
    const auto noise_names = field<std::vector<std::string>>(g, "grid", "noise", {"gaussian"});
    cfg.grid.noises.clear();
    for (const auto& n : noise_names) {
      try {
        NoiseSpec spec = NoiseSpec::parse(n);
        spec.df = field(g, "grid", "df", spec.df);
        spec.rate = field(g, "grid", "rate", spec.rate);
        cfg.grid.noises.push_back(spec);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("grid.noise: ") + e.what());
      }
    }
    cfg.grid.folds = field(g, "grid", "k", cfg.grid.folds);
    cfg.grid.samples_per_cell = field(g, "grid", "m", cfg.grid.samples_per_cell);
    cfg.grid.contaminate_high = field(g, "grid", "contaminate_high", false);
  }
  cfg.grid.setting = cfg.setting;
  cfg.grid.root_seed = cfg.root_seed;
  if (cfg.grid.alphas.empty() || cfg.grid.sigmas.empty() || cfg.grid.noises.empty()) {
    throw UsageError("grid axes must be nonempty");
  }
  try {
    cfg.grid.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }

  // Radii apply to every DiRoCA entry; "star" uses the concentration bound.
  std::vector<std::pair<double, double>> radii;
  std::vector<bool> star;
  if (j.contains("radii")) {
    for (const auto& r : j.at("radii")) {
      if (r.is_string() && r.get<std::string>() == "star") {
        star.push_back(true);
        radii.push_back({0.0, 0.0});
      } else if (r.is_array() && r.size() == 2 && r[0].is_number() && r[1].is_number()) {
        const double lo = r[0].get<double>();
        const double hi = r[1].get<double>();
        if (lo < 0.0 || hi < 0.0) throw ConfigError("radii must be nonnegative");
        star.push_back(false);
        radii.push_back({lo, hi});
      } else {
        throw ConfigError("radii entries must be [eps_low, eps_high] or \"star\"");
      }
    }
  }
  if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty()) {
    throw UsageError("config needs a nonempty methods list");
  }
  for (std::size_t m = 0; m < j.at("methods").size(); ++m) {
    const json& mj = j.at("methods")[m];
    const std::string where = "methods[" + std::to_string(m) + "]";
    check_keys(mj, where, {"name", "kind", "solver", "reg"});
    MethodSpec spec;
    spec.kind = parse_kind(field<std::string>(mj, where, "kind", ""), where);
    spec.name = field<std::string>(mj, where, "name", field<std::string>(mj, where, "kind", ""));
    spec.cfg = parse_solver(mj.value("solver", json::object()), where + ".solver");
    spec.abslin_reg = field(mj, where, "reg", spec.abslin_reg);
    if (spec.abslin_reg < 0.0) throw ConfigError(where + ".reg must be nonnegative");
    if (spec.kind != MethodKind::kDiroca) {
      cfg.methods.push_back(spec);
      continue;
    }
    if (radii.empty()) throw ConfigError("diroca methods need a radii list");
    for (std::size_t r = 0; r < radii.size(); ++r) {
      MethodSpec d = spec;
      if (star[r]) {
        const ConcentrationConfig c = fold_concentration(cfg);
        Radii eps;
        try {
          eps = cfg.setting == Setting::kGaussian ? gaussian_radii(c) : empirical_radii(c);
        } catch (const InvalidArgument& e) {
          throw ConfigError(e.what());
        }
        d.cfg.eps_low = eps.eps_low;
        d.cfg.eps_high = eps.eps_high;
        d.name = spec.name + "_star";
      } else {
        d.cfg.eps_low = radii[r].first;
        d.cfg.eps_high = radii[r].second;
        d.name = spec.name + "_" + radius_label(d.cfg.eps_low) + "_" + radius_label(d.cfg.eps_high);
      }
      cfg.methods.push_back(d);
    }
  }
  std::set<std::string> names;
  for (const auto& m : cfg.methods) {
    if (!names.insert(m.name).second) throw ConfigError("duplicate method name '" + m.name + "'");
  }

  if (j.contains("misspec")) {
    const json& ms = j.at("misspec");
    check_keys(ms, "misspec", {"f", "omega"});
    if (ms.contains("f")) {
      check_keys(ms.at("f"), "misspec.f", {"fnl", "k"});
      FMisspecSpec f;
      const std::string fnl = field<std::string>(ms.at("f"), "misspec.f", "fnl", "sin");
      if (fnl != "sin" && fnl != "tanh") throw ConfigError("misspec.f.fnl must be sin or tanh");
      f.fnl = fnl == "sin" ? Nonlinearity::kSin : Nonlinearity::kTanh;
      f.strengths = field(ms.at("f"), "misspec.f", "k", f.strengths);
      if (f.strengths.empty()) throw UsageError("misspec.f.k must be nonempty");
      cfg.f_misspec = f;
    }
    if (ms.contains("omega")) {
      check_keys(ms.at("omega"), "misspec.omega", {"n_misalign", "delta"});
      OmegaMisspecSpec o;
      o.n_misalign = field(ms.at("omega"), "misspec.omega", "n_misalign", o.n_misalign);
      o.delta = field(ms.at("omega"), "misspec.omega", "delta", o.delta);
      if (o.n_misalign.empty()) throw UsageError("misspec.omega.n_misalign must be nonempty");
      for (int n : o.n_misalign) {
        if (n < 0) throw ConfigError("misspec.omega.n_misalign must be nonnegative");
      }
      if (o.delta < 0) throw ConfigError("misspec.omega.delta must be nonnegative");
      cfg.omega_misspec = o;
    }
  }

  if (j.contains("io")) {
    const json& o = j.at("io");
    check_keys(o, "io", {"output_dir", "dataset_dir"});
    if (o.contains("output_dir")) {
      cfg.output_dir = base_dir / field<std::string>(o, "io", "output_dir", "runs");
    }
    if (o.contains("dataset_dir")) {
      cfg.dataset_dir = base_dir / field<std::string>(o, "io", "dataset_dir", "");
    }
  } else {
    cfg.output_dir = base_dir / cfg.output_dir;
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const io::MissingArtifact&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse_config(text, path.parent_path());
}

}  // namespace robabs::cli
