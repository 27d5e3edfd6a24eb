// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// criterion fails.
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "robabs/eval.hpp"
#include "robabs/geometry.hpp"
#include "robabs/io.hpp"
#include "robabs/radius.hpp"
#include "run_config.hpp"
#include "support.hpp"

#ifndef ROBABS_CLI
#error "ROBABS_CLI must name the CLI binary"
#endif
#ifndef ROBABS_CONFIG_DIR
#error "ROBABS_CONFIG_DIR must name the shipped configs"
#endif

using namespace robabs;
using namespace robabs::test;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double nominal(const AbstractionMap& t, const ProblemInstance& inst) {
  return inst.is_gaussian() ? gaussian_objective(t, inst.gaussian_env(), inst)
                            : empirical_objective(t, inst.empirical_env(), inst);
}

// Monte-Carlo Monge cost within 2% on 20 random 3-D pairs (1e5 samples),
// tensorization to 1e-8, prox and projections against brute force.
Outcome geometry_oracles() {
  using namespace geometry;
  Rng rng(2024);
  double worst_mc = 0.0;
  for (int k = 0; k < 20; ++k) {
    Moments<double> a{random_vec(3, rng), random_spd(3, rng)};
    Moments<double> b{random_vec(3, rng), random_spd(3, rng)};
    const AffineMap<double> t = monge_map_gaussian(a, b);
    const Mat x = (standard_normal(100000, 3, rng) * psd_sqrt(a.cov)).rowwise() + a.mean.transpose();
    const Mat y = (x * t.linear.transpose()).rowwise() + t.offset.transpose();
    const double mc = (x - y).rowwise().squaredNorm().mean();
    const double exact = gelbrich_distance_sq(a, b);
    worst_mc = std::max(worst_mc, std::abs(mc - exact) / exact);
  }

  double worst_tensor = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Mat a1 = random_spd(2, rng), a2 = random_spd(3, rng);
    const Mat b1 = random_spd(2, rng), b2 = random_spd(3, rng);
    const Vec m1 = random_vec(2, rng), m2 = random_vec(3, rng);
    const Vec n1 = random_vec(2, rng), n2 = random_vec(3, rng);
    const JointGaussianEnv e1{GaussianEnv(m1, a1), GaussianEnv(m2, a2)};
    const JointGaussianEnv e2{GaussianEnv(n1, b1), GaussianEnv(n2, b2)};
    Vec m(5), nn(5);
    m << m1, m2;
    nn << n1, n2;
    Mat a = Mat::Zero(5, 5), b = Mat::Zero(5, 5);
    a.topLeftCorner(2, 2) = a1;
    a.bottomRightCorner(3, 3) = a2;
    b.topLeftCorner(2, 2) = b1;
    b.bottomRightCorner(3, 3) = b2;
    const double split =
        gelbrich_distance_sq<double>(m1, a1, n1, b1) + gelbrich_distance_sq<double>(m2, a2, n2, b2);
    worst_tensor = std::max({worst_tensor, std::abs(gelbrich_distance_sq<double>(m, a, nn, b) - split),
                             std::abs(joint_w2_sq(e1, e2) - split)});
  }

  // Prox: no perturbed point beats it. Frobenius projection: no feasible point
  // is closer. 1-D Gelbrich projection: matches a search over the disc.
  double prox_gap = 0.0, proj_gap = 0.0, gel_gap = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Mat a = standard_normal(3, 2, rng);
    const double lam = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    auto obj = [&](const Mat& x) { return lam * x.norm() + 0.5 * (x - a).squaredNorm(); };
    const Mat p = frobenius_prox(a, lam);
    for (int t = 0; t < 500; ++t) {
      const Mat trial = p + (t < 250 ? 1e-2 : 1.0) * standard_normal(3, 2, rng);
      prox_gap = std::max(prox_gap, obj(p) - obj(trial));
    }

    const Mat theta = 2.0 * standard_normal(4, 3, rng);
    const double bound = std::uniform_real_distribution<double>(0.1, 5.0)(rng);
    const Mat q = project_frobenius_ball(theta, bound);
    proj_gap = std::max(proj_gap, q.norm() - bound);
    for (int t = 0; t < 500; ++t) {
      Mat trial = standard_normal(4, 3, rng);
      trial *= std::uniform_real_distribution<double>(0.0, bound)(rng) / trial.norm();
      proj_gap = std::max(proj_gap, (q - theta).norm() - (trial - theta).norm());
    }

    Vec mc(1), me(1);
    Mat cc(1, 1), ce(1, 1);
    mc << std::uniform_real_distribution<double>(-1, 1)(rng);
    cc << std::uniform_real_distribution<double>(0.5, 2)(rng);
    me << mc(0) + std::uniform_real_distribution<double>(-3, 3)(rng);
    ce << std::uniform_real_distribution<double>(0.1, 8)(rng);
    const double eps = 0.5;
    const Moments<double> out = project_gelbrich_ball<double>({me, ce}, {mc, cc}, eps);
    const double got = std::pow(out.mean(0) - me(0), 2) +
                       std::pow(std::sqrt(out.cov(0, 0)) - std::sqrt(ce(0, 0)), 2);
    double best = gelbrich_distance_sq<double>(me, ce, mc, cc) <= eps * eps ? 0.0 : 1e300;
    for (int i = 0; i <= 20000 && best > 0.0; ++i) {
      const double ang = 2 * M_PI * i / 20000.0;
      const double m = mc(0) + eps * std::cos(ang);
      const double s = std::sqrt(cc(0, 0)) + eps * std::sin(ang);
      if (s >= 0) best = std::min(best, std::pow(m - me(0), 2) + std::pow(s - std::sqrt(ce(0, 0)), 2));
    }
    gel_gap = std::max(gel_gap, got - best);
  }
  const bool pass = worst_mc <= 0.02 && worst_tensor <= 1e-8 && prox_gap <= 1e-12 &&
                    proj_gap <= 1e-12 && gel_gap <= 1e-6;
  return {pass, "mc_rel=" + fmt(worst_mc) + " tensor=" + fmt(worst_tensor) +
                    " prox_gap=" + fmt(prox_gap) + " proj_gap=" + fmt(proj_gap) +
                    " gelbrich_proj_gap=" + fmt(gel_gap)};
}

// Analytic gradients within 1e-4 relative error of central differences on 50
// random instances per objective.
Outcome gradient_suite() {
  auto dims = [](Rng& rng) {
    const int l = std::uniform_int_distribution<int>(2, 5)(rng);
    return std::pair<int, int>{l, std::uniform_int_distribution<int>(1, l)(rng)};
  };
  double gauss = 0.0, surr = 0.0, emp = 0.0;
  Rng rng(41);
  for (int k = 0; k < 50; ++k) {
    const auto [l, h] = dims(rng);
    const ProblemInstance inst = random_instance(l, h, rng, true);
    const JointGaussianEnv& env = inst.gaussian_env();
    const Mat t = standard_normal(h, l, rng);
    const GaussianGradients g = gaussian_objective_gradients(t, env, pushforward_terms(inst));
    gauss = std::max(gauss, rel_err(g.t, fd_gradient([&](const Mat& x) {
                                        return gaussian_objective(AbstractionMap(x), env, inst);
                                      }, t)));
    gauss = std::max(gauss, rel_err(g.mean_low, fd_gradient([&](const Mat& m) {
                                        const JointGaussianEnv e{GaussianEnv(m.col(0), env.low.cov()), env.high};
                                        return gaussian_objective(AbstractionMap(t), e, inst);
                                      }, env.low.mean())));
    gauss = std::max(gauss, rel_err(g.mean_high, fd_gradient([&](const Mat& m) {
                                        const JointGaussianEnv e{env.low, GaussianEnv(m.col(0), env.high.cov())};
                                        return gaussian_objective(AbstractionMap(t), e, inst);
                                      }, env.high.mean())));
  }
  for (int k = 0; k < 50; ++k) {
    const auto [l, h] = dims(rng);
    const ProblemInstance inst = random_instance(l, h, rng, true);
    const auto terms = pushforward_terms(inst);
    const Mat t = standard_normal(h, l, rng);
    const Vec ml = random_vec(l, rng), mh = random_vec(h, rng);
    const Mat sl = geometry::psd_sqrt<double>(random_spd(l, rng));
    const Mat sh = geometry::psd_sqrt<double>(random_spd(h, rng));
    const GaussianGradients g = gaussian_surrogate_gradients(t, ml, sl, mh, sh, terms);
    auto f = [&](const Mat& a, const Vec& b, const Mat& c, const Vec& d, const Mat& e) {
      return gaussian_surrogate_at_roots(a, b, c, d, e, terms);
    };
    surr = std::max({surr,
                     rel_err(g.t, fd_gradient([&](const Mat& x) { return f(x, ml, sl, mh, sh); }, t)),
                     rel_err(g.mean_low, fd_gradient([&](const Mat& x) { return f(t, x.col(0), sl, mh, sh); }, ml)),
                     rel_err(g.mean_high, fd_gradient([&](const Mat& x) { return f(t, ml, sl, x.col(0), sh); }, mh)),
                     rel_err(g.root_low, fd_gradient([&](const Mat& x) { return f(t, ml, x, mh, sh); }, sl)),
                     rel_err(g.root_high, fd_gradient([&](const Mat& x) { return f(t, ml, sl, mh, x); }, sh))});
  }
  for (int k = 0; k < 50; ++k) {
    const auto [l, h] = dims(rng);
    const ProblemInstance inst = random_instance(l, h, rng, false, 20);
    const JointEmpiricalEnv& env = inst.empirical_env();
    const Mat t = standard_normal(h, l, rng);
    const Mat ul = env.low.samples(), uh = env.high.samples();
    const EmpiricalGradients g = empirical_objective_gradients(t, ul, uh, pushforward_terms(inst));
    auto f = [&](const Mat& tt, const Mat& a, const Mat& b) {
      return empirical_objective(AbstractionMap(tt), {EmpiricalEnv(a), EmpiricalEnv(b)}, inst);
    };
    emp = std::max({emp, rel_err(g.t, fd_gradient([&](const Mat& x) { return f(x, ul, uh); }, t)),
                    rel_err(g.theta_low, fd_gradient([&](const Mat& x) { return f(t, x, uh); }, ul)),
                    rel_err(g.theta_high, fd_gradient([&](const Mat& x) { return f(t, ul, x); }, uh))});
  }
  return {std::max({gauss, surr, emp}) < 1e-4,
          "max_rel gaussian=" + fmt(gauss) + " surrogate=" + fmt(surr) + " empirical=" + fmt(emp)};
}

ProblemInstance dataset_instance(const std::string& name, Setting s, int n, std::uint64_t seed) {
  const DatasetBundle b = build_dataset(name);
  return make_instance(b, split_fold(generate_samples(b, n, seed), 5, 0), s);
}

// DiRoCA at radius (0, 0) and Grad reach the same nominal objective (< 1e-6).
Outcome zero_radius() {
  double worst = 0.0;
  for (const char* name : {"slc", "lilucas"}) {
    for (Setting s : {Setting::kGaussian, Setting::kEmpirical}) {
      const ProblemInstance inst = dataset_instance(name, s, 2000, 21);
      SolverConfig c;
      c.seed = 21;
      const FitResult g = fit_grad(inst, c);
      const FitResult d =
          s == Setting::kGaussian ? fit_diroca_gaussian(inst, c) : fit_diroca_empirical(inst, c);
      worst = std::max(worst, std::abs(nominal(g.map, inst) - nominal(d.map, inst)));
    }
  }
  return {worst < 1e-6, "max_gap=" + fmt(worst)};
}

// Exact-abstraction instances: Grad and DiRoCA at a small radius reach nominal
// objective < 1e-4 (Gaussian) and < 1e-6 (empirical).
Outcome exact_recovery() {
  Rng rng(61);
  double worst_g = 0.0, worst_e = 0.0;
  for (int k = 0; k < 5; ++k) {
    for (bool gaussian : {true, false}) {
      const ExactPair ex = exact_instance(4, 2, rng, gaussian);
      SolverConfig c;
      c.tol = 1e-12;
      c.max_outer = 20000;
      double& worst = gaussian ? worst_g : worst_e;
      worst = std::max(worst, nominal(fit_grad(ex.inst, c).map, ex.inst));
      c.eps_low = c.eps_high = 1e-3;
      c.lr_env = 5e-2;
      const FitResult d = gaussian ? fit_diroca_gaussian(ex.inst, c) : fit_diroca_empirical(ex.inst, c);
      worst = std::max(worst, nominal(d.map, ex.inst));
    }
  }
  return {worst_g < 1e-4 && worst_e < 1e-6,
          "max_objective gaussian=" + fmt(worst_g) + " empirical=" + fmt(worst_e)};
}

// Every outer iteration of 10 seeded DiRoCA runs keeps the adversary inside
// its balls (1e-6 slack).
Outcome feasibility() {
  int iterations = 0;
  double worst = -1e300;
  for (int run = 0; run < 10; ++run) {
    const Setting s = run % 2 == 0 ? Setting::kGaussian : Setting::kEmpirical;
    const ProblemInstance inst = dataset_instance(run < 6 ? "slc" : "lilucas", s, 1000, 100 + run);
    SolverConfig c;
    c.seed = run;
    c.eps_low = 0.25 * (1 + run % 4);
    c.eps_high = 0.1 * (1 + run % 3);
    c.lr_env = 5e-2;
    c.max_outer = 300;
    c.t_init = run % 3 == 0 ? InitPolicy::kRandom : InitPolicy::kMeanLeastSquares;
    const FitResult d =
        s == Setting::kGaussian ? fit_diroca_gaussian(inst, c) : fit_diroca_empirical(inst, c);
    if (d.dist_low.empty()) return {false, "run " + std::to_string(run) + " recorded no iterations"};
    for (std::size_t i = 0; i < d.dist_low.size(); ++i) {
      worst = std::max({worst, d.dist_low[i] - c.eps_low, d.dist_high[i] - c.eps_high});
      ++iterations;
    }
  }
  return {worst <= 1e-6, "iterations=" + std::to_string(iterations) + " max_excess=" + fmt(worst)};
}

cli::RunConfig shipped(const std::string& name) {
  return cli::load_config(fs::path(ROBABS_CONFIG_DIR) / (name + ".json"));
}

const MethodSpec& method(const cli::RunConfig& cfg, const std::string& name) {
  for (const auto& m : cfg.methods) {
    if (m.name == name) return m;
  }
  throw std::runtime_error(name + " missing from config");
}

double mean_error(const std::vector<ExperimentResult>& rs, const std::string& m, double alpha,
                  const std::string& kind) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rs) {
    if (r.method == m && r.alpha == alpha && r.noise_kind == kind) {
      sum += r.error;
      ++n;
    }
  }
  if (n == 0) throw std::runtime_error("no records for " + m);
  return sum / n;
}

// Per dataset and setting, over seeds 1..5 at 10000 samples, k folds and the
// shipped sigma: Grad <= DiRoCA(2,2) at alpha 0, DiRoCA(2,2) below Grad and
// Bary at alpha 1. Each ordering must hold in at least 4 of 5 seeds.
Outcome table_orderings() {
  std::ostringstream detail;
  bool pass = true;
  for (const char* ds : {"slc", "lilucas"}) {
    for (const char* st : {"gaussian", "empirical"}) {
      const cli::RunConfig cfg = shipped(std::string(ds) + "_" + st);
      const std::vector<MethodSpec> ms = {method(cfg, "grad"), method(cfg, "diroca_2_2"),
                                          method(cfg, "bary")};
      GridSpec grid = cfg.grid;
      grid.alphas = {0.0, 1.0};
      grid.noises = {NoiseSpec{}};
      grid.samples_per_cell = 1;
      int clean = 0, vs_grad = 0, vs_bary = 0;
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const DatasetBundle b = build_dataset(cfg.dataset, cfg.weights);
        grid.root_seed = seed;
        const auto rs = run_grid(b, generate_samples(b, cfg.n_samples, seed), ms, grid);
        const std::string kind = "gaussian";
        const double g0 = mean_error(rs, "grad", 0, kind), d0 = mean_error(rs, "diroca_2_2", 0, kind);
        const double g1 = mean_error(rs, "grad", 1, kind), d1 = mean_error(rs, "diroca_2_2", 1, kind);
        const double b1 = mean_error(rs, "bary", 1, kind);
        clean += g0 <= d0;
        vs_grad += d1 < g1;
        vs_bary += d1 < b1;
      }
      pass = pass && clean >= 4 && vs_grad >= 4 && vs_bary >= 4;
      detail << ds << "/" << st << " " << clean << "," << vs_grad << "," << vs_bary << "/5 ";
    }
  }
  return {pass, detail.str()};
}

// LiLUCAS under sin, k = 1 and under one misaligned omega entry: the best
// shipped DiRoCA radius <= Grad <= Bary in mean error, in at least 4 of 5 seeds.
Outcome misspecification() {
  std::ostringstream detail;
  bool pass = true;
  for (const char* st : {"gaussian", "empirical"}) {
    const cli::RunConfig cfg = shipped(std::string("lilucas_") + st);
    std::vector<MethodSpec> ms;
    for (const auto& m : cfg.methods) {
      if (m.kind == MethodKind::kDiroca || m.kind == MethodKind::kGrad || m.kind == MethodKind::kBary) {
        ms.push_back(m);
      }
    }
    FMisspecSpec fspec;
    fspec.fnl = Nonlinearity::kSin;
    fspec.strengths = {1.0};
    OmegaMisspecSpec ospec;
    ospec.n_misalign = {1};
    GridSpec grid = cfg.grid;
    grid.samples_per_cell = 4;
    const DatasetBundle b = build_dataset(cfg.dataset, cfg.weights);
    int f_ok = 0, o_ok = 0;
    std::map<std::string, double> f_avg, o_avg;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      grid.root_seed = seed;
      const DatasetSamples samples = generate_samples(b, cfg.n_samples, seed);
      std::vector<ExperimentResult> rs;
      for (int fold = 0; fold < grid.folds; ++fold) {
        const FoldData data = split_fold(samples, grid.folds, fold);
        const ProblemInstance inst = make_instance(b, data, cfg.setting);
        for (const auto& m : ms) {
          const FitResult fit = fit_method(m, inst, data, b);
          const auto f = evaluate_f_misspec(fit.map, m, b, static_cast<int>(data.test_low[0].rows()),
                                            fspec, grid, fold);
          const auto o = evaluate_omega_misspec(fit.map, m, data, b.omega, ospec, grid, fold);
          rs.insert(rs.end(), f.begin(), f.end());
          rs.insert(rs.end(), o.begin(), o.end());
        }
      }
      auto holds = [&](const std::string& kind, std::map<std::string, double>& avg) {
        double best = 1e300;
        for (const auto& m : ms) {
          const double e = mean_error(rs, m.name, 0.0, kind);
          avg[m.name] += e / 5.0;
          if (m.kind == MethodKind::kDiroca) best = std::min(best, e);
        }
        const double g = mean_error(rs, "grad", 0.0, kind), br = mean_error(rs, "bary", 0.0, kind);
        return best <= g && g <= br;
      };
      f_ok += holds("fmisspec_sin", f_avg);
      o_ok += holds("omega_misspec", o_avg);
    }
    pass = pass && f_ok >= 4 && o_ok >= 4;
    detail << st << " f=" << f_ok << "/5 omega=" << o_ok << "/5 (";
    for (const auto& m : ms) detail << m.name << ":" << fmt(f_avg[m.name]) << "," << fmt(o_avg[m.name]) << " ";
    detail << ") ";
  }
  return {pass, detail.str()};
}

// The Gaussian radius with default constants contains the true 1-D
// environment in at least 1 - eta - 0.05 of 200 resamples at N = 500.
Outcome radius_coverage() {
  ConcentrationConfig cc;
  cc.n_low = cc.n_high = 500;
  const double eps = gaussian_radii(cc).eps_low;
  const double need = 1.0 - cc.eta_low - 0.05;
  Rng rng(77);
  std::ostringstream detail;
  detail << "eps=" << fmt(eps) << " need=" << fmt(need);
  bool pass = true;
  for (auto [mu, sd] : {std::pair{0.0, 1.0}, std::pair{1.0, 0.5}, std::pair{-0.5, 1.5}}) {
    int covered = 0;
    for (int r = 0; r < 200; ++r) {
      const Mat x = (sd * standard_normal(500, 1, rng)).array() + mu;
      const double m = x.mean();
      const double v = (x.array() - m).square().sum() / 499.0;
      Vec a(1), c(1);
      a << m;
      c << mu;
      const double d = std::sqrt(geometry::gelbrich_distance_sq<double>(
          a, Mat::Constant(1, 1, v), c, Mat::Constant(1, 1, sd * sd)));
      covered += d <= eps;
    }
    pass = pass && covered / 200.0 >= need;
    detail << " N(" << mu << "," << sd << "^2)=" << covered << "/200";
  }
  return {pass, detail.str()};
}

int run_cli(const std::string& args, std::string* out = nullptr) {
  FILE* p = popen((std::string(ROBABS_CLI) + " " + args + " 2>&1").c_str(), "r");
  if (p == nullptr) return -1;
  std::string text;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) text.append(buf, n);
  const int status = pclose(p);
  if (out) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_line(std::string s) {
  while (!s.empty() && s.back() == '\n') s.pop_back();
  const auto pos = s.rfind('\n');
  return pos == std::string::npos ? s : s.substr(pos + 1);
}

// dataset -> train -> eval twice from one root seed gives byte-identical
// results CSVs.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "robabs_acceptance";
  fs::remove_all(root);
  const std::string cfg = (fs::path(ROBABS_CONFIG_DIR) / "smoke.json").string();
  std::vector<std::string> csvs;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = root / std::to_string(rep);
    std::string out;
    if (run_cli("dataset slc --n 400 --seed 7 --out " + (dir / "data").string()) != 0) {
      return {false, "dataset failed"};
    }
    const std::string common = " --seed 7 --dataset-dir " + (dir / "data").string() + " --out " +
                               (dir / "runs").string();
    if (run_cli("train " + cfg + common, &out) != 0) return {false, "train failed: " + out};
    const std::string train_dir = last_line(out);
    if (run_cli("eval " + cfg + common + " --jobs " + std::to_string(rep + 1) + " --maps " + train_dir,
                &out) != 0) {
      return {false, "eval failed: " + out};
    }
    csvs.push_back(io::read_text(fs::path(last_line(out)) / "results.csv"));
  }
  const bool same = csvs[0] == csvs[1] && !csvs[0].empty();
  return {same, std::string(same ? "identical" : "different") + " results.csv (" +
                    std::to_string(std::count(csvs[0].begin(), csvs[0].end(), '\n') - 1) + " rows)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, Outcome (*)()>> criteria = {
      {"geometry_oracles", geometry_oracles},
      {"gradient_suite", gradient_suite},
      {"zero_radius_equivalence", zero_radius},
      {"exact_recovery", exact_recovery},
      {"feasibility", feasibility},
      {"table_orderings", table_orderings},
      {"misspecification_orderings", misspecification},
      {"radius_coverage", radius_coverage},
      {"end_to_end_determinism", determinism},
  };
  // Optional arguments select criteria by name.
  const std::vector<std::string> only(argv + 1, argv + argc);
  bool all = true;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(secs)
              << "s]" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
