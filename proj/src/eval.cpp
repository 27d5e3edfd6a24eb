#include "robabs/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "robabs/geometry.hpp"
#include "robabs/random.hpp"

namespace robabs {

namespace {

geometry::Moments<double> fit_moments(const Mat& x) {
  require(x.rows() >= 2, "covariance estimation needs at least two rows");
  const Vec mean = x.colwise().mean().transpose();
  const Mat centered = x.rowwise() - mean.transpose();
  return {mean, geometry::symmetrize(Mat(centered.transpose() * centered /
                                         static_cast<double>(x.rows() - 1)))};
}

void check_pairs(const Mat& t, const std::vector<Mat>& x_low, const std::vector<Mat>& x_high,
                 const Vec& q) {
  require(x_low.size() == x_high.size(), "abstraction error: unpaired data");
  require(static_cast<Eigen::Index>(x_low.size()) == q.size(), "abstraction error: q size");
  for (std::size_t i = 0; i < x_low.size(); ++i) {
    require(x_low[i].rows() > 0 && x_high[i].rows() > 0, "abstraction error: empty data");
    require(x_low[i].cols() == t.cols() && x_high[i].cols() == t.rows(),
            "abstraction error: dimension mismatch");
  }
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Vec uniform_q(std::size_t n) {
  return Vec::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
}

// Test pairs (low iota, high omega(iota)) for an omega over the bundle lists.
void paired_test(const std::vector<Mat>& low, const std::vector<Mat>& high,
                 const InterventionMap& omega, std::vector<Mat>& out_low,
                 std::vector<Mat>& out_high) {
  out_low.clear();
  out_high.clear();
  for (std::size_t i = 0; i < omega.size(); ++i) {
    out_low.push_back(low.at(i));
    out_high.push_back(high.at(static_cast<std::size_t>(omega.image()[i])));
  }
}

double score(Setting setting, const Mat& t, const std::vector<Mat>& xl, const std::vector<Mat>& xh) {
  const Vec q = uniform_q(xl.size());
  return setting == Setting::kGaussian ? abstraction_error_gaussian(t, xl, xh, q)
                                       : abstraction_error_empirical(t, xl, xh, q);
}

}  // namespace

std::string NoiseSpec::name() const {
  switch (kind) {
    case NoiseKind::kGaussian:
      return "gaussian";
    case NoiseKind::kStudentT:
      return "student_t";
    case NoiseKind::kExponential:
      return "exponential";
  }
  return "gaussian";
}

NoiseSpec NoiseSpec::parse(const std::string& name) {
  if (name == "gaussian") return {NoiseKind::kGaussian};
  if (name == "student_t") return {NoiseKind::kStudentT};
  if (name == "exponential") return {NoiseKind::kExponential};
  throw InvalidArgument("unknown noise kind '" + name + "'");
}

void NoiseSpec::validate() const {
  if (kind == NoiseKind::kStudentT) require(df > 2.0, "student_t noise needs df > 2");
  if (kind == NoiseKind::kExponential) require(rate > 0.0, "exponential noise needs rate > 0");
}

void ContaminationSpec::validate() const {
  require(alpha >= 0.0 && alpha <= 1.0, "contamination alpha must lie in [0, 1]");
  require(sigma >= 0.0, "contamination sigma must be nonnegative");
  noise.validate();
}

Mat contaminate(const Mat& x, const ContaminationSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Mat noise(x.rows(), x.cols());
  switch (spec.noise.kind) {
    case NoiseKind::kGaussian:
      noise = standard_normal(x.rows(), x.cols(), rng);
      break;
    case NoiseKind::kStudentT: {
      std::student_t_distribution<double> dist(spec.noise.df);
      const double scale = std::sqrt((spec.noise.df - 2.0) / spec.noise.df);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) noise(i, j) = scale * dist(rng);
      }
      break;
    }
    case NoiseKind::kExponential: {
      // Centered and standardized: (E - 1/rate) * rate has mean 0, std 1.
      std::exponential_distribution<double> dist(spec.noise.rate);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          noise(i, j) = (dist(rng) - 1.0 / spec.noise.rate) * spec.noise.rate;
        }
      }
      break;
    }
  }
  return x + (spec.alpha * spec.sigma) * noise;
}

double abstraction_error_gaussian(const Mat& t, const std::vector<Mat>& x_low,
                                  const std::vector<Mat>& x_high, const Vec& q) {
  check_pairs(t, x_low, x_high, q);
  double total = 0.0;
  for (std::size_t i = 0; i < x_low.size(); ++i) {
    const auto low = fit_moments(x_low[i] * t.transpose());
    const auto high = fit_moments(x_high[i]);
    total += q(static_cast<Eigen::Index>(i)) *
             std::sqrt(std::max(0.0, geometry::gelbrich_distance_sq(low, high)));
  }
  return total;
}

double abstraction_error_empirical(const Mat& t, const std::vector<Mat>& x_low,
                                   const std::vector<Mat>& x_high, const Vec& q) {
  check_pairs(t, x_low, x_high, q);
  double total = 0.0;
  for (std::size_t i = 0; i < x_low.size(); ++i) {
    require(x_low[i].rows() == x_high[i].rows(), "abstraction error: row counts differ");
    total += q(static_cast<Eigen::Index>(i)) * (x_low[i] * t.transpose() - x_high[i]).norm() /
             std::sqrt(static_cast<double>(x_low[i].rows()));
  }
  return total;
}

Mat f_misspec_sample(const LinearScm& scm, double k, Nonlinearity fnl, const GaussianEnv& env,
                     const Intervention& iota, int n, std::uint64_t seed) {
  require(n >= 1, "f_misspec_sample: n must be positive");
  require(env.dim() == scm.dim(), "f_misspec_sample: environment dimension mismatch");
  const GaussianEnv adjusted = apply_intervention_exo(iota, env);
  const Mat root = geometry::psd_sqrt<double>(adjusted.cov());
  Rng rng(seed);
  Mat u = standard_normal(n, scm.dim(), rng) * root;
  u.rowwise() += adjusted.mean().transpose();

  const Vec mask = iota.free_mask(scm.dim());
  const Vec pins = iota.pinned_values(scm.dim());
  const Mat& b = scm.adjacency();
  Mat x = Mat::Zero(n, scm.dim());
  for (int j : scm.topological_order()) {
    if (mask(j) == 0.0) {
      x.col(j).setConstant(pins(j));
      continue;
    }
    const Vec drive = x * b.col(j);
    for (int r = 0; r < n; ++r) {
      const double f = fnl == Nonlinearity::kSin ? std::sin(drive(r)) : std::tanh(drive(r));
      x(r, j) = k * f + u(r, j);
    }
  }
  return x;
}

InterventionMap omega_misspec(const InterventionMap& omega, int n_misalign, int delta,
                              std::uint64_t seed) {
  require(n_misalign >= 0 && delta >= 0, "omega_misspec: negative count or tolerance");
  std::vector<std::size_t> movable;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (!omega.low()[i].is_null()) movable.push_back(i);
  }
  require(static_cast<std::size_t>(n_misalign) <= movable.size(),
          "omega_misspec: more reassignments than non-null interventions");
  Rng rng(seed);
  // Partial Fisher-Yates with explicit modulo draws keeps the choice portable.
  for (int s = 0; s < n_misalign; ++s) {
    const std::size_t pick = s + static_cast<std::size_t>(rng() % (movable.size() - s));
    std::swap(movable[s], movable[pick]);
  }
  std::vector<int> image = omega.image();
  const auto& high = omega.high();
  for (int s = 0; s < n_misalign; ++s) {
    const std::size_t i = movable[s];
    const int size = omega.low()[i].size();
    std::vector<int> candidates;
    int best_gap = -1;
    for (int j = 0; j < static_cast<int>(high.size()); ++j) {
      if (j == omega.image()[i]) continue;
      const int gap = std::abs(high[j].size() - size);
      if (gap <= delta) candidates.push_back(j);
      if (best_gap < 0 || gap < best_gap) best_gap = gap;
    }
    if (candidates.empty()) {
      require(best_gap >= 0, "omega_misspec: no alternative high-level intervention");
      for (int j = 0; j < static_cast<int>(high.size()); ++j) {
        if (j != omega.image()[i] && std::abs(high[j].size() - size) == best_gap) {
          candidates.push_back(j);
        }
      }
    }
    image[i] = candidates[rng() % candidates.size()];
  }
  return omega.with_image(std::move(image), false);
}

std::string setting_name(Setting s) { return s == Setting::kGaussian ? "gaussian" : "empirical"; }

Setting parse_setting(const std::string& name) {
  if (name == "gaussian") return Setting::kGaussian;
  if (name == "empirical") return Setting::kEmpirical;
  throw InvalidArgument("unknown setting '" + name + "'");
}

FoldData split_fold(const DatasetSamples& samples, int k, int fold) {
  require(k >= 2, "split_fold: need at least two folds");
  require(fold >= 0 && fold < k, "split_fold: fold index out of range");
  FoldData out;
  auto split = [&](const std::vector<Mat>& all, std::vector<Mat>& train, std::vector<Mat>& test) {
    for (const Mat& x : all) {
      const Eigen::Index n = x.rows();
      const Eigen::Index lo = n * fold / k;
      const Eigen::Index hi = n * (fold + 1) / k;
      require(hi - lo >= 2 && n - (hi - lo) >= 2, "split_fold: fold too small");
      test.push_back(x.middleRows(lo, hi - lo));
      Mat tr(n - (hi - lo), x.cols());
      tr << x.topRows(lo), x.bottomRows(n - hi);
      train.push_back(std::move(tr));
    }
  };
  split(samples.low, out.train_low, out.test_low);
  split(samples.high, out.train_high, out.test_high);
  return out;
}

ProblemInstance make_instance(const DatasetBundle& bundle, const FoldData& data, Setting setting) {
  const Mat u_low = abduct(bundle.low_scm, data.train_low.at(null_index(bundle.omega.low())));
  const Mat u_high = abduct(bundle.high_scm, data.train_high.at(null_index(bundle.omega.high())));
  const EmpiricalEnv low(u_low);
  const EmpiricalEnv high(u_high);
  AnyJointEnv env;
  if (setting == Setting::kGaussian) {
    env = JointGaussianEnv{low.fit_gaussian(), high.fit_gaussian()};
  } else {
    const Eigen::Index n = std::min(u_low.rows(), u_high.rows());
    env = JointEmpiricalEnv{EmpiricalEnv(u_low.topRows(n)), EmpiricalEnv(u_high.topRows(n))};
  }
  return ProblemInstance::uniform(bundle.low_scm, bundle.high_scm, bundle.omega, std::move(env));
}

FitResult fit_method(const MethodSpec& method, const ProblemInstance& inst, const FoldData& data,
                     const DatasetBundle& bundle) {
  switch (method.kind) {
    case MethodKind::kDiroca:
      return inst.is_gaussian() ? fit_diroca_gaussian(inst, method.cfg)
                                : fit_diroca_empirical(inst, method.cfg);
    case MethodKind::kGrad:
      return fit_grad(inst, method.cfg);
    case MethodKind::kBary:
      return fit_bary(inst, method.cfg);
    case MethodKind::kAbsLinPerfect:
    case MethodKind::kAbsLinNoisy: {
      const Mat& xl = data.train_low.at(null_index(bundle.omega.low()));
      const Mat& xh = data.train_high.at(null_index(bundle.omega.high()));
      const Eigen::Index n = std::min(xl.rows(), xh.rows());
      FitResult out;
      out.map = fit_abslin(xl.topRows(n), xh.topRows(n),
                           method.kind == MethodKind::kAbsLinPerfect ? AbsLinVariant::kPerfect
                                                                     : AbsLinVariant::kNoisy,
                           method.abslin_reg);
      out.converged = true;
      return out;
    }
  }
  throw InvalidArgument("fit_method: unknown method kind");
}

void GridSpec::validate() const {
  require(!alphas.empty() && !sigmas.empty() && !noises.empty(), "grid: empty axis");
  require(folds >= 2, "grid: need at least two folds");
  require(samples_per_cell >= 1, "grid: samples_per_cell must be positive");
  for (double a : alphas) require(a >= 0.0 && a <= 1.0, "grid: alpha outside [0, 1]");
  for (double s : sigmas) require(s >= 0.0, "grid: negative sigma");
  for (const auto& n : noises) n.validate();
}

std::uint64_t cell_seed(std::uint64_t root, const std::string& method, int fold,
                        std::size_t alpha_idx, std::size_t sigma_idx, const std::string& noise,
                        std::size_t sample_idx) {
  return derive_seed({root, hash_string(method), static_cast<std::uint64_t>(fold), alpha_idx,
                      sigma_idx, hash_string(noise), sample_idx});
}

std::vector<ExperimentResult> evaluate_map(const AbstractionMap& map, const MethodSpec& method,
                                           const FoldData& data, const InterventionMap& omega,
                                           const GridSpec& grid, int fold) {
  grid.validate();
  std::vector<Mat> xl;
  std::vector<Mat> xh;
  paired_test(data.test_low, data.test_high, omega, xl, xh);
  std::vector<ExperimentResult> out;
  for (std::size_t a = 0; a < grid.alphas.size(); ++a) {
    for (std::size_t s = 0; s < grid.sigmas.size(); ++s) {
      for (const auto& noise : grid.noises) {
        for (int m = 0; m < grid.samples_per_cell; ++m) {
          const std::uint64_t seed = cell_seed(grid.root_seed, method.name, fold, a, s,
                                               noise.name(), static_cast<std::size_t>(m));
          std::vector<Mat> cl(xl.size());
          std::vector<Mat> ch(xh.size());
          for (std::size_t i = 0; i < xl.size(); ++i) {
            ContaminationSpec spec{grid.alphas[a], grid.sigmas[s], noise,
                                   derive_seed({seed, hash_string("low"), i})};
            cl[i] = contaminate(xl[i], spec);
            spec.seed = derive_seed({seed, hash_string("high"), i});
            ch[i] = grid.contaminate_high ? contaminate(xh[i], spec) : xh[i];
          }
          out.push_back({method.name, method.cfg.eps_low, method.cfg.eps_high, fold,
                         grid.alphas[a], grid.sigmas[s], noise.name(), seed,
                         score(grid.setting, map.t(), cl, ch)});
        }
      }
    }
  }
  return out;
}

std::vector<ExperimentResult> evaluate_f_misspec(const AbstractionMap& map,
                                                 const MethodSpec& method,
                                                 const DatasetBundle& bundle, int n_test,
                                                 const FMisspecSpec& spec, const GridSpec& grid,
                                                 int fold) {
  const std::string kind =
      std::string("fmisspec_") + (spec.fnl == Nonlinearity::kSin ? "sin" : "tanh");
  const auto& omega = bundle.omega;
  std::vector<ExperimentResult> out;
  for (std::size_t s = 0; s < spec.strengths.size(); ++s) {
    for (int m = 0; m < grid.samples_per_cell; ++m) {
      // Shared across methods, as for the omega corruptions.
      const std::uint64_t seed =
          cell_seed(grid.root_seed, kind, fold, 0, s, kind, static_cast<std::size_t>(m));
      std::vector<Mat> xl;
      std::vector<Mat> xh;
      for (std::size_t i = 0; i < omega.size(); ++i) {
        xl.push_back(f_misspec_sample(bundle.low_scm, spec.strengths[s], spec.fnl,
                                      bundle.default_env.low, omega.low()[i], n_test,
                                      derive_seed({seed, hash_string("low"), i})));
        xh.push_back(f_misspec_sample(bundle.high_scm, spec.strengths[s], spec.fnl,
                                      bundle.default_env.high, omega.high_of(i), n_test,
                                      derive_seed({seed, hash_string("high"), i})));
      }
      out.push_back({method.name, method.cfg.eps_low, method.cfg.eps_high, fold, 0.0,
                     spec.strengths[s], kind, seed, score(grid.setting, map.t(), xl, xh)});
    }
  }
  return out;
}

std::vector<ExperimentResult> evaluate_omega_misspec(const AbstractionMap& map,
                                                     const MethodSpec& method,
                                                     const FoldData& data,
                                                     const InterventionMap& omega,
                                                     const OmegaMisspecSpec& spec,
                                                     const GridSpec& grid, int fold) {
  const std::string kind = "omega_misspec";
  std::vector<ExperimentResult> out;
  for (std::size_t s = 0; s < spec.n_misalign.size(); ++s) {
    for (int m = 0; m < grid.samples_per_cell; ++m) {
      // The corruption depends on the sample index only, so every method is
      // scored against the same corrupted maps.
      const std::uint64_t seed =
          cell_seed(grid.root_seed, kind, fold, 0, s, kind, static_cast<std::size_t>(m));
      const InterventionMap bad = omega_misspec(omega, spec.n_misalign[s], spec.delta, seed);
      std::vector<Mat> xl;
      std::vector<Mat> xh;
      paired_test(data.test_low, data.test_high, bad, xl, xh);
      out.push_back({method.name, method.cfg.eps_low, method.cfg.eps_high, fold, 0.0,
                     static_cast<double>(spec.n_misalign[s]), kind, seed,
                     score(grid.setting, map.t(), xl, xh)});
    }
  }
  return out;
}

std::vector<ExperimentResult> run_grid(const DatasetBundle& bundle, const DatasetSamples& samples,
                                       const std::vector<MethodSpec>& methods,
                                       const GridSpec& grid, int jobs) {
  grid.validate();
  require(jobs >= 1, "run_grid: jobs must be positive");
  const std::size_t n_tasks = methods.size() * static_cast<std::size_t>(grid.folds);
  std::vector<std::vector<ExperimentResult>> slots(n_tasks);
  std::vector<std::exception_ptr> errors(n_tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t task = next++; task < n_tasks; task = next++) {
      const int fold = static_cast<int>(task / methods.size());
      const MethodSpec& method = methods[task % methods.size()];
      try {
        const FoldData data = split_fold(samples, grid.folds, fold);
        const ProblemInstance inst = make_instance(bundle, data, grid.setting);
        const FitResult fit = fit_method(method, inst, data, bundle);
        slots[task] = evaluate_map(fit.map, method, data, bundle.omega, grid, fold);
      } catch (...) {
        errors[task] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::min<int>(jobs, static_cast<int>(n_tasks)); ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<ExperimentResult> out;
  for (auto& s : slots) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::string results_to_csv(const std::vector<ExperimentResult>& results) {
  std::ostringstream os;
  os << kResultsHeader << '\n';
  for (const auto& r : results) {
    os << r.method << ',' << fmt(r.eps_low) << ',' << fmt(r.eps_high) << ',' << r.fold << ','
       << fmt(r.alpha) << ',' << fmt(r.sigma) << ',' << r.noise_kind << ',' << r.seed << ','
       << fmt(r.error) << '\n';
  }
  return os.str();
}

std::vector<ExperimentResult> results_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && line == kResultsHeader,
          "results CSV: unexpected header");
  std::vector<ExperimentResult> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    require(f.size() == 9, "results CSV: expected 9 fields");
    ExperimentResult r;
    r.method = f[0];
    r.eps_low = std::stod(f[1]);
    r.eps_high = std::stod(f[2]);
    r.fold = std::stoi(f[3]);
    r.alpha = std::stod(f[4]);
    r.sigma = std::stod(f[5]);
    r.noise_kind = f[6];
    r.seed = std::stoull(f[7]);
    r.error = std::stod(f[8]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<CellSummary> summarize(const std::vector<ExperimentResult>& results) {
  using Key = std::tuple<std::string, double, double, double, double, std::string>;
  std::map<Key, std::size_t> index;
  std::vector<CellSummary> cells;
  std::vector<std::vector<double>> values;
  for (const auto& r : results) {
    const Key key{r.method, r.eps_low, r.eps_high, r.alpha, r.sigma, r.noise_kind};
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, cells.size()).first;
      cells.push_back({r.method, r.eps_low, r.eps_high, r.alpha, r.sigma, r.noise_kind});
      values.emplace_back();
    }
    values[it->second].push_back(r.error);
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& v = values[c];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double e : v) ss += (e - mean) * (e - mean);
    cells[c].count = static_cast<int>(v.size());
    cells[c].mean = mean;
    cells[c].std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  }
  return cells;
}

}  // namespace robabs
