#include "robabs/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "robabs/geometry.hpp"
#include "robabs/random.hpp"

namespace robabs {

namespace {

using geometry::psd_sqrt;
using geometry::symmetrize;

double gaussian_objective_at(const Mat& t, const GaussianEnv& low, const GaussianEnv& high,
                             const std::vector<PushforwardTerm>& terms) {
  double total = 0.0;
  for (const auto& term : terms) {
    const Vec low_mean = t * (term.low_map * low.mean() + term.low_shift);
    const Mat low_cov =
        symmetrize(Mat(t * term.low_map * low.cov() * term.low_map.transpose() * t.transpose()));
    const Vec high_mean = term.high_map * high.mean() + term.high_shift;
    const Mat high_cov = symmetrize(Mat(term.high_map * high.cov() * term.high_map.transpose()));
    total += term.q * geometry::gelbrich_distance_sq<double>(low_mean, low_cov, high_mean, high_cov);
  }
  return total;
}

// The empirical objective only depends on first and second (cross-)moments of
// the perturbed samples, so T-steps reduce to a quadratic in T:
//   F(T) = Tr(T C_ll T^T) - 2 Tr(T C_lh) + c_hh.
struct EmpiricalQuadratic {
  Mat c_ll;
  Mat c_lh;
  double c_hh = 0.0;

  double value(const Mat& t) const {
    return std::max(0.0, (t * c_ll * t.transpose()).trace() - 2.0 * (t * c_lh).trace() + c_hh);
  }
  Mat gradient(const Mat& t) const { return 2.0 * (t * c_ll - c_lh.transpose()); }
};

EmpiricalQuadratic empirical_quadratic(const Mat& y_low, const Mat& y_high,
                                       const std::vector<PushforwardTerm>& terms) {
  const double n = static_cast<double>(y_low.rows());
  const Vec mean_low = y_low.colwise().mean().transpose();
  const Vec mean_high = y_high.colwise().mean().transpose();
  const Mat m_ll = y_low.transpose() * y_low / n;
  const Mat m_lh = y_low.transpose() * y_high / n;
  const Mat m_hh = y_high.transpose() * y_high / n;
  const Eigen::Index l = y_low.cols();
  const Eigen::Index h = y_high.cols();
  EmpiricalQuadratic quad{Mat::Zero(l, l), Mat::Zero(l, h), 0.0};
  for (const auto& term : terms) {
    const Mat& a = term.low_map;
    const Vec& b = term.low_shift;
    const Mat& g = term.high_map;
    const Vec& d = term.high_shift;
    const Vec a_mean = a * mean_low;
    const Vec g_mean = g * mean_high;
    quad.c_ll += term.q * (a * m_ll * a.transpose() + a_mean * b.transpose() +
                           b * a_mean.transpose() + b * b.transpose());
    quad.c_lh += term.q * (a * m_lh * g.transpose() + a_mean * d.transpose() +
                           b * g_mean.transpose() + b * d.transpose());
    quad.c_hh += term.q * ((g * m_hh * g.transpose()).trace() + 2.0 * g_mean.dot(d) + d.squaredNorm());
  }
  return quad;
}

// Gradient of the empirical objective w.r.t. the perturbed samples, computed
// from aggregated coefficient matrices in O(N (l + h)^2).
std::pair<Mat, Mat> empirical_sample_gradients(const Mat& t, const Mat& y_low, const Mat& y_high,
                                               const std::vector<PushforwardTerm>& terms) {
  const Eigen::Index l = y_low.cols();
  const Eigen::Index h = y_high.cols();
  Mat ll = Mat::Zero(l, l);  // sum q A^T T^T T A
  Mat hl = Mat::Zero(h, l);  // sum q G^T T A
  Mat hh = Mat::Zero(h, h);  // sum q G^T G
  Vec low_const = Vec::Zero(l);
  Vec high_const = Vec::Zero(h);
  for (const auto& term : terms) {
    const Mat ta = t * term.low_map;
    const Vec shift = t * term.low_shift - term.high_shift;  // T b - d
    ll += term.q * ta.transpose() * ta;
    hl += term.q * term.high_map.transpose() * ta;
    hh += term.q * term.high_map.transpose() * term.high_map;
    low_const += term.q * ta.transpose() * shift;
    high_const += term.q * term.high_map.transpose() * shift;
  }
  const double w = 2.0 / static_cast<double>(y_low.rows());
  Mat g_low = y_low * ll - y_high * hl;
  g_low.rowwise() += low_const.transpose();
  Mat g_high = y_high * hh - y_low * hl.transpose();
  g_high.rowwise() -= high_const.transpose();
  return {w * g_low, w * g_high};
}

void check_finite(double value, const std::vector<double>& trace, const char* who) {
  if (!std::isfinite(value)) {
    throw ConvergenceError(std::string(who) + ": objective diverged", value, trace);
  }
}

// Shared outer loop: k_min descent steps on T, an optional adversary update,
// then the stopping test on the objective change.
template <typename DescentStep, typename AdversaryStep, typename Objective>
void run_min_max(const SolverConfig& cfg, Mat& t, FitResult& out, const char* who,
                 DescentStep&& descend, AdversaryStep&& ascend, Objective&& objective) {
  double prev = objective(t);
  out.trace.push_back(prev);
  check_finite(prev, out.trace, who);
  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    for (int k = 0; k < cfg.k_min; ++k) descend(t);
    ascend(t);
    const double value = objective(t);
    out.trace.push_back(value);
    out.outer_iterations = outer;
    check_finite(value, out.trace, who);
    if (!t.allFinite()) throw ConvergenceError(std::string(who) + ": map diverged", value, out.trace);
    if (std::abs(value - prev) < cfg.tol) {
      out.converged = true;
      break;
    }
    prev = value;
  }
  out.map = AbstractionMap(t);
}

Mat random_map(Eigen::Index h, Eigen::Index l, std::uint64_t seed) {
  Rng rng(derive_seed({seed, hash_string("t_init")}));
  return 0.1 * standard_normal(h, l, rng);
}

GaussianEnv adversary_update(const GaussianEnv& nominal, const Vec& mean, const Mat& root,
                             const Vec& mean_grad, const Mat& root_grad, double eps,
                             const SolverConfig& cfg) {
  if (eps == 0.0) return nominal;
  const Vec new_mean = mean + cfg.lr_env * mean_grad;
  Mat new_root = geometry::frobenius_prox(Mat(root + cfg.lr_env * root_grad), cfg.lambda());
  new_root = symmetrize(new_root);
  const Mat cov = geometry::psd_repair<double>(Mat(new_root * new_root));
  const auto projected =
      geometry::project_gelbrich_ball<double>({new_mean, cov}, nominal.moments(), eps);
  return GaussianEnv(projected.mean, projected.cov);
}

}  // namespace

void SolverConfig::validate() const {
  require(eps_low >= 0.0 && eps_high >= 0.0, "SolverConfig: radii must be nonnegative");
  require(lr_t > 0.0 && lr_env > 0.0, "SolverConfig: step sizes must be positive");
  require(k_min >= 1 && k_max >= 1, "SolverConfig: inner step counts must be >= 1");
  require(max_outer >= 0, "SolverConfig: max_outer must be nonnegative");
  require(tol > 0.0, "SolverConfig: tol must be positive");
  require(lambda() >= 0.0, "SolverConfig: prox weight must be nonnegative");
}

Mat initial_map(const ProblemInstance& inst, const SolverConfig& cfg) {
  const Eigen::Index l = inst.low_scm.dim();
  const Eigen::Index h = inst.high_scm.dim();
  switch (cfg.t_init) {
    case InitPolicy::kGiven:
      require(cfg.t_given.rows() == h && cfg.t_given.cols() == l,
              "initial_map: given map has the wrong shape");
      return cfg.t_given;
    case InitPolicy::kRandom:
      return random_map(h, l, cfg.seed);
    case InitPolicy::kMeanLeastSquares:
      break;
  }
  Vec mean_low;
  Vec mean_high;
  if (inst.is_gaussian()) {
    mean_low = inst.gaussian_env().low.mean();
    mean_high = inst.gaussian_env().high.mean();
  } else {
    mean_low = inst.empirical_env().low.samples().colwise().mean().transpose();
    mean_high = inst.empirical_env().high.samples().colwise().mean().transpose();
  }
  Mat mm = Mat::Zero(l, l);
  Mat nm = Mat::Zero(h, l);
  for (const auto& term : pushforward_terms(inst)) {
    const Vec m = term.low_map * mean_low + term.low_shift;
    const Vec n = term.high_map * mean_high + term.high_shift;
    mm += term.q * m * m.transpose();
    nm += term.q * n * m.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(mm, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  if (!(top > 0.0) || es.eigenvalues().minCoeff() < 1e-8 * top) {
    return random_map(h, l, cfg.seed);
  }
  return mm.ldlt().solve(nm.transpose()).transpose();
}

FitResult fit_diroca_gaussian(const ProblemInstance& inst, const SolverConfig& cfg) {
  cfg.validate();
  inst.validate();
  const JointGaussianEnv& nominal = inst.gaussian_env();
  const auto terms = pushforward_terms(inst);

  JointGaussianEnv env = nominal;
  Mat t = initial_map(inst, cfg);
  FitResult out;

  auto descend = [&](Mat& tm) {
    tm -= cfg.lr_t * gaussian_objective_gradients(tm, env, terms).t;
  };
  auto ascend = [&](const Mat& tm) {
    for (int k = 0; k < cfg.k_max; ++k) {
      const Mat root_low = psd_sqrt<double>(env.low.cov());
      const Mat root_high = psd_sqrt<double>(env.high.cov());
      const GaussianGradients g = gaussian_surrogate_gradients(
          tm, env.low.mean(), root_low, env.high.mean(), root_high, terms);
      env.low = adversary_update(nominal.low, env.low.mean(), root_low, g.mean_low, g.root_low,
                                 cfg.eps_low, cfg);
      env.high = adversary_update(nominal.high, env.high.mean(), root_high, g.mean_high,
                                  g.root_high, cfg.eps_high, cfg);
    }
    out.dist_low.push_back(std::sqrt(w2_sq(env.low, nominal.low)));
    out.dist_high.push_back(std::sqrt(w2_sq(env.high, nominal.high)));
  };
  auto objective = [&](const Mat& tm) { return gaussian_objective_at(tm, env.low, env.high, terms); };

  run_min_max(cfg, t, out, "fit_diroca_gaussian", descend, ascend, objective);
  out.worst_env = env;
  return out;
}

FitResult fit_diroca_empirical(const ProblemInstance& inst, const SolverConfig& cfg) {
  cfg.validate();
  inst.validate();
  const JointEmpiricalEnv& nominal = inst.empirical_env();
  const auto terms = pushforward_terms(inst);
  const Mat& u_low = nominal.low.samples();
  const Mat& u_high = nominal.high.samples();
  const double n = static_cast<double>(u_low.rows());
  const double bound_low = cfg.eps_low * std::sqrt(n);
  const double bound_high = cfg.eps_high * std::sqrt(n);

  PerturbationPair theta{Mat::Zero(u_low.rows(), u_low.cols()),
                         Mat::Zero(u_high.rows(), u_high.cols())};
  EmpiricalQuadratic quad = empirical_quadratic(u_low, u_high, terms);
  Mat t = initial_map(inst, cfg);
  FitResult out;

  auto descend = [&](Mat& tm) { tm -= cfg.lr_t * quad.gradient(tm); };
  auto ascend = [&](const Mat& tm) {
    for (int k = 0; k < cfg.k_max; ++k) {
      auto [g_low, g_high] =
          empirical_sample_gradients(tm, u_low + theta.theta_low, u_high + theta.theta_high, terms);
      // Steps are taken on the per-sample scale: the objective averages over
      // rows, so its raw gradient per row is O(1/N).
      theta.theta_low =
          geometry::project_frobenius_ball(Mat(theta.theta_low + cfg.lr_env * n * g_low), bound_low);
      theta.theta_high = geometry::project_frobenius_ball(
          Mat(theta.theta_high + cfg.lr_env * n * g_high), bound_high);
    }
    if (cfg.eps_low > 0.0 || cfg.eps_high > 0.0) {
      quad = empirical_quadratic(u_low + theta.theta_low, u_high + theta.theta_high, terms);
    }
    out.dist_low.push_back(theta.theta_low.norm() / std::sqrt(n));
    out.dist_high.push_back(theta.theta_high.norm() / std::sqrt(n));
  };
  auto objective = [&](const Mat& tm) { return quad.value(tm); };

  run_min_max(cfg, t, out, "fit_diroca_empirical", descend, ascend, objective);
  out.perturbation = std::move(theta);
  return out;
}

FitResult fit_grad(const ProblemInstance& inst, const SolverConfig& cfg) {
  cfg.validate();
  inst.validate();
  const auto terms = pushforward_terms(inst);
  Mat t = initial_map(inst, cfg);
  FitResult out;
  auto no_adversary = [](const Mat&) {};
  if (inst.is_gaussian()) {
    const JointGaussianEnv& env = inst.gaussian_env();
    auto descend = [&](Mat& tm) {
      tm -= cfg.lr_t * gaussian_objective_gradients(tm, env, terms).t;
    };
    auto objective = [&](const Mat& tm) {
      return gaussian_objective_at(tm, env.low, env.high, terms);
    };
    run_min_max(cfg, t, out, "fit_grad", descend, no_adversary, objective);
  } else {
    const JointEmpiricalEnv& env = inst.empirical_env();
    const EmpiricalQuadratic quad = empirical_quadratic(env.low.samples(), env.high.samples(), terms);
    auto descend = [&](Mat& tm) { tm -= cfg.lr_t * quad.gradient(tm); };
    auto objective = [&](const Mat& tm) { return quad.value(tm); };
    run_min_max(cfg, t, out, "fit_grad", descend, no_adversary, objective);
  }
  return out;
}

FitResult fit_bary(const ProblemInstance& inst, const SolverConfig& cfg) {
  cfg.validate();
  inst.validate();
  const int l = inst.low_scm.dim();
  const int h = inst.high_scm.dim();
  FitResult out;

  if (inst.is_gaussian()) {
    const JointGaussianEnv& env = inst.gaussian_env();
    auto pushed = [](const LinearScm& scm, const Intervention& iv, const GaussianEnv& e) {
      const GaussianEnv adjusted = apply_intervention_exo(iv, e);
      const Mat mix = reduced_transform(scm, iv);
      return geometry::Moments<double>{mix * adjusted.mean(),
                                       symmetrize(Mat(mix * adjusted.cov() * mix.transpose()))};
    };
    std::vector<geometry::Moments<double>> lows;
    for (const auto& iota : inst.omega.low()) lows.push_back(pushed(inst.low_scm, iota, env.low));
    std::vector<geometry::Moments<double>> highs;
    for (const auto& eta : inst.omega.high()) highs.push_back(pushed(inst.high_scm, eta, env.high));

    const auto bary_low = geometry::barycenter_gaussian<double>(
        lows, Vec::Constant(static_cast<Eigen::Index>(lows.size()), 1.0 / lows.size()));
    const auto bary_high = geometry::barycenter_gaussian<double>(
        highs, Vec::Constant(static_cast<Eigen::Index>(highs.size()), 1.0 / highs.size()));

    // Top-h principal directions of the low-level barycentric covariance.
    Eigen::SelfAdjointEigenSolver<Mat> es(bary_low.moments.cov);
    Mat v(l, h);
    for (int j = 0; j < h; ++j) {
      Vec col = es.eigenvectors().col(l - 1 - j);
      Eigen::Index arg = 0;
      col.cwiseAbs().maxCoeff(&arg);
      if (col(arg) < 0.0) col = -col;
      v.col(j) = col;
    }
    const Mat proj = symmetrize(Mat(v.transpose() * bary_low.moments.cov * v));
    Eigen::SelfAdjointEigenSolver<Mat> ps(proj, Eigen::EigenvaluesOnly);
    if (ps.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, ps.eigenvalues().maxCoeff())) {
      throw InvalidArgument("fit_bary: projected low-level covariance is singular");
    }
    const Mat a = psd_sqrt<double>(bary_high.moments.cov) * geometry::psd_inv_sqrt<double>(proj);
    out.map = AbstractionMap(a * v.transpose());
    out.trace.push_back(gaussian_objective(out.map, env, inst));
    out.converged = true;
    return out;
  }

  const JointEmpiricalEnv& env = inst.empirical_env();
  Mat low_avg = Mat::Zero(l, l);
  for (const auto& iota : inst.omega.low()) low_avg += reduced_transform(inst.low_scm, iota);
  low_avg /= static_cast<double>(inst.omega.low().size());
  Mat high_avg = Mat::Zero(h, h);
  for (const auto& eta : inst.omega.high()) high_avg += reduced_transform(inst.high_scm, eta);
  high_avg /= static_cast<double>(inst.omega.high().size());
  PushforwardTerm avg{1.0, low_avg, Vec::Zero(l), high_avg, Vec::Zero(h)};
  const EmpiricalQuadratic quad = empirical_quadratic(env.low.samples(), env.high.samples(), {avg});

  Mat t = initial_map(inst, cfg);
  auto descend = [&](Mat& tm) { tm -= cfg.lr_t * quad.gradient(tm); };
  auto objective = [&](const Mat& tm) { return quad.value(tm); };
  run_min_max(cfg, t, out, "fit_bary", descend, [](const Mat&) {}, objective);
  return out;
}

AbstractionMap fit_abslin(const Mat& endo_low_obs, const Mat& endo_high_obs,
                          AbsLinVariant variant, double reg) {
  require(endo_low_obs.rows() == endo_high_obs.rows(), "fit_abslin: row counts differ");
  require(endo_low_obs.rows() > endo_low_obs.cols(), "fit_abslin: need more rows than columns");
  require(reg >= 0.0, "fit_abslin: negative regularization");
  Eigen::ColPivHouseholderQR<Mat> qr(endo_low_obs);
  if (qr.rank() < endo_low_obs.cols()) throw InvalidArgument("fit_abslin: rank-deficient data");
  Mat t = qr.solve(endo_high_obs).transpose();
  if (variant == AbsLinVariant::kPerfect || reg == 0.0) return AbstractionMap(t);

  // ISTA on (1/2n)|X T^T - Y|_F^2 + reg |T|_1, warm-started at least squares.
  const double n = static_cast<double>(endo_low_obs.rows());
  const Mat gram = endo_low_obs.transpose() * endo_low_obs / n;
  const Mat cross = endo_high_obs.transpose() * endo_low_obs / n;
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  const double step = 1.0 / es.eigenvalues().maxCoeff();
  for (int it = 0; it < 200000; ++it) {
    const Mat moved = t - step * (t * gram - cross);
    const Mat next = moved.unaryExpr([&](double x) {
      const double shrink = std::abs(x) - step * reg;
      return shrink > 0.0 ? std::copysign(shrink, x) : 0.0;
    });
    const double change = (next - t).cwiseAbs().maxCoeff();
    t = next;
    if (change < 1e-13) break;
  }
  return AbstractionMap(t);
}

}  // namespace robabs
