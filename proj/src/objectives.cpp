#include <algorithm>
#include <cmath>

#include "robabs/geometry.hpp"
#include "robabs/solvers.hpp"

namespace robabs {

namespace {

using geometry::psd_sqrt;
using geometry::symmetrize;

void check_map_shape(const Mat& t, const std::vector<PushforwardTerm>& terms) {
  require(!terms.empty(), "objective: no interventions");
  require(t.rows() == terms.front().high_map.rows() && t.cols() == terms.front().low_map.rows(),
          "objective: abstraction map shape does not match the model pair");
}

// sqrt(c / a) with a floor so that a degenerate pushforward does not produce
// an infinite coefficient.
double safe_ratio_sqrt(double num, double den) {
  const double floor = 1e-12 * (1.0 + std::abs(num));
  return std::sqrt(std::max(num, 0.0) / std::max(den, floor));
}

}  // namespace

AbstractionMap::AbstractionMap(Mat t) : t_(std::move(t)) {
  require(t_.rows() >= 1 && t_.cols() >= 1, "AbstractionMap: empty matrix");
  require(t_.rows() <= t_.cols(), "AbstractionMap: high-level dimension exceeds low-level");
  require(t_.allFinite(), "AbstractionMap: non-finite entry");
}

ProblemInstance ProblemInstance::uniform(LinearScm low, LinearScm high, InterventionMap omega,
                                         AnyJointEnv env) {
  ProblemInstance inst{std::move(low), std::move(high), std::move(omega), std::move(env), Vec()};
  const auto k = static_cast<Eigen::Index>(inst.omega.size());
  inst.q = Vec::Constant(k, 1.0 / static_cast<double>(k));
  inst.validate();
  return inst;
}

const JointGaussianEnv& ProblemInstance::gaussian_env() const {
  const auto* e = std::get_if<JointGaussianEnv>(&env);
  require(e != nullptr, "ProblemInstance: environment is not Gaussian");
  return *e;
}

const JointEmpiricalEnv& ProblemInstance::empirical_env() const {
  const auto* e = std::get_if<JointEmpiricalEnv>(&env);
  require(e != nullptr, "ProblemInstance: environment is not empirical");
  return *e;
}

void ProblemInstance::validate() const {
  require(omega.size() > 0, "ProblemInstance: empty intervention map");
  require(q.size() == static_cast<Eigen::Index>(omega.size()),
          "ProblemInstance: q must have one weight per low-level intervention");
  require((q.array() >= 0.0).all() && std::abs(q.sum() - 1.0) < 1e-9,
          "ProblemInstance: q must be a probability vector");
  for (const auto& iota : omega.low()) iota.check_dim(low_scm.dim());
  for (const auto& eta : omega.high()) eta.check_dim(high_scm.dim());
  require(high_scm.dim() <= low_scm.dim(), "ProblemInstance: high-level model is larger");
  std::visit(
      [&](const auto& e) {
        require(e.low.dim() == low_scm.dim(), "ProblemInstance: low environment dimension");
        require(e.high.dim() == high_scm.dim(), "ProblemInstance: high environment dimension");
      },
      env);
  if (const auto* e = std::get_if<JointEmpiricalEnv>(&env)) {
    require(e->low.count() == e->high.count(),
            "ProblemInstance: empirical levels need equal sample counts");
  }
}

std::vector<PushforwardTerm> pushforward_terms(const ProblemInstance& inst) {
  std::vector<PushforwardTerm> terms;
  terms.reserve(inst.omega.size());
  const int l = inst.low_scm.dim();
  const int h = inst.high_scm.dim();
  for (std::size_t i = 0; i < inst.omega.size(); ++i) {
    const Intervention& iota = inst.omega.low()[i];
    const Intervention& eta = inst.omega.high_of(i);
    const Mat low_mix = reduced_transform(inst.low_scm, iota);
    const Mat high_mix = reduced_transform(inst.high_scm, eta);
    PushforwardTerm term;
    term.q = inst.q(static_cast<Eigen::Index>(i));
    term.low_map = low_mix * iota.free_mask(l).asDiagonal();
    term.low_shift = low_mix * iota.pinned_values(l);
    term.high_map = high_mix * eta.free_mask(h).asDiagonal();
    term.high_shift = high_mix * eta.pinned_values(h);
    terms.push_back(std::move(term));
  }
  return terms;
}

double gaussian_objective(const AbstractionMap& t, const JointGaussianEnv& env,
                          const ProblemInstance& inst) {
  const auto terms = pushforward_terms(inst);
  check_map_shape(t.t(), terms);
  const Mat& tm = t.t();
  double total = 0.0;
  for (const auto& term : terms) {
    const Vec low_mean = tm * (term.low_map * env.low.mean() + term.low_shift);
    const Mat low_cov = symmetrize(Mat(tm * term.low_map * env.low.cov() *
                                       term.low_map.transpose() * tm.transpose()));
    const Vec high_mean = term.high_map * env.high.mean() + term.high_shift;
    const Mat high_cov =
        symmetrize(Mat(term.high_map * env.high.cov() * term.high_map.transpose()));
    total += term.q * geometry::gelbrich_distance_sq<double>(low_mean, low_cov, high_mean, high_cov);
  }
  return total;
}

double gaussian_surrogate_at_roots(const Mat& t, const Vec& mean_low, const Mat& root_low,
                                   const Vec& mean_high, const Mat& root_high,
                                   const std::vector<PushforwardTerm>& terms) {
  check_map_shape(t, terms);
  const Mat cov_low = root_low * root_low;
  const Mat cov_high = root_high * root_high;
  double total = 0.0;
  for (const auto& term : terms) {
    const Mat ta = t * term.low_map;
    const Vec r = ta * mean_low + t * term.low_shift - term.high_map * mean_high - term.high_shift;
    const double a = (ta * cov_low * ta.transpose()).trace();
    const double c = (term.high_map * cov_high * term.high_map.transpose()).trace();
    // |S_l^{1/2}|_F |S_h^{1/2}|_F = sqrt(Tr S_l) sqrt(Tr S_h)
    total += term.q * (r.squaredNorm() + a + c - 2.0 * std::sqrt(std::max(a, 0.0) * std::max(c, 0.0)));
  }
  return total;
}

double gaussian_surrogate(const AbstractionMap& t, const JointGaussianEnv& env,
                          const ProblemInstance& inst) {
  const auto terms = pushforward_terms(inst);
  return gaussian_surrogate_at_roots(t.t(), env.low.mean(), psd_sqrt<double>(env.low.cov()),
                                     env.high.mean(), psd_sqrt<double>(env.high.cov()), terms);
}

GaussianGradients gaussian_objective_gradients(const Mat& t, const JointGaussianEnv& env,
                                               const std::vector<PushforwardTerm>& terms) {
  check_map_shape(t, terms);
  GaussianGradients g;
  g.t = Mat::Zero(t.rows(), t.cols());
  g.mean_low = Vec::Zero(env.low.dim());
  g.mean_high = Vec::Zero(env.high.dim());
  for (const auto& term : terms) {
    const Vec m = term.low_map * env.low.mean() + term.low_shift;
    const Vec n = term.high_map * env.high.mean() + term.high_shift;
    const Vec r = t * m - n;
    const Mat k = symmetrize(Mat(term.low_map * env.low.cov() * term.low_map.transpose()));
    const Mat k_half = psd_sqrt<double>(k);
    const Mat s_high = symmetrize(Mat(term.high_map * env.high.cov() * term.high_map.transpose()));
    const Mat r_half = psd_sqrt<double>(s_high);

    // Tr((S_h^{1/2} T K T^T S_h^{1/2})^{1/2}) = |K^{1/2} T^T S_h^{1/2}|_*, whose
    // (sub)gradient in T is S_h^{1/2} V U^T K^{1/2} for Z = U diag(s) V^T.
    const Mat z = k_half * t.transpose() * r_half;
    Eigen::JacobiSVD<Mat> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const double cutoff = 1e-10 * std::max(1.0, s.size() ? s(0) : 0.0);
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > cutoff) ++rank;
    Mat nuclear_grad = Mat::Zero(t.rows(), t.cols());
    if (rank > 0) {
      nuclear_grad = r_half * svd.matrixV().leftCols(rank) *
                     svd.matrixU().leftCols(rank).transpose() * k_half;
    }

    g.t += term.q * (2.0 * r * m.transpose() + 2.0 * t * k - 2.0 * nuclear_grad);
    g.mean_low += term.q * 2.0 * term.low_map.transpose() * (t.transpose() * r);
    g.mean_high -= term.q * 2.0 * term.high_map.transpose() * r;
  }
  return g;
}

GaussianGradients gaussian_surrogate_gradients(const Mat& t, const Vec& mean_low,
                                               const Mat& root_low, const Vec& mean_high,
                                               const Mat& root_high,
                                               const std::vector<PushforwardTerm>& terms) {
  check_map_shape(t, terms);
  const Mat cov_low = root_low * root_low;
  const Mat cov_high = root_high * root_high;
  GaussianGradients g;
  g.t = Mat::Zero(t.rows(), t.cols());
  g.mean_low = Vec::Zero(mean_low.size());
  g.mean_high = Vec::Zero(mean_high.size());
  Mat j_low = Mat::Zero(root_low.rows(), root_low.cols());
  Mat j_high = Mat::Zero(root_high.rows(), root_high.cols());
  for (const auto& term : terms) {
    const Mat ta = t * term.low_map;
    const Vec m = term.low_map * mean_low + term.low_shift;
    const Vec r = t * m - term.high_map * mean_high - term.high_shift;
    const Mat k = term.low_map * cov_low * term.low_map.transpose();
    const double a = (t * k * t.transpose()).trace();
    const double c = (term.high_map * cov_high * term.high_map.transpose()).trace();
    const double coef_low = 1.0 - safe_ratio_sqrt(c, a);
    const double coef_high = 1.0 - safe_ratio_sqrt(a, c);

    g.t += term.q * (2.0 * r * m.transpose() + 2.0 * coef_low * t * k);
    g.mean_low += term.q * 2.0 * ta.transpose() * r;
    g.mean_high -= term.q * 2.0 * term.high_map.transpose() * r;
    j_low += term.q * coef_low * ta.transpose() * ta;
    j_high += term.q * coef_high * term.high_map.transpose() * term.high_map;
  }
  // Sigma = S S  =>  dF/dS = J S + S J for symmetric J = dF/dSigma.
  g.root_low = j_low * root_low + root_low * j_low;
  g.root_high = j_high * root_high + root_high * j_high;
  return g;
}

double empirical_objective(const AbstractionMap& t, const JointEmpiricalEnv& env_perturbed,
                           const ProblemInstance& inst) {
  require(env_perturbed.low.count() == env_perturbed.high.count(),
          "empirical_objective: levels have different sample counts");
  require(env_perturbed.low.dim() == inst.low_scm.dim() &&
              env_perturbed.high.dim() == inst.high_scm.dim(),
          "empirical_objective: environment dimension mismatch");
  require(t.high_dim() == inst.high_scm.dim() && t.low_dim() == inst.low_scm.dim(),
          "empirical_objective: abstraction map shape does not match the model pair");
  const double n = static_cast<double>(env_perturbed.low.count());
  double total = 0.0;
  for (std::size_t i = 0; i < inst.omega.size(); ++i) {
    const Intervention& iota = inst.omega.low()[i];
    const Intervention& eta = inst.omega.high_of(i);
    const Mat u_low = apply_intervention_exo(iota, env_perturbed.low).samples();
    const Mat u_high = apply_intervention_exo(eta, env_perturbed.high).samples();
    const Mat x_low = u_low * reduced_transform(inst.low_scm, iota).transpose();
    const Mat x_high = u_high * reduced_transform(inst.high_scm, eta).transpose();
    total += inst.q(static_cast<Eigen::Index>(i)) *
             (x_low * t.t().transpose() - x_high).squaredNorm() / n;
  }
  return total;
}

EmpiricalGradients empirical_objective_gradients(const Mat& t, const Mat& u_low,
                                                 const Mat& u_high,
                                                 const std::vector<PushforwardTerm>& terms) {
  check_map_shape(t, terms);
  require(u_low.rows() == u_high.rows(), "empirical gradients: sample counts differ");
  const double n = static_cast<double>(u_low.rows());
  EmpiricalGradients g;
  g.t = Mat::Zero(t.rows(), t.cols());
  g.theta_low = Mat::Zero(u_low.rows(), u_low.cols());
  g.theta_high = Mat::Zero(u_high.rows(), u_high.cols());
  for (const auto& term : terms) {
    Mat z_low = u_low * term.low_map.transpose();
    z_low.rowwise() += term.low_shift.transpose();
    Mat z_high = u_high * term.high_map.transpose();
    z_high.rowwise() += term.high_shift.transpose();
    const Mat resid = z_low * t.transpose() - z_high;
    const double w = 2.0 * term.q / n;
    g.t += w * resid.transpose() * z_low;
    g.theta_low += w * resid * (t * term.low_map);
    g.theta_high -= w * resid * term.high_map;
  }
  return g;
}

}  // namespace robabs
