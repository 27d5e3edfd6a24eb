#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "robabs/environments.hpp"
#include "robabs/scm.hpp"
#include "robabs/types.hpp"

namespace robabs {

/// Linear abstraction tau(x) = T x, with T of shape h x l (h <= l).
class AbstractionMap {
 public:
  AbstractionMap() = default;
  explicit AbstractionMap(Mat t);

  const Mat& t() const { return t_; }
  Eigen::Index high_dim() const { return t_.rows(); }
  Eigen::Index low_dim() const { return t_.cols(); }

 private:
  Mat t_;
};

enum class InitPolicy {
  kMeanLeastSquares,  ///< fit T between nominal pushforward means, random fallback
  kRandom,            ///< i.i.d. N(0, 0.01) entries
  kGiven,             ///< use SolverConfig::t_given
};

struct SolverConfig {
  double eps_low = 0.0;
  double eps_high = 0.0;
  double lr_t = 1e-2;
  double lr_env = 1e-3;
  /// Weight of the Frobenius prox applied to covariance roots; defaults to lr_env.
  std::optional<double> prox_lambda;
  int k_min = 5;
  int k_max = 2;
  int max_outer = 5000;
  double tol = 1e-4;
  std::uint64_t seed = 0;
  InitPolicy t_init = InitPolicy::kMeanLeastSquares;
  Mat t_given;

  double lambda() const { return prox_lambda.value_or(lr_env); }
  void validate() const;
};

/// Everything a solver needs: both models, the omega map, the nominal
/// (abducted) environment and the weights q over low-level interventions.
struct ProblemInstance {
  LinearScm low_scm;
  LinearScm high_scm;
  InterventionMap omega;
  AnyJointEnv env;
  Vec q;

  /// Uniform q over omega's low-level interventions.
  static ProblemInstance uniform(LinearScm low, LinearScm high, InterventionMap omega,
                                 AnyJointEnv env);

  bool is_gaussian() const { return std::holds_alternative<JointGaussianEnv>(env); }
  const JointGaussianEnv& gaussian_env() const;
  const JointEmpiricalEnv& empirical_env() const;
  void validate() const;
};

/// Per-intervention linear pieces of the pushforwards: the low-level exogenous
/// vector u maps to low_map * u + low_shift (pinned coordinates folded into the
/// shift), and likewise at the high level for omega(iota).
struct PushforwardTerm {
  double q = 0.0;
  Mat low_map;     // l x l, L_iota restricted to free coordinates
  Vec low_shift;   // l
  Mat high_map;    // h x h
  Vec high_shift;  // h
};

std::vector<PushforwardTerm> pushforward_terms(const ProblemInstance& inst);

/// Expected squared Gelbrich distance between T-pushed low-level and high-level
/// interventional Gaussians. `env` holds the (unadjusted) exogenous moments.
double gaussian_objective(const AbstractionMap& t, const JointGaussianEnv& env,
                          const ProblemInstance& inst);

/// Smooth lower bound of gaussian_objective obtained by replacing the nuclear
/// norm with the product of Frobenius norms of the covariance roots.
double gaussian_surrogate(const AbstractionMap& t, const JointGaussianEnv& env,
                          const ProblemInstance& inst);

/// Squared Frobenius discrepancy between pushed low-level samples and
/// high-level samples, averaged over rows and weighted by q. `env_perturbed`
/// holds U + Theta; pinned columns are overwritten per intervention.
double empirical_objective(const AbstractionMap& t, const JointEmpiricalEnv& env_perturbed,
                           const ProblemInstance& inst);

/// Gradients of the Gaussian objectives. The covariance gradients are taken
/// with respect to symmetric roots S (Sigma = S S) of the surrogate.
struct GaussianGradients {
  Mat t;
  Vec mean_low;
  Vec mean_high;
  Mat root_low;
  Mat root_high;
};

/// d gaussian_objective / dT and d/dmu (the mean terms are shared with the surrogate).
GaussianGradients gaussian_objective_gradients(const Mat& t, const JointGaussianEnv& env,
                                               const std::vector<PushforwardTerm>& terms);
/// d gaussian_surrogate / d(T, mu_low, mu_high, S_low, S_high).
GaussianGradients gaussian_surrogate_gradients(const Mat& t, const Vec& mean_low,
                                               const Mat& root_low, const Vec& mean_high,
                                               const Mat& root_high,
                                               const std::vector<PushforwardTerm>& terms);
double gaussian_surrogate_at_roots(const Mat& t, const Vec& mean_low, const Mat& root_low,
                                   const Vec& mean_high, const Mat& root_high,
                                   const std::vector<PushforwardTerm>& terms);

struct EmpiricalGradients {
  Mat t;
  Mat theta_low;
  Mat theta_high;
};

/// Gradients of empirical_objective at U + Theta with respect to T and the perturbations.
EmpiricalGradients empirical_objective_gradients(const Mat& t, const Mat& u_low,
                                                 const Mat& u_high,
                                                 const std::vector<PushforwardTerm>& terms);

/// Output of an iterative fit.
struct FitResult {
  AbstractionMap map;
  /// Objective after initialization followed by one value per outer iteration.
  std::vector<double> trace;
  bool converged = false;
  int outer_iterations = 0;
  /// Worst-case environment (Gaussian fits).
  std::optional<JointGaussianEnv> worst_env;
  /// Final perturbations (empirical fits).
  std::optional<PerturbationPair> perturbation;
  /// Per outer iteration: distance of the adversarial environment to the nominal
  /// one (Gelbrich distance, or |Theta|_F / sqrt(N)).
  std::vector<double> dist_low;
  std::vector<double> dist_high;
};

/// Initial T according to cfg.t_init.
Mat initial_map(const ProblemInstance& inst, const SolverConfig& cfg);

FitResult fit_diroca_gaussian(const ProblemInstance& inst, const SolverConfig& cfg);
FitResult fit_diroca_empirical(const ProblemInstance& inst, const SolverConfig& cfg);
/// Non-robust gradient descent on the matching objective of the instance's kind.
FitResult fit_grad(const ProblemInstance& inst, const SolverConfig& cfg);
/// Barycentric baseline (closed form for Gaussian instances, gradient descent on
/// averaged mixing matrices for empirical ones).
FitResult fit_bary(const ProblemInstance& inst, const SolverConfig& cfg);

enum class AbsLinVariant { kPerfect, kNoisy };

/// Least-squares abstraction from paired observational samples; the noisy
/// variant adds reg * |T|_1 and is solved by proximal gradient.
AbstractionMap fit_abslin(const Mat& endo_low_obs, const Mat& endo_high_obs,
                          AbsLinVariant variant, double reg = 0.01);

}  // namespace robabs
