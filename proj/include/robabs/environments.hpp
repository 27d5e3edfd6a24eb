#pragma once

#include <variant>

#include "robabs/geometry.hpp"
#include "robabs/types.hpp"

namespace robabs {

/// Exogenous environment given by its first two moments.
class GaussianEnv {
 public:
  GaussianEnv() = default;
  /// Validates dimensions and PSD-ness; eigenvalues in [-1e-10, 0) are clamped.
  GaussianEnv(Vec mean, Mat cov);

  /// Diagonal covariance built from per-variable standard deviations.
  static GaussianEnv independent(const Vec& mean, const Vec& std_dev);

  const Vec& mean() const { return mean_; }
  const Mat& cov() const { return cov_; }
  Eigen::Index dim() const { return mean_.size(); }

  geometry::Moments<double> moments() const { return {mean_, cov_}; }

 private:
  Vec mean_;
  Mat cov_;
};

/// Exogenous environment given by samples, one draw per row (uniform weights).
class EmpiricalEnv {
 public:
  EmpiricalEnv() = default;
  explicit EmpiricalEnv(Mat samples);

  const Mat& samples() const { return samples_; }
  Eigen::Index dim() const { return samples_.cols(); }
  Eigen::Index count() const { return samples_.rows(); }

  /// Sample mean and (biased, 1/N) covariance.
  GaussianEnv fit_gaussian() const;

 private:
  Mat samples_;
};

/// Product environment rho_low (x) rho_high. No coupling between levels is stored.
template <typename Env>
struct JointEnv {
  Env low;
  Env high;
};

using JointGaussianEnv = JointEnv<GaussianEnv>;
using JointEmpiricalEnv = JointEnv<EmpiricalEnv>;
using AnyJointEnv = std::variant<JointGaussianEnv, JointEmpiricalEnv>;

/// Additive displacements of the nominal exogenous samples, one matrix per level.
struct PerturbationPair {
  Mat theta_low;
  Mat theta_high;
};

/// Squared W2 between two Gaussian environments (Gelbrich formula).
double w2_sq(const GaussianEnv& a, const GaussianEnv& b);

/// Index-paired squared distance (1/N) sum_i |u_i - v_i|^2 between sample sets of
/// equal size. Upper-bounds the exact empirical W2^2.
double w2_sq(const EmpiricalEnv& a, const EmpiricalEnv& b);

/// W2^2 on a product space: sum of the per-level squared distances.
double joint_w2_sq(const JointGaussianEnv& a, const JointGaussianEnv& b);
double joint_w2_sq(const JointEmpiricalEnv& a, const JointEmpiricalEnv& b);
/// Runtime-dispatched variant; throws InvalidArgument when the kinds differ.
double joint_w2_sq(const AnyJointEnv& a, const AnyJointEnv& b);

}  // namespace robabs
