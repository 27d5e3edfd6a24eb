#include "robabs/environments.hpp"

namespace robabs {

GaussianEnv::GaussianEnv(Vec mean, Mat cov) : mean_(std::move(mean)) {
  require(cov.rows() == mean_.size() && cov.cols() == mean_.size(),
          "GaussianEnv: mean/cov dimension mismatch");
  geometry::check_psd<double>(cov, "GaussianEnv", 1e-10);
  cov_ = geometry::psd_repair<double>(cov);
}

GaussianEnv GaussianEnv::independent(const Vec& mean, const Vec& std_dev) {
  require(mean.size() == std_dev.size(), "GaussianEnv: mean/std dimension mismatch");
  require((std_dev.array() >= 0).all(), "GaussianEnv: negative standard deviation");
  return GaussianEnv(mean, std_dev.array().square().matrix().asDiagonal());
}

EmpiricalEnv::EmpiricalEnv(Mat samples) : samples_(std::move(samples)) {
  require(samples_.rows() >= 1, "EmpiricalEnv: needs at least one sample");
  require(samples_.allFinite(), "EmpiricalEnv: non-finite sample");
}

GaussianEnv EmpiricalEnv::fit_gaussian() const {
  const Vec mean = samples_.colwise().mean().transpose();
  const Mat centered = samples_.rowwise() - mean.transpose();
  const Mat cov = centered.transpose() * centered / static_cast<double>(samples_.rows());
  return GaussianEnv(mean, geometry::symmetrize(cov));
}

double w2_sq(const GaussianEnv& a, const GaussianEnv& b) {
  return geometry::gelbrich_distance_sq<double>(a.mean(), a.cov(), b.mean(), b.cov());
}

double w2_sq(const EmpiricalEnv& a, const EmpiricalEnv& b) {
  require(a.count() == b.count() && a.dim() == b.dim(),
          "w2_sq: empirical environments must have equal shape");
  return (a.samples() - b.samples()).squaredNorm() / static_cast<double>(a.count());
}

double joint_w2_sq(const JointGaussianEnv& a, const JointGaussianEnv& b) {
  return w2_sq(a.low, b.low) + w2_sq(a.high, b.high);
}

double joint_w2_sq(const JointEmpiricalEnv& a, const JointEmpiricalEnv& b) {
  return w2_sq(a.low, b.low) + w2_sq(a.high, b.high);
}

double joint_w2_sq(const AnyJointEnv& a, const AnyJointEnv& b) {
  require(a.index() == b.index(), "joint_w2_sq: environment kinds differ");
  if (const auto* ga = std::get_if<JointGaussianEnv>(&a)) {
    return joint_w2_sq(*ga, std::get<JointGaussianEnv>(b));
  }
  return joint_w2_sq(std::get<JointEmpiricalEnv>(a), std::get<JointEmpiricalEnv>(b));
}

}  // namespace robabs
