#pragma once

// Gaussian optimal-transport toolbox: PSD roots, Gelbrich (Bures-Wasserstein)
// distance, ball projections, the Frobenius prox, barycenters and Monge maps.
// Everything is templated on the scalar type and works on dynamic Eigen
// matrices.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "robabs/types.hpp"

namespace robabs::geometry {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Mean and covariance of a Gaussian.
template <typename Scalar>
struct Moments {
  VectorX<Scalar> mean;
  MatrixX<Scalar> cov;
};

/// Affine map x -> linear * x + offset.
template <typename Scalar>
struct AffineMap {
  MatrixX<Scalar> linear;
  VectorX<Scalar> offset;

  VectorX<Scalar> operator()(const VectorX<Scalar>& x) const {
    return linear * x + offset;
  }
};

template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

namespace detail {

template <typename Scalar>
Scalar scale_of(const MatrixX<Scalar>& m) {
  return std::max(Scalar(1), m.cwiseAbs().maxCoeff());
}

template <typename Scalar>
void check_square_symmetric(const MatrixX<Scalar>& m, const char* who) {
  if (m.rows() != m.cols()) {
    throw InvalidArgument(std::string(who) + ": matrix is not square");
  }
  if (m.size() == 0) return;
  const Scalar asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > Scalar(1e-8) * scale_of(m)) {
    throw InvalidArgument(std::string(who) + ": matrix is not symmetric");
  }
}

// Applies f to the (clamped) eigenvalues of a symmetric matrix.
template <typename Scalar, typename F>
MatrixX<Scalar> spectral_apply(const MatrixX<Scalar>& m, F f) {
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(symmetrize(m));
  VectorX<Scalar> ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    ev(i) = f(std::max(ev(i), Scalar(0)));
  }
  MatrixX<Scalar> out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return symmetrize(out);
}

}  // namespace detail

/// Throws unless `m` is symmetric with smallest eigenvalue above -tol * scale.
template <typename Scalar>
void check_psd(const MatrixX<Scalar>& m, const char* who, Scalar tol = Scalar(1e-8)) {
  detail::check_square_symmetric(m, who);
  if (m.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(symmetrize(m), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol * detail::scale_of(m)) {
    throw InvalidArgument(std::string(who) + ": matrix is not positive semidefinite");
  }
}

/// Symmetrizes and clamps negative eigenvalues to zero.
template <typename Scalar>
MatrixX<Scalar> psd_repair(const MatrixX<Scalar>& m) {
  return detail::spectral_apply<Scalar>(m, [](Scalar v) { return v; });
}

/// Principal square root of a symmetric PSD matrix. Negative eigenvalues
/// (round-off) are clamped to zero before rooting.
template <typename Scalar>
MatrixX<Scalar> psd_sqrt(const MatrixX<Scalar>& m) {
  detail::check_square_symmetric(m, "psd_sqrt");
  return detail::spectral_apply<Scalar>(m, [](Scalar v) { return std::sqrt(v); });
}

/// Pseudo-inverse square root: eigenvalues below rel_tol * max are treated as zero.
template <typename Scalar>
MatrixX<Scalar> psd_inv_sqrt(const MatrixX<Scalar>& m, Scalar rel_tol = Scalar(1e-12)) {
  detail::check_square_symmetric(m, "psd_inv_sqrt");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(symmetrize(m));
  const Scalar cutoff = rel_tol * std::max(es.eigenvalues().cwiseAbs().maxCoeff(), Scalar(1e-300));
  VectorX<Scalar> ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    ev(i) = ev(i) > cutoff ? Scalar(1) / std::sqrt(ev(i)) : Scalar(0);
  }
  return symmetrize(MatrixX<Scalar>(es.eigenvectors() * ev.asDiagonal() *
                                    es.eigenvectors().transpose()));
}

/// Tr((A^{1/2} B A^{1/2})^{1/2}), the fidelity term of the Bures metric.
/// Evaluated as the nuclear norm of A^{1/2} B^{1/2}: rooting the eigenvalues of
/// A^{1/2} B A^{1/2} turns round-off of 1e-16 into errors of 1e-8 when B is
/// singular, singular values do not.
template <typename Scalar>
Scalar bures_fidelity(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  const MatrixX<Scalar> prod = psd_sqrt(a) * psd_sqrt(b);
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(prod);
  return svd.singularValues().sum();
}

/// Squared 2-Wasserstein distance between N(mean_a, cov_a) and N(mean_b, cov_b):
/// |m_a - m_b|^2 + Tr(S_a) + Tr(S_b) - 2 Tr((S_a^{1/2} S_b S_a^{1/2})^{1/2}).
template <typename Scalar>
Scalar gelbrich_distance_sq(const VectorX<Scalar>& mean_a, const MatrixX<Scalar>& cov_a,
                            const VectorX<Scalar>& mean_b, const MatrixX<Scalar>& cov_b) {
  if (mean_a.size() != mean_b.size() || cov_a.rows() != mean_a.size() ||
      cov_b.rows() != mean_b.size()) {
    throw InvalidArgument("gelbrich_distance_sq: dimension mismatch");
  }
  check_psd(cov_a, "gelbrich_distance_sq");
  check_psd(cov_b, "gelbrich_distance_sq");
  const Scalar mean_term = (mean_a - mean_b).squaredNorm();
  const Scalar cov_term = cov_a.trace() + cov_b.trace() - Scalar(2) * bures_fidelity(cov_a, cov_b);
  return std::max(Scalar(0), mean_term + cov_term);
}

template <typename Scalar>
Scalar gelbrich_distance_sq(const Moments<Scalar>& a, const Moments<Scalar>& b) {
  return gelbrich_distance_sq(a.mean, a.cov, b.mean, b.cov);
}

/// Euclidean projection onto {X : |X|_F <= bound}.
template <typename Derived>
MatrixX<typename Derived::Scalar> project_frobenius_ball(const Eigen::MatrixBase<Derived>& theta,
                                                         typename Derived::Scalar bound) {
  using Scalar = typename Derived::Scalar;
  if (bound < Scalar(0)) throw InvalidArgument("project_frobenius_ball: negative bound");
  const Scalar norm = theta.norm();
  if (norm <= bound) return theta;
  return theta * (bound / norm);
}

/// prox of lambda * |.|_F: block soft-thresholding of the whole matrix.
template <typename Derived>
MatrixX<typename Derived::Scalar> frobenius_prox(const Eigen::MatrixBase<Derived>& a,
                                                 typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  if (lambda < Scalar(0)) throw InvalidArgument("frobenius_prox: negative lambda");
  const Scalar norm = a.norm();
  if (norm <= lambda) return MatrixX<Scalar>::Zero(a.rows(), a.cols());
  return (Scalar(1) - lambda / norm) * a;
}

/// Pulls `env` back onto the Gelbrich ball of radius `eps` around `center`.
///
/// Points inside the ball are returned unchanged. Otherwise the mean and the
/// covariance square root are moved along the segment towards the center,
/// mu <- mu_c + a (mu - mu_c), S <- S_c + a (S - S_c), with
/// a = eps / sqrt(|mu - mu_c|^2 + |S - S_c|_F^2). That coordinate distance
/// equals the Gelbrich distance when the covariances commute and bounds it from
/// above otherwise, so the result always satisfies the ball constraint.
template <typename Scalar>
Moments<Scalar> project_gelbrich_ball(const Moments<Scalar>& env, const Moments<Scalar>& center,
                                      Scalar eps) {
  if (!(eps > Scalar(0))) throw InvalidArgument("project_gelbrich_ball: radius must be positive");
  check_psd(center.cov, "project_gelbrich_ball");
  if (std::isinf(eps)) return env;
  const Scalar dist = std::sqrt(gelbrich_distance_sq(env, center));
  if (dist <= eps) return env;

  const MatrixX<Scalar> root = psd_sqrt(env.cov);
  const MatrixX<Scalar> root_c = psd_sqrt(center.cov);
  const Scalar coord_dist =
      std::sqrt((env.mean - center.mean).squaredNorm() + (root - root_c).squaredNorm());
  const Scalar alpha = eps / std::max(coord_dist, dist);

  Moments<Scalar> out;
  out.mean = center.mean + alpha * (env.mean - center.mean);
  const MatrixX<Scalar> new_root = symmetrize(MatrixX<Scalar>(root_c + alpha * (root - root_c)));
  out.cov = symmetrize(MatrixX<Scalar>(new_root * new_root));
  return out;
}

/// Result of the barycenter fixed-point iteration.
template <typename Scalar>
struct Barycenter {
  Moments<Scalar> moments;
  int iterations = 0;
  Scalar residual = 0;
};

/// Wasserstein barycenter of Gaussians. The mean is the weighted average; the
/// covariance solves S = sum_j w_j (S^{1/2} S_j S^{1/2})^{1/2}, iterated with
/// damping 1 and falling back to 0.5 once the residual stops decreasing.
/// Throws ConvergenceError when `max_iter` is exhausted.
template <typename Scalar>
Barycenter<Scalar> barycenter_gaussian(const std::vector<Moments<Scalar>>& envs,
                                       const VectorX<Scalar>& weights,
                                       Scalar tol = Scalar(1e-8), int max_iter = 2000) {
  if (envs.empty()) throw InvalidArgument("barycenter_gaussian: no inputs");
  if (static_cast<std::size_t>(weights.size()) != envs.size()) {
    throw InvalidArgument("barycenter_gaussian: weight count mismatch");
  }
  if ((weights.array() <= Scalar(0)).any() || std::abs(weights.sum() - Scalar(1)) > Scalar(1e-9)) {
    throw InvalidArgument("barycenter_gaussian: weights must be positive and sum to one");
  }
  const Eigen::Index d = envs.front().mean.size();
  for (const auto& e : envs) {
    if (e.mean.size() != d || e.cov.rows() != d || e.cov.cols() != d) {
      throw InvalidArgument("barycenter_gaussian: dimension mismatch");
    }
    check_psd(e.cov, "barycenter_gaussian");
  }

  Barycenter<Scalar> out;
  out.moments.mean = VectorX<Scalar>::Zero(d);
  MatrixX<Scalar> cov = MatrixX<Scalar>::Zero(d, d);
  for (std::size_t j = 0; j < envs.size(); ++j) {
    out.moments.mean += weights(j) * envs[j].mean;
    cov += weights(j) * envs[j].cov;
  }

  Scalar damping = 1;
  Scalar prev_residual = std::numeric_limits<Scalar>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    const MatrixX<Scalar> root = psd_sqrt(cov);
    MatrixX<Scalar> rhs = MatrixX<Scalar>::Zero(d, d);
    for (std::size_t j = 0; j < envs.size(); ++j) {
      rhs += weights(j) * psd_sqrt(symmetrize(MatrixX<Scalar>(root * envs[j].cov * root)));
    }
    const Scalar residual = (rhs - cov).norm();
    out.iterations = it;
    out.residual = residual;
    if (residual <= tol) {
      out.moments.cov = psd_repair(rhs);
      return out;
    }
    if (residual > prev_residual) damping = Scalar(0.5);
    prev_residual = residual;
    cov = psd_repair(MatrixX<Scalar>((Scalar(1) - damping) * cov + damping * rhs));
  }
  throw ConvergenceError("barycenter_gaussian: no convergence within max_iter",
                         static_cast<double>(out.residual));
}

/// Optimal transport map between two Gaussians, x -> m_dst + A (x - m_src) with
/// A = S_src^{-1/2} (S_src^{1/2} S_dst S_src^{1/2})^{1/2} S_src^{-1/2}.
/// This is the same matrix as S_dst^{1/2}(S_dst^{1/2} S_src S_dst^{1/2})^{-1/2} S_dst^{1/2}
/// whenever both covariances are nonsingular, but only needs S_src invertible.
template <typename Scalar>
AffineMap<Scalar> monge_map_gaussian(const Moments<Scalar>& src, const Moments<Scalar>& dst) {
  if (src.mean.size() != dst.mean.size()) throw InvalidArgument("monge_map_gaussian: dimension mismatch");
  check_psd(src.cov, "monge_map_gaussian");
  check_psd(dst.cov, "monge_map_gaussian");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(symmetrize(src.cov), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= Scalar(1e-12) * detail::scale_of(src.cov)) {
    throw InvalidArgument("monge_map_gaussian: source covariance is singular");
  }
  const MatrixX<Scalar> root = psd_sqrt(src.cov);
  const MatrixX<Scalar> inv_root = psd_inv_sqrt(src.cov);
  const MatrixX<Scalar> middle = psd_sqrt(symmetrize(MatrixX<Scalar>(root * dst.cov * root)));
  AffineMap<Scalar> map;
  map.linear = symmetrize(MatrixX<Scalar>(inv_root * middle * inv_root));
  map.offset = dst.mean - map.linear * src.mean;
  return map;
}

}  // namespace robabs::geometry
